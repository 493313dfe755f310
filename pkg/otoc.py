"""
Out-of-time-order correlators -<[x(t), p]^2> in the energy eigenbasis.

The microcanonical correlator of state m is evaluated as
c_m(t) = Σ_k |b_mk(t)|², with

    b_mk(t) = κ Σ_l x_ml x_lk (E_lk e^{i E_ml t} - E_ml e^{i E_lk t}),

which is the four-phase triple sum regrouped into a squared modulus; each
time sample costs two K_t×K_t matrix-vector products.
"""
import logging
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd
from scipy.stats import linregress
from tqdm import tqdm

from exceptions import NoGrowthWindow, TruncationWarning

logger = logging.getLogger(__name__)

BOLTZMANN_CUTOFF = 1e-10
TAIL_STATES = 10
TAIL_FRACTION = 0.01
GROWTH_START = 0.2
MAX_VARIATION = 0.3
MIN_WINDOW = 1.0
MIN_SAMPLES = 20
PEAK_RATIO = 1.18
RISE_SAMPLES = 5


class OtocKind(str, Enum):
    MICROCANONICAL = "Microcanonical"
    THERMAL = "Thermal"


@dataclass(frozen=True)
class OtocSeries:
    times: np.ndarray
    values: np.ndarray
    kind: OtocKind
    truncation: int
    convention: str
    state: int = None
    beta: float = None

    def to_frame(self):
        return pd.DataFrame({"t": self.times, "value": self.values})

    def metadata(self):
        label = {"m": self.state} if self.kind is OtocKind.MICROCANONICAL else {"beta": self.beta}
        return {"kind": self.kind.value, **label, "K_t": self.truncation, "convention": self.convention}


@dataclass(frozen=True)
class GrowthFit:
    """Least-squares fit of ln c(t) = 2 λ t + const over a growth window."""

    lambda_hat: float
    r_squared: float
    window: tuple
    slope_stderr: float
    saturation_time: float = None

    def __iter__(self):
        return iter((self.lambda_hat, self.r_squared, self.window))


@dataclass(frozen=True)
class GrowthReport:
    table: pd.DataFrame
    bands: list

    @property
    def growing_states(self):
        return set(int(m) for m in self.table.loc[self.table["has_window"], "m"])


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or not np.all(np.isfinite(times)):
        raise ValueError("times must be a finite 1D sequence")
    return times


def _amplitudes(elements, m, times):
    """b_mk(t) for every sample, shape (len(times), K_t)."""
    energies = elements.energies
    x = elements.x_elements
    weighted = x * elements.energy_differences
    row = x[m]
    phases = np.exp(-1j * np.outer(times, energies))
    first = np.exp(1j * energies[m] * times)[:, None] * ((row * phases) @ weighted)
    second = phases * ((row * elements.energy_differences[m] * phases.conj()) @ x)
    return elements.kappa * (first - second)


def truncation_tail(elements, m, tail=TAIL_STATES):
    """Share of c_m(0) carried by the last ``tail`` basis states."""
    weights = np.abs(_amplitudes(elements, m, np.zeros(1))[0]) ** 2
    total = weights.sum()
    return float(weights[-tail:].sum() / total) if total > 0 else 0.0


def microcanonical_otoc(elements, m, times, check_truncation=True):
    """
    Microcanonical OTOC c_m(t) of eigenstate m.

    Parameters
    ----------
    elements : MatrixElementSet
        Truncated x table and energies
    m : int
        Eigenstate, below the truncation
    times : array_like
        Sample times
    check_truncation : bool, optional
        Warn when the basis tail carries more than 1% of c_m(0), by default True

    Returns
    -------
    OtocSeries
    """
    if not 0 <= m < elements.k_trunc:
        raise ValueError(f"state m={m} outside the truncation 0..{elements.k_trunc - 1}")
    times = _check_times(times)
    if check_truncation:
        share = truncation_tail(elements, m)
        if share > TAIL_FRACTION:
            warnings.warn(
                f"last {TAIL_STATES} basis states carry {share:.2%} of c_{m}(0); raise K_t",
                TruncationWarning,
                stacklevel=2,
            )
    values = np.sum(np.abs(_amplitudes(elements, m, times)) ** 2, axis=1)
    return OtocSeries(times, values, OtocKind.MICROCANONICAL, elements.k_trunc, elements.convention.value, state=m)


def matrix_oracle(elements, m, t):
    """-([X(t), P]^2)_mm from explicit K_t×K_t matrix products."""
    x = elements.x_elements
    phase = np.exp(1j * elements.energies * t)
    x_t = phase[:, None] * x * phase.conj()[None, :]
    p = 1j * elements.kappa * elements.energy_differences * x
    commutator = x_t @ p - p @ x_t
    return float(-(commutator @ commutator)[m, m].real)


def boltzmann_weights(energies, beta, cutoff=BOLTZMANN_CUTOFF):
    """Normalised weights e^{-β(E_m - E_0)} of the states above ``cutoff``."""
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    weights = np.exp(-beta * (energies - energies[0]))
    weights = weights[weights >= cutoff]
    return weights / weights.sum()


def thermal_otoc(elements, beta, times, cutoff=BOLTZMANN_CUTOFF, quiet=True):
    """
    Thermal OTOC 1/Z Σ_m e^{-βE_m} c_m(t).

    States whose Boltzmann factor relative to the ground state falls below
    ``cutoff`` are dropped from both the sum and Z.
    """
    weights = boltzmann_weights(elements.energies, beta, cutoff)
    times = _check_times(times)
    values = np.zeros(len(times))
    for m, w in enumerate(tqdm(weights, desc=f"Thermal OTOC beta={beta:g}", disable=quiet)):
        values += w * microcanonical_otoc(elements, m, times, check_truncation=False).values
    logger.debug("thermal OTOC beta=%g over %d states", beta, len(weights))
    return OtocSeries(times, values, OtocKind.THERMAL, elements.k_trunc, elements.convention.value, beta=float(beta))


def _longest_window(times, log_values, start, max_variation, stop=None):
    """
    Longest run of consecutive segments with positive local slopes whose
    spread stays within max <= (1 + max_variation) min.

    Returns (first sample, last sample) or None.
    """
    slopes = np.diff(log_values) / np.diff(times)
    usable = (times[:-1] >= start) & np.isfinite(slopes) & (slopes > 0)
    if stop is not None:
        usable &= times[1:] <= stop
    best, best_length = None, 0.0
    lo = 0
    low, high = [], []  # monotone deques of segment indices
    for hi in range(len(slopes)):
        if not usable[hi]:
            lo, low, high = hi + 1, [], []
            continue
        while low and slopes[low[-1]] >= slopes[hi]:
            low.pop()
        low.append(hi)
        while high and slopes[high[-1]] <= slopes[hi]:
            high.pop()
        high.append(hi)
        while slopes[high[0]] > (1.0 + max_variation) * slopes[low[0]]:
            lo += 1
            if low[0] < lo:
                low.pop(0)
            if high[0] < lo:
                high.pop(0)
        length = times[hi + 1] - times[lo]
        if length > best_length:
            best, best_length = (lo, hi + 1), length
    return best


def _saturation_time(times, values, after):
    for i in range(max(after, 1), len(values) - 1):
        if values[i] >= values[i - 1] and values[i] >= values[i + 1]:
            return float(times[i])
    return None


def first_rise(values):
    """
    Sample indices (dip, peak) of the first rise of a correlator: the first
    interior local minimum and the first local maximum after it.

    Either index falls back to the last sample when the extremum is missing.
    """
    values = np.asarray(values)
    last = len(values) - 1
    inner = values[1:-1]
    minima = np.flatnonzero((inner <= values[:-2]) & (inner <= values[2:])) + 1
    dip = int(minima[0]) if len(minima) else last
    maxima = np.flatnonzero((inner >= values[:-2]) & (inner >= values[2:])) + 1
    maxima = maxima[maxima > dip]
    peak = int(maxima[0]) if len(maxima) else last
    return dip, peak


def fit_growth_rate(
    series,
    window=None,
    start=GROWTH_START,
    max_variation=MAX_VARIATION,
    min_length=MIN_WINDOW,
    min_samples=MIN_SAMPLES,
    stop=None,
):
    """
    Exponential growth rate λ of a correlator, c(t) ~ e^{2λt}.

    Parameters
    ----------
    series : OtocSeries
        Series to fit
    window : tuple[float, float], optional
        Explicit (t_lo, t_hi); by default the longest interval between ``start``
        and ``stop`` where ln c rises with a local slope varying by less than
        ``max_variation``
    min_length : float, optional
        Shortest admissible auto-detected window, by default 1.0
    min_samples : int, optional
        Fewest samples a window may hold, by default 20
    stop : float, optional
        Latest time an auto-detected window may reach, by default the end of the series

    Returns
    -------
    GrowthFit
        Unpacks as (lambda_hat, r_squared, window)

    Raises
    ------
    NoGrowthWindow
        When no qualifying interval exists
    """
    times, values = np.asarray(series.times), np.asarray(series.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_values = np.where(values > 0, np.log(np.where(values > 0, values, 1.0)), np.nan)

    if window is not None:
        t_lo, t_hi = window
        idx = np.flatnonzero((times >= t_lo) & (times <= t_hi) & np.isfinite(log_values))
        if len(idx) < min_samples:
            raise ValueError(f"window {window} holds {len(idx)} usable samples, need {min_samples}")
        first, last = idx[0], idx[-1]
    else:
        found = _longest_window(times, log_values, start, max_variation, stop)
        if found is None:
            raise NoGrowthWindow("ln c(t) never rises after the start time")
        first, last = found
        length = times[last] - times[first]
        if length < min_length or last - first + 1 < min_samples:
            raise NoGrowthWindow(f"longest growth window [{times[first]:.3g}, {times[last]:.3g}] is too short")
        idx = np.arange(first, last + 1)

    fit = linregress(times[idx], log_values[idx])
    return GrowthFit(
        lambda_hat=float(fit.slope / 2.0),
        r_squared=float(fit.rvalue**2),
        window=(float(times[first]), float(times[last])),
        slope_stderr=float(fit.stderr),
        saturation_time=_saturation_time(times, values, last),
    )


def collect_bands(states, max_gap=1):
    """Group sorted state indices into (first, last) runs, bridging gaps of up to ``max_gap`` states."""
    bands = []
    for m in sorted(states):
        if bands and m - bands[-1][1] <= max_gap + 1:
            bands[-1][1] = m
        else:
            bands.append([m, m])
    return [tuple(b) for b in bands]


def _rise_fit(series, t_dip, t_peak, max_variation):
    try:
        return fit_growth_rate(
            series, start=t_dip, stop=t_peak, max_variation=max_variation, min_length=0.0, min_samples=RISE_SAMPLES
        )
    except NoGrowthWindow:
        pass
    try:
        return fit_growth_rate(series, window=(t_dip, t_peak), min_samples=3)
    except ValueError:
        # rise too short to hold three samples
        return None


def growth_bands(elements, states, times, quiet=True, peak_ratio=PEAK_RATIO, max_variation=MAX_VARIATION):
    """
    Classify the microcanonical series in ``states`` and collect the growing ones into bands.

    A state grows when the first peak of c_m(t) comes at least ``peak_ratio``
    times later than the median first-peak time of all evaluated states, so
    the rule carries the time scale of the potential with it. The rate of a
    growing state is fitted over the steadiest stretch of its first rise.

    Returns
    -------
    (GrowthReport, dict[int, OtocSeries])
        Per-state table (m, E, t_dip, t_peak, peak_ratio, has_window,
        lambda_hat, r_squared, t_lo, t_hi, saturation_time) with the bands,
        and the series by state
    """
    series, rises = {}, {}
    for m in tqdm(list(states), desc="Microcanonical OTOC", disable=quiet):
        s = microcanonical_otoc(elements, m, times)
        series[m] = s
        dip, peak = first_rise(s.values)
        rises[m] = (float(s.times[dip]), float(s.times[peak]))
    median_peak = float(np.median([peak for _, peak in rises.values()])) if rises else np.nan

    rows = []
    for m, s in series.items():
        t_dip, t_peak = rises[m]
        ratio = t_peak / median_peak if median_peak > 0 else np.nan
        row = {"m": m, "E": float(elements.energies[m]), "t_dip": t_dip, "t_peak": t_peak, "peak_ratio": ratio}
        fit = _rise_fit(s, t_dip, t_peak, max_variation) if ratio >= peak_ratio and t_peak > t_dip else None
        if fit is not None:
            row.update(
                has_window=True,
                lambda_hat=fit.lambda_hat,
                r_squared=fit.r_squared,
                t_lo=fit.window[0],
                t_hi=fit.window[1],
                saturation_time=t_peak,
            )
        else:
            row.update(
                has_window=False, lambda_hat=np.nan, r_squared=np.nan, t_lo=np.nan, t_hi=np.nan, saturation_time=np.nan
            )
        rows.append(row)
    columns = [
        "m", "E", "t_dip", "t_peak", "peak_ratio", "has_window",
        "lambda_hat", "r_squared", "t_lo", "t_hi", "saturation_time",
    ]
    table = pd.DataFrame(rows, columns=columns)
    bands = collect_bands(table.loc[table["has_window"], "m"].astype(int))
    logger.info("growth bands: %s (median first peak %.3g)", bands or "none", median_peak)
    return GrowthReport(table, bands), series
