"""
Spectral statistics: successive level differences with their dips and
clusters, Gaussian-smoothed density of states, doublet splittings and
position moments of the eigenstates.
"""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.signal import find_peaks
from scipy.stats import norm

from classical_dynamics import hilltops
from schrodinger import build_hamiltonian, eigensolve

logger = logging.getLogger(__name__)

MIN_LEVELS = 8
SMOOTHING_KERNEL = np.array([0.25, 0.5, 0.25])
DIP_PROMINENCE = 0.1
CLUSTER_FACTOR = 1.5
SMOOTHING_FACTOR = 2.0
DOS_POINTS = 400
DOS_MARGIN = 3.0
SUPPORT_MASS = 0.99
# probability on one side of the hilltop that marks a state as localised
LOCALISED = 0.75


@dataclass(frozen=True)
class LevelDifferences:
    """
    ΔE_n = E_{n+1} - E_n and its 3-point binomial smoothing.

    ``dips`` holds (n, E) with E the midpoint of the two levels; ``clusters``
    holds inclusive (first, last) ranges of n.
    """

    diffs: np.ndarray
    smoothed: np.ndarray
    dips: list
    clusters: list
    energies: np.ndarray

    def to_frame(self):
        n = np.arange(len(self.diffs))
        in_cluster = np.zeros(len(n), dtype=bool)
        for first, last in self.clusters:
            in_cluster[first : last + 1] = True
        dip = np.isin(n, [d[0] for d in self.dips])
        columns = {"n": n, "E": self.energies[:-1], "dE": self.diffs, "smoothed": self.smoothed}
        return pd.DataFrame({**columns, "dip": dip, "cluster": in_cluster})

    def cluster_states(self):
        """Eigenstates touched by a cluster: n .. n+1 for every clustered difference."""
        states = set()
        for first, last in self.clusters:
            states.update(range(first, last + 2))
        return states

    def local_spacing(self, n):
        """Mean spacing over the three differences under the smoothing stencil at n."""
        first, last = max(n - 1, 0), min(n + 2, len(self.energies) - 1)
        return float((self.energies[last] - self.energies[first]) / (last - first))


@dataclass(frozen=True)
class SpectrumStats:
    levels: LevelDifferences
    dos: pd.DataFrame
    per_state: pd.DataFrame
    smoothing_width: float


def smooth(values):
    """Binomial [1/4, 1/2, 1/4] filter with edge padding; removes period-2 oscillation."""
    return np.convolve(np.pad(values, 1, mode="edge"), SMOOTHING_KERNEL, mode="valid")


def _merge(ranges):
    merged = []
    for first, last in sorted(ranges):
        if merged and first <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], last)
        else:
            merged.append([first, last])
    return [tuple(r) for r in merged]


def _valleys(smoothed, dips):
    """Index range of each dip's valley, split at the highest spacing between neighbouring dips."""
    bounds = [0]
    for left, right in zip(dips[:-1], dips[1:]):
        bounds.append(left + int(np.argmax(smoothed[left : right + 1])))
    bounds.append(len(smoothed) - 1)
    return [(bounds[k] + (k > 0), bounds[k + 1] - (k < len(dips) - 1)) for k in range(len(dips))]


def level_differences(eig, prominence=DIP_PROMINENCE, cluster_factor=CLUSTER_FACTOR):
    """
    Successive differences, their dips and the clusters around each dip.

    Parameters
    ----------
    eig : EigenSystem
        At least 8 levels
    prominence : float, optional
        Minimum dip depth relative to the median spacing, by default 0.1
    cluster_factor : float, optional
        A cluster spans the differences with smoothed value below
        ``cluster_factor`` times the dip value, by default 1.5. It never
        crosses the highest spacing between two neighbouring dips.

    Returns
    -------
    LevelDifferences
    """
    energies = np.asarray(eig.energies)
    if len(energies) < MIN_LEVELS:
        raise ValueError(f"need at least {MIN_LEVELS} levels, got {len(energies)}")
    diffs = np.diff(energies)
    smoothed = smooth(diffs)
    scale = float(np.median(diffs))
    found, _ = find_peaks(-smoothed, prominence=prominence * scale)

    dips, clusters = [], []
    for n, (lo, hi) in zip(found, _valleys(smoothed, list(found))):
        dips.append((int(n), float(0.5 * (energies[n] + energies[n + 1]))))
        ceiling = cluster_factor * smoothed[n]
        first = last = n
        while first > lo and smoothed[first - 1] <= ceiling:
            first -= 1
        while last < hi and smoothed[last + 1] <= ceiling:
            last += 1
        clusters.append((int(first), int(last)))
    logger.debug("level differences: dips at %s", [d[0] for d in dips])
    return LevelDifferences(diffs, smoothed, dips, _merge(clusters), energies)


def density_of_states(eig, smoothing_width, points=DOS_POINTS, margin=DOS_MARGIN):
    """ρ(E) = Σ_n N(E; E_n, w) on ``points`` energies spanning [E_0 - margin·w, E_{K-1} + margin·w]."""
    if smoothing_width <= 0:
        raise ValueError(f"smoothing_width must be positive, got {smoothing_width}")
    energies = np.asarray(eig.energies)
    pad = margin * smoothing_width
    grid = np.linspace(energies[0] - pad, energies[-1] + pad, points)
    rho = norm.pdf(grid[:, None], loc=energies[None, :], scale=smoothing_width).sum(axis=1)
    return pd.DataFrame({"E": grid, "rho": rho})


def default_smoothing_width(eig, factor=SMOOTHING_FACTOR):
    return factor * float(np.median(np.diff(eig.energies)))


def _side_weights(eig, divider):
    density = eig.states**2 * eig.grid.spacing
    return density[:, eig.x < divider].sum(axis=1)


def doublet_splittings(eig, barrier_energy, divider=None):
    """
    Splittings of the level pairs below ``barrier_energy``.

    Even potentials pair consecutive levels (E_1 - E_0, E_3 - E_2, ...).
    Tilted double wells pair the k-th state localised left of ``divider``
    with the k-th state localised right of it; ``divider`` defaults to the
    single classical hilltop. States spread over both sides are skipped.

    Returns
    -------
    list[tuple[int, float]]
        (pair index, splitting), empty when fewer than two levels lie below the barrier
    """
    energies = np.asarray(eig.energies)
    below = np.flatnonzero(energies < barrier_energy)
    if len(below) < 2:
        return []
    if divider is None and not eig.spec.is_even:
        tops = hilltops(eig.spec)
        if len(tops) == 1:
            divider = tops[0].x
    if divider is None:
        return [(k, float(energies[below[2 * k + 1]] - energies[below[2 * k]])) for k in range(len(below) // 2)]

    left_weight = _side_weights(eig, divider)[below]
    left = below[left_weight > LOCALISED]
    right = below[left_weight < 1.0 - LOCALISED]
    return [(k, float(abs(energies[r] - energies[l]))) for k, (l, r) in enumerate(zip(left, right))]


def support_width(density, x, mass=SUPPORT_MASS):
    """Length of the shortest grid interval holding ``mass`` of a discrete density."""
    cumulative = np.concatenate([[0.0], np.cumsum(density)])
    ends = np.searchsorted(cumulative, cumulative[:-1] + mass, side="left")
    valid = ends <= len(x)
    if not np.any(valid):
        return float(x[-1] - x[0])
    starts = np.flatnonzero(valid)
    return float(np.min(x[ends[valid] - 1] - x[starts]))


def _position_moments(states, x, spacing):
    density = states**2 * spacing
    mean_x = density @ x
    return density, mean_x, density @ x**2 - mean_x**2


def state_moments(eig, mass=SUPPORT_MASS, richardson=True):
    """
    Table of n, <x>, position spread and the support width of every state.

    With ``richardson`` the moments are extrapolated from a second solve at
    half the grid spacing, like the energies; the support width stays on the
    base grid.
    """
    density, mean_x, variance = _position_moments(eig.states, eig.x, eig.grid.spacing)
    if richardson:
        fine = eigensolve(build_hamiltonian(eig.spec, eig.grid.refined()), eig.k_states, richardson=False)
        _, fine_mean, fine_variance = _position_moments(fine.states, fine.x, fine.grid.spacing)
        mean_x = (4.0 * fine_mean - mean_x) / 3.0
        variance = (4.0 * fine_variance - variance) / 3.0
    spread_x = np.sqrt(np.maximum(variance, 0.0))
    widths = [support_width(d, eig.x, mass) for d in density]
    columns = {"n": np.arange(eig.k_states), "E": eig.energies, "mean_x": mean_x, "spread_x": spread_x}
    return pd.DataFrame({**columns, "support_width": widths})


def dip_offsets(levels, reference_energy):
    """Distance of each dip from a reference energy in units of the local level spacing."""
    return [abs(energy - reference_energy) / levels.local_spacing(n) for n, energy in levels.dips]


def dip_alignment(levels, references):
    """
    Nearest dip to every reference energy (hilltop or slope-minimum turning energy).

    Returns
    -------
    pd.DataFrame
        reference, n, E_dip and offset in local spacings; n and E_dip are
        missing when the spectrum has no dip
    """
    rows = []
    for reference in references:
        row = {"reference": float(reference), "n": pd.NA, "E_dip": np.nan, "offset": np.nan}
        if levels.dips:
            offsets = dip_offsets(levels, reference)
            k = int(np.argmin(offsets))
            row.update(n=levels.dips[k][0], E_dip=levels.dips[k][1], offset=offsets[k])
        rows.append(row)
    return pd.DataFrame(rows, columns=["reference", "n", "E_dip", "offset"])


def jaccard(first, second):
    first, second = set(first), set(second)
    union = first | second
    return len(first & second) / len(union) if union else 1.0


def spectrum_stats(
    eig,
    smoothing_factor=SMOOTHING_FACTOR,
    prominence=DIP_PROMINENCE,
    cluster_factor=CLUSTER_FACTOR,
    mass=SUPPORT_MASS,
    points=DOS_POINTS,
):
    width = default_smoothing_width(eig, smoothing_factor)
    return SpectrumStats(
        levels=level_differences(eig, prominence, cluster_factor),
        dos=density_of_states(eig, width, points),
        per_state=state_moments(eig, mass),
        smoothing_width=width,
    )
