"""
Loschmidt echo M(t) = |<ψ0| e^{iH2 t} e^{-iH1 t} |ψ0>|² for H2 = H1 + λx.

Two evaluations: the first-order (Peres) reduction to the characteristic
function of the position density with τ = λt, and exact spectral propagation
through the eigenbases of H1 and H2.
"""
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd

from exceptions import BasisIncomplete
from schrodinger import build_hamiltonian, eigensolve

logger = logging.getLogger(__name__)

PROJECTION_TOL = 1e-6
NORM_TOL = 1e-8
TIME_CHUNK = 256


class EchoMethod(str, Enum):
    PERES = "Peres"
    EXACT = "Exact"


@dataclass(frozen=True)
class EchoSeries:
    times: np.ndarray
    values: np.ndarray
    method: EchoMethod
    initial_state: str
    strength: float

    def to_frame(self):
        return pd.DataFrame({"t": self.times, "M": self.values})

    def metadata(self):
        return {"method": self.method.value, "initial_state": self.initial_state, "lambda": self.strength}


@dataclass(frozen=True)
class Fluctuation:
    mean: float
    amplitude_std: float
    t_settle: float

    def __iter__(self):
        return iter((self.mean, self.amplitude_std))


def ground_state(eig):
    return eig.states[0].copy()


def gaussian_packet(grid, center=0.0, width=np.sqrt(0.5)):
    """Normalised real packet ψ ∝ exp(-(x - c)² / 4w²), position spread w, zero at the walls."""
    if width <= 0:
        raise ValueError(f"width must be positive, got {width}")
    psi = np.exp(-((grid.points - center) ** 2) / (4.0 * width**2))
    psi[[0, -1]] = 0.0
    return psi / np.sqrt(np.sum(psi**2) * grid.spacing)


def position_spread(psi0, grid):
    density = np.abs(psi0) ** 2 * grid.spacing
    mean = density @ grid.points
    return float(np.sqrt(density @ grid.points**2 - mean**2))


def state_label(state, center=None, width=None):
    if state == "gaussian":
        return f"Gaussian(center={center:g}, width={width:g})"
    return "GroundOfH1"


def _check_normalized(psi0, spacing):
    norm = float(np.sum(np.abs(psi0) ** 2) * spacing)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"initial state must be normalised on the grid, norm is {norm:.12g}")


def peres_echo(psi0, grid, lam, times, initial_state="GroundOfH1"):
    """
    First-order echo M(t) = |Σ_i e^{i x_i τ} |ψ0(x_i)|² h|², τ = λt.

    Only the position density of ``psi0`` enters.
    """
    _check_normalized(psi0, grid.spacing)
    times = np.asarray(times, dtype=float)
    density = np.abs(psi0) ** 2 * grid.spacing
    tau = lam * times
    values = np.empty(len(times))
    for start in range(0, len(times), TIME_CHUNK):
        chunk = tau[start : start + TIME_CHUNK]
        characteristic = np.exp(1j * np.outer(chunk, grid.points)) @ density
        values[start : start + TIME_CHUNK] = np.abs(characteristic) ** 2
    return EchoSeries(times, values, EchoMethod.PERES, initial_state, float(lam))


def perturbed_system(eig, lam, richardson=True):
    """Eigensystem of H1 + λx on the same grid and with the same number of states."""
    spec = eig.spec.perturbed(eig.spec.lam + lam)
    return eigensolve(build_hamiltonian(spec, eig.grid), eig.k_states, richardson)


def _coefficients(eig, psi0, which):
    coefficients = eig.states @ psi0 * eig.grid.spacing
    loss = 1.0 - float(np.sum(np.abs(coefficients) ** 2))
    if loss > PROJECTION_TOL:
        raise BasisIncomplete(f"{which} basis of {eig.k_states} states misses {loss:.3g} of the initial state")
    return coefficients


def exact_echo(eig1, eig2, psi0, times, initial_state="GroundOfH1"):
    """
    Echo from spectral propagation, A(t) = <ψ0| U2†(t) U1(t) |ψ0>.

    Parameters
    ----------
    eig1, eig2 : EigenSystem
        Spectra of H1 and H2 on the same grid
    psi0 : numpy.ndarray
        Normalised initial state on the grid
    times : array_like
        Sample times

    Returns
    -------
    EchoSeries

    Raises
    ------
    BasisIncomplete
        If either truncated basis loses more than 1e-6 of ψ0
    """
    if eig1.grid != eig2.grid:
        raise ValueError("both eigensystems must share one grid")
    h = eig1.grid.spacing
    _check_normalized(psi0, h)
    times = np.asarray(times, dtype=float)
    c1 = _coefficients(eig1, psi0, "H1")
    c2 = _coefficients(eig2, psi0, "H2")
    overlap = eig2.states @ eig1.states.T * h

    evolved = (c1 * np.exp(-1j * np.outer(times, eig1.energies))) @ overlap.T
    amplitude = (evolved * np.exp(1j * np.outer(times, eig2.energies))) @ c2.conj()
    values = np.abs(amplitude) ** 2
    lam = eig2.spec.lam - eig1.spec.lam
    logger.debug("exact echo lambda=%g: min M=%.6g", lam, values.min())
    return EchoSeries(times, values, EchoMethod.EXACT, initial_state, float(lam))


def settle_time(series):
    """
    End of the initial decay: the earlier of twice the e-folding time of ln M
    over the first decay and the first local minimum of M.
    """
    times, values = series.times, series.values
    dips = np.flatnonzero((values[1:-1] < values[:-2]) & (values[1:-1] <= values[2:])) + 1
    end = int(dips[0]) if len(dips) else len(values) - 1
    if end < 2:
        return float(times[end])
    positive = values[: end + 1] > 0
    slope = np.polyfit(times[: end + 1][positive], np.log(values[: end + 1][positive]), 1)[0]
    if slope >= 0:
        return float(times[0])
    return float(min(times[0] + 2.0 / -slope, times[end]))


def post_decay_fluctuation(series, t_settle=None):
    """
    Mean and standard deviation of M(t) for t > t_settle.

    Parameters
    ----------
    series : EchoSeries
        Echo curve
    t_settle : float, optional
        Start of the tail, by default settle_time(series)

    Returns
    -------
    Fluctuation
        Unpacks as (mean, amplitude_std)
    """
    if t_settle is None:
        t_settle = settle_time(series)
    tail = series.values[series.times > t_settle]
    if not len(tail):
        raise ValueError(f"t_settle={t_settle} leaves no samples in [{series.times[0]}, {series.times[-1]}]")
    return Fluctuation(float(np.mean(tail)), float(np.std(tail)), float(t_settle))
