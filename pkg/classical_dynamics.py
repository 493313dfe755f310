"""
Classical structure of V(x) + Λx: equilibria and their stability, the
saddle-node locus, critical tilts, positive minima of the slope, and
velocity-Verlet phase portraits.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from tqdm import tqdm

from exceptions import NoClassicalSolution
from models.potential import build_spec, real_roots, root_bound

logger = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-8
# fraction of the characteristic period a Verlet step may not exceed
PERIOD_FRACTION = 20.0


class Stability(str, Enum):
    MINIMUM = "Minimum"
    MAXIMUM = "Maximum"
    DEGENERATE = "Degenerate"


class Region(str, Enum):
    ONE = "OneFixedPoint"
    TWO = "TwoFixedPoints"
    THREE = "ThreeFixedPoints"
    FOUR = "FourFixedPoints"
    FIVE = "FiveFixedPoints"


REGIONS = {1: Region.ONE, 2: Region.TWO, 3: Region.THREE, 4: Region.FOUR, 5: Region.FIVE}


@dataclass(frozen=True)
class FixedPoint:
    x: float
    stability: Stability
    energy: float


@dataclass(frozen=True)
class FixedPointSet:
    points: tuple
    region: Region

    def __len__(self):
        return len(self.points)

    def of(self, stability):
        return [p for p in self.points if p.stability is stability]


@dataclass(frozen=True)
class SlopeMinimum:
    """
    Positive local minimum of V'(x), the classical turning point where levels cluster.

    ``at_hilltop`` marks the zero-slope stand-in reported at a maximum of V
    when no positive minimum exists (the symmetric wells).
    """

    x: float
    slope: float
    turning_energy: float
    curvature: float
    is_global: bool = False
    at_hilltop: bool = False


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    p: np.ndarray
    energy: np.ndarray
    energy_drift: float

    @property
    def samples(self):
        return list(zip(self.times, self.x, self.p))


def _search_interval(spec):
    bound = root_bound(spec.derivatives[1])
    return -bound, bound


def classify(second_derivative, tol=DEGENERATE_TOL):
    if second_derivative > tol:
        return Stability.MINIMUM
    if second_derivative < -tol:
        return Stability.MAXIMUM
    return Stability.DEGENERATE


def _stability(spec, x):
    stability = classify(spec.evaluate(x, 2))
    if stability is Stability.DEGENERATE and abs(spec.evaluate(x, 3)) <= DEGENERATE_TOL:
        # even-order test, e.g. the flat top of a0 x^6 - a1 x^4
        stability = classify(spec.polynomial.deriv(4)(x))
    return stability


def fixed_points(spec):
    """
    Real equilibria of ẍ = -(V'(x) + Λ), classified by V'' (by V'''' where both V'' and V''' vanish).

    Parameters
    ----------
    spec : PotentialSpec
        Polynomial well of degree <= 6

    Returns
    -------
    FixedPointSet
        Points sorted by x with their stability and shifted energy
    """
    slope = spec.derivatives[1]
    roots = real_roots(slope, *_search_interval(spec))
    points = tuple(
        FixedPoint(float(x), _stability(spec, x), float(spec.evaluate(x, 0))) for x in roots
    )
    region = REGIONS.get(len(points))
    if region is None:
        raise NoClassicalSolution(f"unexpected number of fixed points: {len(points)}")
    return FixedPointSet(points, region)


def hilltops(spec):
    """Maxima of the tilted potential (shifted energies)."""
    return fixed_points(spec).of(Stability.MAXIMUM)


def saddle_node_a1(a0, lam):
    """
    Destabilisation a1 on the saddle-node locus of a0 x^4 - a1 x^2 + Λx.

    Below this a1 the quartic has one equilibrium, above it three.
    """
    if a0 <= 0:
        raise ValueError(f"a0 must be positive, got {a0}")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    return 1.5 * a0 ** (1.0 / 3.0) * lam ** (2.0 / 3.0)


def saddle_node_a1_numeric(a0, lam, tol=1e-13):
    """Bisection on a1 for the 1 <-> 3 fixed-point transition of the tilted quartic."""

    def three(a1):
        return len(fixed_points(build_spec({4: a0, 2: -a1}, lam))) >= 3

    if lam == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while not three(hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if three(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def critical_lambda(spec, tol=1e-13, max_doublings=60):
    """
    Smallest Λ >= 0 at which no local maximum of V(x) + Λx remains.

    Found by bisection over Λ on the fixed-point classification; returns 0
    when the untilted well has no maximum.
    """

    def has_maximum(lam):
        return bool(hilltops(spec.perturbed(lam)))

    if not has_maximum(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(max_doublings):
        if not has_maximum(hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NoClassicalSolution("maximum persists for every tried lambda")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if has_maximum(mid):
            lo = mid
        else:
            hi = mid
    lam_c = 0.5 * (lo + hi)
    logger.debug("critical lambda for %s: %.12g", spec.model_tag, lam_c)
    return lam_c


def slope_minima(spec):
    """
    Positive local minima of the slope V'(x) + Λ.

    These are roots of V'' with V''' > 0 where the slope stays positive; the
    turning energy is the shifted potential there. When no positive minimum
    exists but the potential has hilltops, each hilltop is reported with zero
    slope and ``at_hilltop=True``.

    Returns
    -------
    list[SlopeMinimum]
        Sorted by x; the one with the smallest slope is flagged global
    """
    lo, hi = _search_interval(spec)
    candidates = []
    for x in real_roots(spec.derivatives[2], lo, hi):
        slope = float(spec.evaluate(x, 1))
        curvature = float(spec.evaluate(x, 3))
        if curvature > 0.0 and slope > 0.0:
            candidates.append((float(x), slope, float(spec.evaluate(x, 0)), curvature))
    if not candidates:
        return [
            SlopeMinimum(p.x, 0.0, p.energy, float(spec.evaluate(p.x, 2)), at_hilltop=True) for p in hilltops(spec)
        ]
    deepest = min(range(len(candidates)), key=lambda i: candidates[i][1])
    return [SlopeMinimum(*c, is_global=(i == deepest)) for i, c in enumerate(candidates)]


def characteristic_period(spec):
    """2π over the fastest small-oscillation frequency at the minima."""
    curvatures = [spec.evaluate(p.x, 2) for p in fixed_points(spec).of(Stability.MINIMUM)]
    if not curvatures:
        raise NoClassicalSolution("potential has no stable equilibrium")
    return 2.0 * math.pi / math.sqrt(max(curvatures))


def phase_portrait(spec, initial_conditions, t_max, dt):
    """
    Velocity-Verlet trajectories of H = p²/2 + V(x) + Λx.

    Parameters
    ----------
    spec : PotentialSpec
        Potential
    initial_conditions : list[tuple[float, float]]
        (x0, p0) pairs, integrated together
    t_max : float
        Final time; the step is adjusted so t_max is hit exactly
    dt : float
        Requested step, must stay below a twentieth of the characteristic period

    Returns
    -------
    list[Trajectory]
    """
    if dt <= 0 or t_max <= 0:
        raise ValueError(f"dt and t_max must be positive, got dt={dt}, t_max={t_max}")
    limit = characteristic_period(spec) / PERIOD_FRACTION
    if dt >= limit:
        raise ValueError(f"dt={dt} is too coarse, must be below {limit:.4g}")
    n_steps = int(math.ceil(t_max / dt))
    h = t_max / n_steps

    def force(x):
        return -spec.evaluate(x, 1)

    start = np.asarray(initial_conditions, dtype=float).reshape(-1, 2)
    xs = np.empty((n_steps + 1, len(start)))
    ps = np.empty_like(xs)
    xs[0], ps[0] = start[:, 0], start[:, 1]
    f = force(xs[0])
    for i in range(n_steps):
        p_half = ps[i] + 0.5 * h * f
        xs[i + 1] = xs[i] + h * p_half
        f = force(xs[i + 1])
        ps[i + 1] = p_half + 0.5 * h * f

    times = h * np.arange(n_steps + 1)
    energy = 0.5 * ps**2 + spec.evaluate(xs, 0)
    drift = np.max(np.abs(energy - energy[0]), axis=0)
    return [Trajectory(times, xs[:, j], ps[:, j], energy[:, j], float(drift[j])) for j in range(len(start))]


def region_grid(builder, parameters, lambdas, quiet=False):
    """
    Fixed-point counts over a (parameter, Λ) plane.

    Parameters
    ----------
    builder : callable
        builder(parameter, lam) -> PotentialSpec
    parameters, lambdas : array_like
        Grid axes

    Returns
    -------
    numpy.ndarray
        Integer counts of shape (len(parameters), len(lambdas))
    """
    counts = np.zeros((len(parameters), len(lambdas)), dtype=int)
    for i, a in enumerate(tqdm(parameters, desc="Fixed-point regions", disable=quiet)):
        for j, lam in enumerate(lambdas):
            counts[i, j] = len(fixed_points(builder(a, lam)))
    return counts


def bifurcation_branches(builder, parameters, lam):
    """Rows (parameter, x*, stability) of the bifurcation diagram at fixed Λ."""
    rows = []
    for a in parameters:
        for point in fixed_points(builder(a, lam)).points:
            rows.append((float(a), point.x, point.stability.value))
    return rows
