"""
Low-lying spectrum of H = -1/2 d²/dx² + V(x) + Λx on a box with Dirichlet walls.

The Laplacian is the second-order central difference, so the Hamiltonian is
a real symmetric tridiagonal matrix over the interior grid points. Energies
are Richardson-extrapolated from a second solve at half the spacing; states
are sampled on the base grid, zero at the walls.
"""
import logging
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal, eigvalsh_tridiagonal

from exceptions import ConvergenceFailure, ResolutionWarning
from models.potential import ModelTag

logger = logging.getLogger(__name__)

DEFAULT_POINTS = 4096
DEFAULT_STATES = 120
MIN_POINTS = 64
DEFAULT_DOMAIN = (-10.0, 10.0)
# auto-sized boxes need V(wall) above this multiple of the highest requested level
WALL_FACTOR = 3.0
SIGN_TOL = 1e-6
SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError(f"x_max must exceed x_min, got [{self.x_min}, {self.x_max}]")
        if self.n_points < 3:
            raise ValueError(f"grid needs at least 3 points, got {self.n_points}")

    @property
    def spacing(self):
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def is_symmetric(self):
        return self.x_min == -self.x_max

    @cached_property
    def points(self):
        x = self.x_min + self.spacing * np.arange(self.n_points)
        x[-1] = self.x_max
        if self.is_symmetric:
            # exact mirror symmetry x_i == -x_{n-1-i}
            x = 0.5 * (x - x[::-1])
        return x

    @property
    def interior(self):
        return self.points[1:-1]

    def refined(self):
        """Same box at exactly half the spacing."""
        return Grid(self.x_min, self.x_max, 2 * self.n_points - 1)


@dataclass(frozen=True)
class TridiagonalHamiltonian:
    diagonal: np.ndarray
    off_diagonal: np.ndarray
    grid: Grid
    spec: object

    @property
    def size(self):
        return len(self.diagonal)

    @property
    def is_parity_symmetric(self):
        return self.spec.is_even and self.grid.is_symmetric

    def to_dense(self):
        return np.diag(self.diagonal) + np.diag(self.off_diagonal, 1) + np.diag(self.off_diagonal, -1)


@dataclass(frozen=True)
class EigenSystem:
    """
    Ascending energies and L²-normalised real eigenfunctions on the grid.

    ``states[n]`` holds Ψ_n(x_i) at every grid point including the walls,
    with Σ Ψ_n(x_i)² h = 1 and the first appreciable sample from the left
    positive.
    """

    energies: np.ndarray
    states: np.ndarray
    grid: Grid
    spec: object

    @property
    def k_states(self):
        return len(self.energies)

    @property
    def x(self):
        return self.grid.points

    @cached_property
    def potential(self):
        return self.spec.evaluate(self.grid.points, 0)


@dataclass(frozen=True)
class ConvergenceReport:
    coarse: np.ndarray
    fine: np.ndarray

    @property
    def relative_change(self):
        return np.abs(self.fine - self.coarse) / np.abs(self.fine)

    @property
    def max_change(self):
        return float(np.max(self.relative_change))


def build_hamiltonian(spec, grid):
    """
    Tridiagonal H on the interior points of ``grid``.

    diag_i = V(x_i) + Λx_i + 1/h², off = -1/(2h²); the wavefunction is
    pinned to zero at both walls. The shift stays out of the matrix and is
    added to the energies after the solve.
    """
    h = grid.spacing
    diagonal = spec.tilted(grid.interior) + 1.0 / h**2
    if not np.all(np.isfinite(diagonal)):
        raise ValueError("potential is not finite on the grid")
    off_diagonal = np.full(len(diagonal) - 1, -0.5 / h**2)
    return TridiagonalHamiltonian(diagonal, off_diagonal, grid, spec)


def _solve(diagonal, off_diagonal, count, eigvals_only=False):
    try:
        if eigvals_only:
            return eigvalsh_tridiagonal(diagonal, off_diagonal, select="i", select_range=(0, count - 1))
        return eigh_tridiagonal(diagonal, off_diagonal, select="i", select_range=(0, count - 1))
    except LinAlgError as err:
        raise ConvergenceFailure(f"tridiagonal eigensolver did not converge: {err}") from err


def _parity_sectors(operator):
    """
    Split a mirror-symmetric tridiagonal H into even and odd half problems.

    Returns (diagonal, off_diagonal, assemble) triples; ``assemble`` maps a
    unit half-vector to the unit full interior vector.
    """
    d, e = operator.diagonal, operator.off_diagonal
    half = len(d) // 2
    if len(d) % 2 == 0:
        right, off = d[half:], e[half:]
        even_d, odd_d = right.copy(), right.copy()
        even_d[0] += e[half - 1]
        odd_d[0] -= e[half - 1]
        return [
            (even_d, off, lambda u: np.concatenate([u[::-1], u]) / SQRT2),
            (odd_d, off, lambda u: np.concatenate([-u[::-1], u]) / SQRT2),
        ]
    # odd count: the centre point x = 0 is an unknown
    even_off = e[half:].copy()
    even_off[0] *= SQRT2
    return [
        (d[half:], even_off, lambda u: np.concatenate([u[:0:-1] / SQRT2, u[:1], u[1:] / SQRT2])),
        (d[half + 1 :], e[half + 1 :], lambda u: np.concatenate([-u[::-1], [0.0], u]) / SQRT2),
    ]


def _lowest(operator, count, eigvals_only=False):
    if not operator.is_parity_symmetric:
        return _solve(operator.diagonal, operator.off_diagonal, count, eigvals_only)
    energies, vectors = [], []
    for d, e, assemble in _parity_sectors(operator):
        m = min(count, len(d))
        if eigvals_only:
            energies.append(_solve(d, e, m, True))
            continue
        w, v = _solve(d, e, m)
        energies.append(w)
        vectors.extend(assemble(v[:, i]) for i in range(m))
    energies = np.concatenate(energies)
    order = np.argsort(energies, kind="stable")[:count]
    if eigvals_only:
        return energies[order]
    return energies[order], np.column_stack([vectors[i] for i in order])


def _fix_signs(states):
    for psi in states:
        first = np.flatnonzero(np.abs(psi) > SIGN_TOL * np.max(np.abs(psi)))[0]
        if psi[first] < 0:
            psi *= -1.0


def lowest_energies(spec, grid, k_states, richardson=True):
    """Energies only, Richardson-extrapolated by default."""
    coarse = _lowest(build_hamiltonian(spec, grid), k_states, eigvals_only=True)
    if not richardson:
        return coarse + spec.shift
    fine = _lowest(build_hamiltonian(spec, grid.refined()), k_states, eigvals_only=True)
    return (4.0 * fine - coarse) / 3.0 + spec.shift


def eigensolve(operator, k_states, richardson=True):
    """
    Lowest eigenpairs of the tridiagonal Hamiltonian.

    Parameters
    ----------
    operator : TridiagonalHamiltonian
        Output of build_hamiltonian
    k_states : int
        Number of levels, K <= n_points / 4 keeps them resolved
    richardson : bool, optional
        Extrapolate energies with a half-spacing solve, by default True

    Returns
    -------
    EigenSystem

    Raises
    ------
    ConvergenceFailure
        When LAPACK's bisection / inverse iteration fails
    """
    grid, spec = operator.grid, operator.spec
    if grid.n_points < MIN_POINTS:
        raise ValueError(f"eigensolve needs at least {MIN_POINTS} grid points, got {grid.n_points}")
    if not 1 <= k_states <= operator.size:
        raise ValueError(f"k_states must lie in 1..{operator.size}, got {k_states}")
    if k_states > grid.n_points / 4:
        warnings.warn(
            f"K={k_states} exceeds n_points/4={grid.n_points // 4}; upper levels are under-resolved",
            ResolutionWarning,
            stacklevel=2,
        )

    energies, vectors = _lowest(operator, k_states)
    if richardson:
        fine = _lowest(build_hamiltonian(spec, grid.refined()), k_states, eigvals_only=True)
        energies = (4.0 * fine - energies) / 3.0
    energies = energies + spec.shift

    states = np.zeros((k_states, grid.n_points))
    states[:, 1:-1] = vectors.T / np.sqrt(grid.spacing)
    _fix_signs(states)

    wall = min(spec.evaluate(grid.x_min, 0), spec.evaluate(grid.x_max, 0))
    if energies[-1] > wall:
        warnings.warn(
            f"E_{k_states - 1}={energies[-1]:.6g} lies above the wall potential {wall:.6g}; "
            "box states contaminate the spectrum",
            ResolutionWarning,
            stacklevel=2,
        )
    logger.debug(
        "solved %s sigma=%g: K=%d, E_0=%.10g, E_K=%.10g",
        spec.model_tag.value,
        spec.sigma,
        k_states,
        energies[0],
        energies[-1],
    )
    return EigenSystem(energies, states, grid, spec)


def auto_domain(spec, k_states, n_points=DEFAULT_POINTS, start=2.0, growth=1.25, coarse_points=1025):
    """
    Smallest symmetric box [-L, L] with V(±L) > 3·E_K.

    Energies come from a coarse grid; a too-small box only raises them,
    so the criterion errs on the safe side.
    """
    half = start
    for _ in range(60):
        coarse = Grid(-half, half, max(coarse_points, 4 * k_states + 1))
        top = lowest_energies(spec, coarse, k_states, richardson=False)[-1]
        wall = min(spec.evaluate(-half, 0), spec.evaluate(half, 0))
        if wall > WALL_FACTOR * top:
            logger.info("auto-sized box for %s sigma=%g: [-%.4g, %.4g]", spec.model_tag, spec.sigma, half, half)
            return Grid(-half, half, n_points)
        half *= growth
    raise ConvergenceFailure(f"no box up to L={half:.4g} confines {k_states} levels")


def solver_grid(spec, k_states=DEFAULT_STATES, n_points=DEFAULT_POINTS, domain=None):
    """[-10, 10] for every family except Model II, whose box is auto-sized."""
    if domain is not None:
        return Grid(float(domain[0]), float(domain[1]), n_points)
    if spec.model_tag is ModelTag.MODEL_II:
        return auto_domain(spec, k_states, n_points)
    return Grid(*DEFAULT_DOMAIN, n_points)


def solve(spec, k_states=DEFAULT_STATES, n_points=DEFAULT_POINTS, domain=None, richardson=True):
    grid = solver_grid(spec, k_states, n_points, domain)
    return eigensolve(build_hamiltonian(spec, grid), k_states, richardson)


def convergence_report(spec, grid, k_states, richardson=True):
    """Relative change of each level when the grid spacing is halved."""
    coarse = lowest_energies(spec, grid, k_states, richardson)
    fine = lowest_energies(spec, grid.refined(), k_states, richardson)
    if k_states > grid.n_points / 4:
        warnings.warn(
            f"K={k_states} exceeds n_points/4={grid.n_points // 4}; upper levels are under-resolved",
            ResolutionWarning,
            stacklevel=2,
        )
    return ConvergenceReport(coarse, fine)
