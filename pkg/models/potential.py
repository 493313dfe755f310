import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

logger = logging.getLogger(__name__)

MAX_POWER = 6
SCAN_CELLS = 2048
# |f(x0)| below this fraction of max|f| at a turning point counts as a double root
TANGENT_TOL = 1e-12


class ModelTag(str, Enum):
    MODEL_I = "ModelI"
    MODEL_IA = "ModelIa"
    MODEL_II = "ModelII"
    HARMONIC = "Harmonic"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class PotentialSpec:
    """
    Polynomial well V(x) with a linear tilt Λx and an additive shift.

    Natural units (ħ = m = 1). The energy scale is shifted so that the global
    minimum of V(x) + Λx + shift is zero.

    Parameters
    ----------
    coefficients : dict[int, float]
        Power -> coefficient of the untilted well, powers 0..6
    lam : float
        Perturbation strength Λ >= 0
    sigma : float
        Asymmetry parameter σ >= 0 (Λ = σ·sqrt(|a0 / 2a1|) for the presets)
    shift : float
        Additive constant
    model_tag : ModelTag
        Preset family, or ModelTag.CUSTOM
    a0, a1 : float, optional
        (stabilisation, destabilisation) pair of the preset
    """

    coefficients: dict = field(default_factory=dict)
    lam: float = 0.0
    sigma: float = 0.0
    shift: float = 0.0
    model_tag: ModelTag = ModelTag.CUSTOM
    a0: float = None
    a1: float = None

    def __post_init__(self):
        powers = [int(p) for p, c in self.coefficients.items() if c != 0.0]
        if not powers:
            raise ValueError("potential needs at least one nonzero coefficient")
        if min(powers) < 0 or max(powers) > MAX_POWER:
            raise ValueError(f"powers must lie in 0..{MAX_POWER}, got {sorted(powers)}")
        top = max(powers)
        if top % 2 or self.coefficients[top] <= 0.0:
            raise ValueError(
                "highest power must be even with a positive coefficient to confine, "
                f"got {self.coefficients[top]} x^{top}"
            )
        if self.lam < 0.0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @cached_property
    def well(self):
        """Untilted, unshifted polynomial V(x)."""
        coef = np.zeros(MAX_POWER + 1)
        for power, value in self.coefficients.items():
            coef[int(power)] = value
        return Polynomial(coef).trim()

    @cached_property
    def tilted(self):
        """V(x) + Λx without the shift."""
        return self.well + Polynomial([0.0, self.lam])

    @cached_property
    def polynomial(self):
        """Full polynomial V(x) + Λx + shift."""
        return self.well + Polynomial([self.shift, self.lam])

    @cached_property
    def derivatives(self):
        poly = self.polynomial
        return (poly, poly.deriv(1), poly.deriv(2), poly.deriv(3))

    @property
    def degree(self):
        return self.well.degree()

    @property
    def is_even(self):
        """True when the full potential is parity symmetric."""
        odd = any(c != 0.0 and int(p) % 2 for p, c in self.coefficients.items())
        return not odd and self.lam == 0.0

    def evaluate(self, x, derivative_order=0):
        if derivative_order not in (0, 1, 2, 3):
            raise ValueError(f"derivative_order must be 0..3, got {derivative_order}")
        return self.derivatives[derivative_order](x)

    def perturbed(self, lam, sigma=None):
        """Same well with a different tilt; the zero-minimum shift is recomputed."""
        shift, _ = zero_min_shift(self.well, lam)
        return replace(self, lam=float(lam), sigma=self.sigma if sigma is None else float(sigma), shift=shift)

    def to_config(self):
        return {
            "model": self.model_tag.value,
            "sigma": float(self.sigma),
            "coefficients": {int(p): float(c) for p, c in sorted(self.coefficients.items())},
            "lambda": float(self.lam),
        }


def evaluate(spec, x, derivative_order=0):
    """
    Evaluate the shifted, tilted potential or one of its first three derivatives.

    Order 0 includes Λx and the shift, order 1 includes Λ.
    """
    return spec.evaluate(x, derivative_order)


def sigma_to_lambda(sigma, a0, a1):
    return sigma * np.sqrt(abs(a0 / (2.0 * a1)))


def lambda_to_sigma(lam, a0, a1):
    return lam / np.sqrt(abs(a0 / (2.0 * a1)))


def root_bound(poly):
    """Cauchy bound: every real root lies in [-R, R]."""
    coef = poly.trim().coef
    return 1.0 + float(np.max(np.abs(coef[:-1] / coef[-1]))) if len(coef) > 1 else 1.0


def _polish(poly, x, lo, hi, steps=2):
    slope = poly.deriv()
    for _ in range(steps):
        d = slope(x)
        if d == 0.0:
            break
        candidate = x - poly(x) / d
        if not lo <= candidate <= hi or abs(poly(candidate)) > abs(poly(x)):
            break
        x = candidate
    return x


def real_roots(poly, lo=None, hi=None, cells=SCAN_CELLS):
    """
    All real roots of a polynomial inside [lo, hi].

    The interval is cut at a uniform scan and at the roots of the derivative
    (found recursively), so the polynomial is monotone on every piece; each
    sign change is bracketed with Brent's method and polished by Newton steps.
    Double roots sitting on a turning point are picked up separately.

    Parameters
    ----------
    poly : numpy.polynomial.Polynomial
        Polynomial of degree <= 6
    lo, hi : float, optional
        Search interval, by default the Cauchy root bound
    cells : int, optional
        Number of uniform scan cells, by default 2048

    Returns
    -------
    numpy.ndarray
        Sorted roots
    """
    poly = poly.trim()
    degree = poly.degree()
    if degree < 1:
        return np.empty(0)
    if lo is None or hi is None:
        bound = root_bound(poly)
        lo, hi = -bound, bound
    if degree == 1:
        root = -poly.coef[0] / poly.coef[1]
        return np.array([root]) if lo <= root <= hi else np.empty(0)

    turning = real_roots(poly.deriv(), lo, hi, cells)
    edges = np.union1d(np.linspace(lo, hi, cells + 1), turning)
    values = poly(edges)
    scale = max(1.0, float(np.max(np.abs(values))))

    roots = list(edges[values == 0.0])
    crossing = values[:-1] * values[1:] < 0.0
    for i in np.flatnonzero(crossing):
        a, b = edges[i], edges[i + 1]
        root = brentq(poly, a, b, xtol=1e-15, maxiter=200)
        roots.append(_polish(poly, root, a, b))
    for x0 in turning:
        k = int(np.searchsorted(edges, x0))
        if values[k] == 0.0 or abs(values[k]) > TANGENT_TOL * scale:
            continue
        if (k > 0 and crossing[k - 1]) or (k < len(crossing) and crossing[k]):
            continue
        roots.append(x0)
    return np.sort(np.array(roots, dtype=float))


def zero_min_shift(well, lam):
    """
    Shift that puts the global minimum of well(x) + lam·x at zero.

    Returns
    -------
    (float, float)
        Shift and the position of the global minimum
    """
    tilted = well + Polynomial([0.0, lam])
    critical = real_roots(tilted.deriv())
    values = tilted(critical)
    i = int(np.argmin(values))
    return -float(values[i]), float(critical[i])


def build_spec(coefficients, lam=0.0, sigma=0.0, model_tag=ModelTag.CUSTOM, a0=None, a1=None):
    """Construct a spec and fix its zero-minimum shift."""
    coefficients = {int(p): float(c) for p, c in coefficients.items()}
    unshifted = PotentialSpec(coefficients, float(lam), float(sigma), 0.0, ModelTag(model_tag), a0, a1)
    shift, argmin = zero_min_shift(unshifted.well, lam)
    logger.debug("%s sigma=%g lambda=%g: global minimum at x=%.6f, shift %.12g", model_tag, sigma, lam, argmin, shift)
    return replace(unshifted, shift=shift)
