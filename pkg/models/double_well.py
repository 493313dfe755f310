import numpy as np

from models.potential import ModelTag, build_spec, sigma_to_lambda

# (stabilisation, destabilisation)
A0 = 0.02
A1 = 0.64


def coefficients(a0=A0, a1=A1):
    return {4: a0, 2: -a1}


def critical_lambda(a0=A0, a1=A1):
    """Tilt at which the hilltop and the upper well annihilate."""
    return (2.0 / 3.0) * np.sqrt(2.0 * a1**3 / (3.0 * a0))


def build(sigma=0.0, a0=A0, a1=A1):
    """
    Quartic double well V(x) = a0 x^4 - a1 x^2 tilted by Λx.

    Parameters
    ----------
    sigma : float, optional
        Asymmetry parameter, by default 0.0
    a0 : float, optional
        Stabilisation coefficient, by default 0.02
    a1 : float, optional
        Destabilisation coefficient, by default 0.64

    Returns
    -------
    PotentialSpec
        Spec with Λ = σ·sqrt(|a0 / 2a1|) and zero global minimum
    """
    return build_spec(coefficients(a0, a1), sigma_to_lambda(sigma, a0, a1), sigma, ModelTag.MODEL_I, a0, a1)
