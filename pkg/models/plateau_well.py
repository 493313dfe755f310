import numpy as np

from models.potential import ModelTag, build_spec, sigma_to_lambda

A0 = 1.0 / 142.0
A1 = 0.15


def coefficients(a0=A0, a1=A1):
    return {6: a0, 4: -a1}


def critical_lambda(a0=A0, a1=A1):
    """Tilt beyond which the plateau (and its local maximum) is gone."""
    return (16.0 / 25.0) * np.sqrt(2.0 * a1**5 / (5.0 * a0**3))


def build(sigma=0.0, a0=A0, a1=A1):
    """
    Sextic double well with a flat top, V(x) = a0 x^6 - a1 x^4, tilted by Λx.

    The lowest power is quartic, so the barrier region is a plateau rather than
    an inverted parabola.
    """
    return build_spec(coefficients(a0, a1), sigma_to_lambda(sigma, a0, a1), sigma, ModelTag.MODEL_IA, a0, a1)
