from models.potential import ModelTag, build_spec, sigma_to_lambda

A0 = 10.95445
A1 = 30.0


def coefficients(a0=A0, a1=A1):
    return {2: a1, 4: -a0, 6: 1.0}


def build(sigma=0.0, a0=A0, a1=A1):
    """
    Triple well V(x) = a1 x^2 - a0 x^4 + x^6 tilted by Λx.

    At the default a0 ≈ sqrt(120) the three minima are (nearly) degenerate,
    separated by two hilltops. Λ uses the same σ mapping as the double wells,
    with (a0, a1) taken positionally.
    """
    return build_spec(coefficients(a0, a1), sigma_to_lambda(sigma, a0, a1), sigma, ModelTag.MODEL_II, a0, a1)
