from models.potential import ModelTag, build_spec


def build(sigma=0.0, omega=1.0):
    """Harmonic reference x^2 ω^2 / 2; the tilt is Λ = σ."""
    return build_spec({2: 0.5 * omega**2}, sigma, sigma, ModelTag.HARMONIC)
