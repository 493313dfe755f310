from models import double_well, harmonic, plateau_well, triple_well
from models.potential import ModelTag, PotentialSpec, build_spec, evaluate

MODELS = {
    ModelTag.MODEL_I: double_well,
    ModelTag.MODEL_IA: plateau_well,
    ModelTag.MODEL_II: triple_well,
    ModelTag.HARMONIC: harmonic,
}


def build_preset(model_tag, sigma):
    """
    Build one of the preset wells.

    Parameters
    ----------
    model_tag : ModelTag or str
        ModelI, ModelIa, ModelII or Harmonic
    sigma : float
        Asymmetry parameter, must be >= 0

    Returns
    -------
    PotentialSpec
    """
    tag = ModelTag(model_tag)
    if tag is ModelTag.CUSTOM:
        raise ValueError("Custom potentials are built from explicit coefficients, use build_spec")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    return MODELS[tag].build(float(sigma))


def spec_from_config(block):
    """
    Potential from a config block {model, sigma, coefficients?, lambda?}.

    Custom models must give both coefficients and lambda.
    """
    tag = ModelTag(block.get("model", ModelTag.MODEL_I.value))
    sigma = float(block.get("sigma", 0.0))
    if tag is not ModelTag.CUSTOM:
        return build_preset(tag, sigma)
    if "coefficients" not in block or "lambda" not in block:
        raise ValueError("Custom model needs 'coefficients' and 'lambda'")
    return build_spec(block["coefficients"], float(block["lambda"]), sigma, tag)


# parameter swept against Λ in the fixed-point region maps
REGION_PARAMETERS = {ModelTag.MODEL_I: "a1", ModelTag.MODEL_IA: "a1", ModelTag.MODEL_II: "a0"}


def region_builder(model_tag):
    """
    (parameter name, preset value, builder(value, lam)) for the region map of a preset.

    The other coefficient of the (a0, a1) pair stays at its preset value.
    """
    tag = ModelTag(model_tag)
    name = REGION_PARAMETERS.get(tag)
    if name is None:
        raise ValueError(f"{tag.value} has no region map")
    module = MODELS[tag]

    def builder(value, lam):
        pair = {"a0": module.A0, "a1": module.A1, name: float(value)}
        return build_spec(module.coefficients(**pair), lam, model_tag=tag, **pair)

    return name, getattr(module, name.upper()), builder


__all__ = [
    "MODELS",
    "ModelTag",
    "PotentialSpec",
    "build_preset",
    "build_spec",
    "evaluate",
    "region_builder",
    "spec_from_config",
]
