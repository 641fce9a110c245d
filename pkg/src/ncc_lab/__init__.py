"""Cause-effect direction classification from bivariate samples.

The package trains a set-input neural classifier (the Neural Causation
Coefficient, NCC) on synthetic heteroscedastic additive-noise scatterplots,
evaluates it on the Tuebingen cause-effect pairs, and applies it to score
image features as causal or anticausal with respect to class log odds.
"""

from ncc_lab.synthgen import (
    CausalSample,
    DegenerateSignal,
    GaussianMixture,
    GenerationFailed,
    GeneratorConfig,
    Spline,
    generate_scatterplot,
    make_training_minibatch,
    sample_cause_distribution,
    sample_mechanism,
    standardize,
)
from ncc_lab.ncc import (
    EmptySample,
    NCCModel,
    TrainConfig,
    grid_search,
    load_model,
    ncc_forward,
    ncc_symmetric,
    save_model,
    train,
    validate,
)

__all__ = [
    "CausalSample",
    "DegenerateSignal",
    "EmptySample",
    "GaussianMixture",
    "GenerationFailed",
    "GeneratorConfig",
    "NCCModel",
    "Spline",
    "TrainConfig",
    "generate_scatterplot",
    "grid_search",
    "load_model",
    "make_training_minibatch",
    "ncc_forward",
    "ncc_symmetric",
    "sample_cause_distribution",
    "sample_mechanism",
    "save_model",
    "standardize",
    "train",
    "validate",
]

__version__ = "0.1.0"
