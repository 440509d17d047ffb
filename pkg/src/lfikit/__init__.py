"""Likelihood-free inference with classifier discrepancies and GP-guided acquisition."""

__version__ = "0.1.0"

from .simulators import (
    DataSet,
    GaussianSimulator,
    ParameterPoint,
    RngSeed,
    SimulatorSpec,
    observed_data,
    simulate_gaussian,
)
from .discrepancy import (
    DiscrepancyValue,
    LabeledSet,
    LDAModel,
    cv_accuracy,
    delta_theta,
    discriminability,
    fit_lda,
)
from .abc import ABCConfig, BudgetExhausted, PriorSpec, SampleSet, abc_rejection
from .gp import (
    HyperBounds,
    gp_extend,
    gp_predict_many,
    GPModel,
    KernelHyper,
    PosteriorStats,
    gp_fit,
    gp_predict,
    kernel,
    log_marginal_likelihood,
    optimize_hyperparams,
)
from .bo import AcquisitionConfig, ApproxPosterior, BOTrace, acquire_next, approx_posterior, bolfi_run
