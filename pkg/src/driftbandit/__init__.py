"""Discounted-weighting strategies for non-stationary bandits and episodic MDPs."""

from .design import DiscountedDesign, RadiusParams, linear_radius, weighted_potential_bound
from .envs import (
    ArmSet,
    ParameterPath,
    constant_path,
    gen_arms,
    instant_regret,
    make_rng,
    path_length,
    piecewise_path,
    rotating_path,
    rotating_theta,
    sample_reward,
)
from .glm import (
    DiscountedGlmUcb,
    LinkModel,
    PiecewiseSelfConcordantUcb,
    SelfConcordantUcb,
    compute_c_mu,
    glm_radius,
    optimal_gamma_glm,
    optimal_gamma_piecewise,
    optimal_gamma_self_concordant,
    scb_radius,
)
from .harness import ExperimentConfig, RegretTrace, run_experiment, scaling_sweep
from .linear import DiscountedLinUcb, optimal_gamma_linear
from .numerics import (
    DimensionMismatch,
    NotPositiveDefinite,
    logdet,
    quad_norm,
    quad_norm_many,
    spd_solve,
)

__all__ = [
    "ArmSet",
    "DimensionMismatch",
    "DiscountedDesign",
    "DiscountedGlmUcb",
    "DiscountedLinUcb",
    "ExperimentConfig",
    "LinkModel",
    "NotPositiveDefinite",
    "ParameterPath",
    "PiecewiseSelfConcordantUcb",
    "RadiusParams",
    "RegretTrace",
    "SelfConcordantUcb",
    "compute_c_mu",
    "constant_path",
    "gen_arms",
    "glm_radius",
    "instant_regret",
    "linear_radius",
    "logdet",
    "make_rng",
    "optimal_gamma_glm",
    "optimal_gamma_linear",
    "optimal_gamma_piecewise",
    "optimal_gamma_self_concordant",
    "path_length",
    "piecewise_path",
    "quad_norm",
    "quad_norm_many",
    "rotating_path",
    "rotating_theta",
    "run_experiment",
    "sample_reward",
    "scaling_sweep",
    "scb_radius",
    "spd_solve",
    "weighted_potential_bound",
]
