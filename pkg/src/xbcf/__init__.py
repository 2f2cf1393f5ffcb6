"""Accelerated Bayesian causal forests for heterogeneous treatment effects."""

from .errors import ParseError, ValidationError, XbcfError
from .model_core import (
    Dataset,
    Draw,
    Forest,
    GroupedSuffStats,
    Hyperparams,
    PosteriorDraws,
    ScaleState,
    Tree,
    leaf_log_marginal,
    leaf_posterior,
    predict_forest,
)
from .gfr import CutpointGrid, build_cutpoints, grow_from_root, split_weights
from .sampler import CateSummary, fit, summarize, update_a, update_b, update_sigmas
from .bcf_mcmc import bcf_fit, mh_step, warm_start
from .simulation import DGPConfig, SimulatedData, generate, run_benchmark, score
from .propensity import estimate_propensity
from .subgroups import subgroup_posterior, subgroup_tree
from .io import load_archive, load_csv, save_archive

__all__ = [
    "Dataset", "Draw", "Forest", "GroupedSuffStats", "Hyperparams",
    "PosteriorDraws", "ScaleState", "Tree", "CutpointGrid", "CateSummary",
    "DGPConfig", "SimulatedData",
    "leaf_log_marginal", "leaf_posterior", "predict_forest",
    "build_cutpoints", "grow_from_root", "split_weights",
    "fit", "summarize", "update_a", "update_b", "update_sigmas",
    "bcf_fit", "mh_step", "warm_start",
    "generate", "run_benchmark", "score",
    "estimate_propensity", "subgroup_tree", "subgroup_posterior",
    "load_csv", "save_archive", "load_archive",
    "XbcfError", "ValidationError", "ParseError",
]

__version__ = "0.1.0"
