"""Confidence-adjusted surprise for sequential experimental design.

A GP surrogate scores each new observation by how surprising it is given
the model's own confidence; surprising regions are verified and exploited,
everything else is explored by maximin Sobol sampling.
"""
from .engine import Engine, EngineConfig, RunTrace, run
from .gp import Dataset, GPModel, fit, optimize_hyperparameters, predict
from .kernels import KernelSpec, parse_kernel
from .objectives import make_objective, synth_table, load_table
from .sampling import SearchSpace

__all__ = [
    "Dataset", "Engine", "EngineConfig", "GPModel", "KernelSpec", "RunTrace", "SearchSpace",
    "fit", "load_table", "make_objective", "optimize_hyperparameters", "parse_kernel", "predict",
    "run", "synth_table",
]
__version__ = "0.1.0"
