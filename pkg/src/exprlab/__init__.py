"""Constructions, analyses and experiments around GNN aggregation expressivity."""

import os as _os

from .util import thread_limit as _thread_limit

# BLAS pools are the only parallelism here; cap them before numpy loads
if "EXPR_LAB_THREADS" in _os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, str(_thread_limit()))

__version__ = "0.1.0"

from .families import FamilySpec, FeaturedGraph, make_family
from .gnn import Aggregation, Gnn, GnnLayer, LayerTrace, Readout, aggregate, gnn_forward
from .neural import Fnn, FnnLayer, fnn_eval, fnn_grad, lipschitz_upper
from .constructions import (build_indicator, build_max_approx, build_mean_approx,
                            compile_to_sum, growth_bound)
from .describe import check_description, describe, sum_readout_description
from .minimax import minimax_gap, scan_gap
from .pieces import detect_pieces, piece_bound
from .search import counterexample_search
from .experiments import ReTable, TaskSpec, TrainConfig, evaluate_re, make_dataset, train

__all__ = [
    "__version__",
    "FamilySpec",
    "FeaturedGraph",
    "make_family",
    "Aggregation",
    "Gnn",
    "GnnLayer",
    "LayerTrace",
    "Readout",
    "aggregate",
    "gnn_forward",
    "Fnn",
    "FnnLayer",
    "fnn_eval",
    "fnn_grad",
    "lipschitz_upper",
    "build_indicator",
    "build_max_approx",
    "build_mean_approx",
    "compile_to_sum",
    "growth_bound",
    "check_description",
    "describe",
    "sum_readout_description",
    "minimax_gap",
    "scan_gap",
    "detect_pieces",
    "piece_bound",
    "counterexample_search",
    "ReTable",
    "TaskSpec",
    "TrainConfig",
    "evaluate_re",
    "make_dataset",
    "train",
]
