"""Modular multivariate temporal point processes: compose, fit, simulate, predict."""
from .data import Database, EventSequence, relabel_types, validate_database
from .kernels import make_kernel
from .intensity import Activation, HawkesModel, build_model, make_exogenous, make_impact

__version__ = "0.1.0"
