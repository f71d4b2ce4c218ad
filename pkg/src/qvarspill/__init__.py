"""Quantile VAR spillover analysis."""

from .contagion import EventWindowSpec, fr_adjust, fr_test, synth_control
from .dgp import DgpSpec, simulate, theoretical_fevd
from .fevd import FevdMatrix, generalized_fevd, qvma
from .qvar import QvarModel, QvarSpec, fit_qvar, stability_check
from .spillover import indices, relative
from .timeseries import AssetMeta, Category, load_csv, to_deviations

__version__ = "0.1.0"
