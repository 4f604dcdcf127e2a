"""Kernel learning in p-norm spaces of expansion coefficients.

Submodules
----------
expansion
    Expansion families, kernels, higher-order kernels and tail bounds.
rkbs
    Functions as coefficient sequences: norms, pairings, Gateaux derivatives.
learn
    Regularized risk, its gradient, the trainer and the p -> 1 homotopy.
sparse
    The weighted-l1 problem in eigen-coordinates and ISTA/FISTA.
fileio, cli, verify
    Files, the command line and its property suites.
"""

from . import expansion, learn, quadrature, rkbs, sparse
from .expansion import ExpansionFamily
from .learn import Loss, Regularizer, RepresenterModel, TrainConfig
from .rkbs import SequenceFunction

__version__ = "0.1.0"

__all__ = [
    "expansion",
    "learn",
    "quadrature",
    "rkbs",
    "sparse",
    "ExpansionFamily",
    "Loss",
    "Regularizer",
    "RepresenterModel",
    "SequenceFunction",
    "TrainConfig",
]
