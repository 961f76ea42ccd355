"""Stochastic power-iteration eigensolvers: walker dynamics (FCIQMC and the
initiator variant), fast randomized iteration with unbiased sparse
compression, and deterministic hard thresholding, on matrices given as
column oracles."""

from .compress import CompressionSpec, compress, split_large
from .errors import (
    ConfigError,
    DegenerateIterate,
    NonConvergence,
    PopulationCollapse,
    PopulationExplosion,
    StochPowerError,
    UndefinedEstimator,
)
from .fciqmc import FciqmcConfig, FciqmcState, fciqmc_step
from .fri import exact_matvec, fri_step
from .hamiltonian import ColumnOracle, DenseMatrix, FileMatrix, IterationMatrix, load_matrix
from .hubbard import HubbardMomentum
from .vectors import INFINITE_TANGENT, SparseVector, WalkerEnsemble

__version__ = "0.1.0"

__all__ = [
    "INFINITE_TANGENT",
    "ColumnOracle",
    "CompressionSpec",
    "ConfigError",
    "DegenerateIterate",
    "DenseMatrix",
    "FciqmcConfig",
    "FciqmcState",
    "FileMatrix",
    "HubbardMomentum",
    "IterationMatrix",
    "NonConvergence",
    "PopulationCollapse",
    "PopulationExplosion",
    "SparseVector",
    "StochPowerError",
    "UndefinedEstimator",
    "WalkerEnsemble",
    "compress",
    "exact_matvec",
    "fciqmc_step",
    "fri_step",
    "load_matrix",
    "split_large",
]
