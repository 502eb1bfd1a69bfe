"""Estimation toolkit for displacement channels with a randomized direction.

The library models a bosonic mode in a truncated number basis, pushes probe
states through a displacement channel whose direction is drawn fresh every
use, and quantifies how well the displacement magnitude can be estimated:
quantum and classical Fisher information, closed-form survival curves,
maximum-likelihood inversion of counting experiments, homodyne comparisons,
and Wigner-function views of the probes.
"""

import os as _os

# SPREADCHAN_THREADS caps BLAS parallelism; it must land in the environment
# before the numeric stack loads, which is why it lives up here.
_cap = _os.environ.get("SPREADCHAN_THREADS")
if _cap:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _cap)
del _os, _cap

from .channel import ChannelSpec, PhaseDistribution, apply_channel, displacement
from .errors import (
    DegenerateFamilyError,
    DimensionError,
    DomainError,
    NumericError,
    ParseError,
    QuadratureError,
    ShapeError,
    SpreadchanError,
    TruncationError,
)
from .estimation import (
    ExperimentConfig,
    ExperimentResult,
    MLEEstimate,
    mle_from_counts,
    overlap_fluctuations,
    randomized_rotation_statistics,
    rmse_sweep,
    simulate,
)
from .fisher import (
    FisherReport,
    avg_qfi,
    cfi_discrete,
    cfi_quadrature,
    cfi_self_projection,
    noisy_cfi,
    qfi_bound,
    qfi_mixed,
    qfi_pure,
)
from .fock import DensityOperator, StateVector
from .measurement import MeasurementModel, p0_function, p0_numeric
from .states import StateSpec, auto_dim, build_state
from .wigner import PhaseSpaceGrid, wigner_grid

__version__ = "0.1.0"

__all__ = [
    "ChannelSpec",
    "DegenerateFamilyError",
    "DensityOperator",
    "DimensionError",
    "DomainError",
    "ExperimentConfig",
    "ExperimentResult",
    "FisherReport",
    "MeasurementModel",
    "MLEEstimate",
    "NumericError",
    "ParseError",
    "PhaseDistribution",
    "PhaseSpaceGrid",
    "QuadratureError",
    "ShapeError",
    "SpreadchanError",
    "StateSpec",
    "StateVector",
    "TruncationError",
    "apply_channel",
    "auto_dim",
    "avg_qfi",
    "build_state",
    "cfi_discrete",
    "cfi_quadrature",
    "cfi_self_projection",
    "displacement",
    "mle_from_counts",
    "noisy_cfi",
    "overlap_fluctuations",
    "p0_function",
    "p0_numeric",
    "qfi_bound",
    "qfi_mixed",
    "qfi_pure",
    "randomized_rotation_statistics",
    "rmse_sweep",
    "simulate",
    "wigner_grid",
    "__version__",
]
