"""Rate-distortion-leakage regions for secure source coding with a public helper."""
from ._kernels import BACKEND
from .model import (
    AuxChannel,
    ChainOrder,
    GaussianChain,
    JointPmf3,
    RdlPoint,
    check_markov,
    load_model,
    marginal,
    save_model,
    validate,
)

__all__ = [
    "AuxChannel",
    "BACKEND",
    "ChainOrder",
    "GaussianChain",
    "JointPmf3",
    "RdlPoint",
    "check_markov",
    "load_model",
    "marginal",
    "save_model",
    "validate",
]
__version__ = "0.1.0"
