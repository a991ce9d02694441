"""endpointer: destination and arrival-time inference for tracked objects.

A bank of endpoint-conditioned Kalman filters turns a stream of noisy
position observations into posteriors over which destination the object is
heading for, when it will arrive, and where it is now (and will be).
"""

from .gaussian import Gaussian, GaussianMixture, gaussian_logpdf
from .models import (
    Destination,
    ModelKind,
    ModelParams,
    TransitionTriple,
    mfd_covariance,
    observation_matrix,
    transition,
    transition_parts,
)

__version__ = "0.1.0"

__all__ = [
    "Gaussian",
    "GaussianMixture",
    "gaussian_logpdf",
    "Destination",
    "ModelKind",
    "ModelParams",
    "TransitionTriple",
    "mfd_covariance",
    "observation_matrix",
    "transition",
    "transition_parts",
    "__version__",
]
