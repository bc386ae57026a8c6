from .linalg import (
    Eigendecomposition,
    MatrixPowers,
    PseudoInverse,
    eig_decompose,
    mat_power,
    pseudo_inverse,
    psd_factor,
    transform_covariance,
)
from .streams import EpisodeStreams, RandomStream

__all__ = [
    "Eigendecomposition",
    "MatrixPowers",
    "PseudoInverse",
    "eig_decompose",
    "mat_power",
    "pseudo_inverse",
    "psd_factor",
    "transform_covariance",
    "EpisodeStreams",
    "RandomStream",
]
