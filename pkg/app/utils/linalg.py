"""
Small dense matrix helpers used by the loop model and the outage analysis.

Everything here is pure: inputs are never modified and returned arrays are
fresh (or read-only cached) objects, so values can be shared across threads.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from app.exceptions import ModelValidationError, NumericalError

logger = logging.getLogger(__name__)

IMAG_RESIDUE_TOL = 1e-10
PSD_TOL = 1e-12


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce nested sequences to a finite 2-D float array."""
    matrix = np.array(values, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
        raise ModelValidationError(f"{name} must be a non-empty 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ModelValidationError(f"{name} contains NaN or infinite entries")
    return matrix


def require_square(A: np.ndarray, name: str = "matrix") -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ModelValidationError(f"{name} must be square, got shape {A.shape}")


def mat_power(A: np.ndarray, k: int) -> np.ndarray:
    """Return A**k; A**0 is the identity."""
    require_square(A)
    if k < 0:
        raise ValueError(f"exponent must be non-negative, got {k}")
    return np.linalg.matrix_power(A, k)


class MatrixPowers:
    """Read-only cache of A^0 .. A^max_power built by repeated multiplication."""

    def __init__(self, A: np.ndarray, max_power: int):
        require_square(A)
        powers = [np.eye(A.shape[0], dtype=A.dtype)]
        for _ in range(max_power):
            powers.append(powers[-1] @ A)
        stacked = np.stack(powers)
        stacked.setflags(write=False)
        self._A = A
        self._powers = stacked

    @property
    def max_power(self) -> int:
        return self._powers.shape[0] - 1

    @property
    def stacked(self) -> np.ndarray:
        """All cached powers as an array of shape (max_power + 1, N, N)."""
        return self._powers

    def power(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError(f"exponent must be non-negative, got {k}")
        if k <= self.max_power:
            return self._powers[k]
        return self._powers[-1] @ np.linalg.matrix_power(self._A, k - self.max_power)


class PseudoInverse(NamedTuple):
    matrix: np.ndarray
    rank: int


def pseudo_inverse(B: np.ndarray) -> PseudoInverse:
    """Moore-Penrose pseudo-inverse of B together with its numerical rank."""
    if B.size == 0:
        raise ModelValidationError("cannot pseudo-invert an empty matrix")
    return PseudoInverse(matrix=np.linalg.pinv(B), rank=int(np.linalg.matrix_rank(B)))


@dataclass(frozen=True)
class Eigendecomposition:
    """A = P diag(eigenvalues) P^-1, meaningful only when diagonalizable is True."""

    P: np.ndarray
    eigenvalues: np.ndarray
    diagonalizable: bool
    condition: float

    @property
    def Lambda(self) -> np.ndarray:
        return np.diag(self.eigenvalues)


def _multiplicity_deficit(A: np.ndarray, eigenvalues: np.ndarray, tol: float) -> bool:
    """True when some eigenvalue cluster has fewer eigenvectors than its multiplicity."""
    n = A.shape[0]
    cluster_tol = np.sqrt(tol) * (1.0 + np.abs(A).max())
    assigned = np.zeros(n, dtype=bool)
    for i in range(n):
        if assigned[i]:
            continue
        members = np.abs(eigenvalues - eigenvalues[i]) <= cluster_tol
        assigned |= members
        algebraic = int(members.sum())
        if algebraic == 1:
            continue
        shifted = A - eigenvalues[members].mean() * np.eye(n)
        geometric = n - int(np.linalg.matrix_rank(shifted, tol=cluster_tol))
        if geometric < algebraic:
            return True
    return False


def eig_decompose(A: np.ndarray, tol: float = 1e-8) -> Eigendecomposition:
    """Eigendecomposition with a diagonalizability verdict.

    The verdict is negative when the eigenvector matrix is worse conditioned
    than 1/tol, when a repeated eigenvalue lacks eigenvectors, or when the
    reconstruction P diag(lambda) P^-1 misses A.
    """
    require_square(A)
    eigenvalues, P = np.linalg.eig(A)
    condition = float(np.linalg.cond(P))
    diagonalizable = np.isfinite(condition) and condition <= 1.0 / tol
    if diagonalizable and _multiplicity_deficit(A, eigenvalues, tol):
        diagonalizable = False
    if diagonalizable:
        rebuilt = P @ np.diag(eigenvalues) @ np.linalg.inv(P)
        if np.abs(A - rebuilt).max() > 1e-9 * (1.0 + np.abs(A).max()):
            diagonalizable = False
    return Eigendecomposition(P=P, eigenvalues=eigenvalues, diagonalizable=bool(diagonalizable), condition=condition)


def transform_covariance(P: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Covariance of P^-1 w for w with covariance sigma: P^-1 sigma P^-H."""
    require_square(P, "P")
    try:
        if np.linalg.cond(P) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        P_inv = np.linalg.inv(P)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"transform matrix is singular: {exc}") from exc
    transformed = P_inv @ sigma @ P_inv.conj().T
    return 0.5 * (transformed + transformed.conj().T)


def real_scalar(value: complex, what: str = "value") -> float:
    """Drop an imaginary residue below tolerance; refuse anything larger."""
    value = complex(value)
    if abs(value.imag) > IMAG_RESIDUE_TOL * (1.0 + abs(value.real)):
        raise NumericalError(f"{what} has a non-negligible imaginary part {value.imag:.3e}")
    if value.imag != 0.0:
        logger.debug(f"Dropping imaginary residue {value.imag:.3e} from {what}")
    return value.real


def is_symmetric(matrix: np.ndarray, rtol: float = 1e-9) -> bool:
    return matrix.shape[0] == matrix.shape[1] and np.allclose(matrix, matrix.T, rtol=rtol, atol=rtol)


def psd_factor(sigma: np.ndarray) -> np.ndarray:
    """Square-root factor L with L L^T = sigma, valid for rank-deficient sigma.

    Eigenvalues below -PSD_TOL (relative to the covariance scale) are
    rejected; smaller negative residues are clipped to zero.
    """
    require_square(sigma, "noise covariance")
    if not is_symmetric(sigma):
        raise NumericalError("noise covariance is not symmetric")
    eigenvalues, vectors = np.linalg.eigh(0.5 * (sigma + sigma.T))
    scale = max(1.0, float(np.abs(eigenvalues).max(initial=0.0)))
    if eigenvalues.min(initial=0.0) < -PSD_TOL * scale:
        raise NumericalError(f"noise covariance is not positive semidefinite (eigenvalue {eigenvalues.min():.3e})")
    return vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
