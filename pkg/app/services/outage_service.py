import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import linalg as sla
from scipy.special import erfc

from app.config import settings
from app.exceptions import NotDiagonalizableError, NumericalError
from app.models.simulation import Axis, InflectionPoint, OutagePoint, Regime, VarianceConvention
from app.models.system import SystemModel
from app.services.aoi_service import AoiService
from app.utils.linalg import eig_decompose, real_scalar, transform_covariance

logger = logging.getLogger(__name__)

GRID_DECADES = (-4, 4)
GRID_POINTS_PER_DECADE = 400
STENCIL_STEP = 1e-3
BISECTION_RTOL = 1e-9
REGIME_RTOL = 1e-9
# below this p_out the tail is too deep for second differences to carry a sign
NEGLIGIBLE_P = 1e-200


@dataclass(frozen=True)
class ClosedLoopMoments:
    """Stationary mean offset and variance of G - G_aim at a fixed age."""
    mean_offset: float
    variance: float


class OutageService:
    """Closed-form outage probability of the cost G = g x as a function of the age."""

    @staticmethod
    def q_function(y):
        """Upper tail of the standard normal, Q(y) = erfc(y / sqrt(2)) / 2."""
        result = 0.5 * erfc(np.asarray(y, dtype=float) / math.sqrt(2.0))
        return float(result) if np.ndim(result) == 0 else result

    @staticmethod
    def _taus(age: int, convention: VarianceConvention) -> range:
        if convention == VarianceConvention.PAPER_SHIFTED:
            return range(1, age + 2)
        if convention == VarianceConvention.ACCUMULATION:
            return range(0, age + 1)
        raise ValueError(f"convention {convention.value} has no power-sum form")

    @staticmethod
    def error_variance(
        model: SystemModel,
        age: int,
        convention: VarianceConvention = VarianceConvention.PAPER_SHIFTED,
    ) -> float:
        """sigma_G^2 at the given age, summing (g A^tau) sigma (g A^tau)^T over the convention's taus."""
        if age < 1:
            raise ValueError(f"age must be >= 1, got {age}")
        if convention == VarianceConvention.CLOSED_LOOP:
            return OutageService.closed_loop_moments(model, age).variance
        rows = np.stack([model.g[0] @ model.powers.power(tau) for tau in OutageService._taus(age, convention)])
        variance = float(np.einsum("kn,nm,km->", rows, model.sigma, rows))
        return max(0.0, variance)

    @staticmethod
    def error_variance_diag(
        model: SystemModel,
        age: int,
        convention: VarianceConvention = VarianceConvention.PAPER_SHIFTED,
        tol: Optional[float] = None,
    ) -> float:
        """sigma_G^2 through the eigenbasis of A: sum g' L^tau sigma' (g' L^tau)^H.

        `tol` is the diagonalizability tolerance, AOI_DIAG_TOL by default.
        """
        if age < 1:
            raise ValueError(f"age must be >= 1, got {age}")
        decomposition = eig_decompose(model.A, settings.diag_tol if tol is None else tol)
        if not decomposition.diagonalizable:
            raise NotDiagonalizableError(
                f"A is not diagonalizable (eigenvector condition {decomposition.condition:.3e})"
            )
        g_prime = model.g[0] @ decomposition.P
        sigma_prime = transform_covariance(decomposition.P, model.sigma)
        total = 0j
        for tau in OutageService._taus(age, convention):
            row = g_prime * decomposition.eigenvalues ** tau
            total += row @ sigma_prime @ row.conj()
        return max(0.0, real_scalar(total, "sigma_G^2"))

    @staticmethod
    def _reachable_basis(transition: np.ndarray, factor: np.ndarray) -> np.ndarray:
        """Orthonormal basis of the subspace the noise can reach: span{T^k F, k >= 0}."""
        basis = sla.orth(factor)
        while 0 < basis.shape[1] < transition.shape[0]:
            grown = sla.orth(np.hstack([basis, transition @ basis]))
            if grown.shape[1] == basis.shape[1]:
                break
            basis = grown
        return basis

    @staticmethod
    def closed_loop_moments(model: SystemModel, age: int) -> ClosedLoopMoments:
        """Exact stationary moments of G - G_aim for the simulated loop at a fixed age.

        With P = B B^+ the error obeys
            e(t+1) = (I - P) A e(t) + sum_{tau=1..age} P A^tau w(t - tau) + w(t) + (I - P)(A - I) x_aim,
        a linear system once the `age` past noises are stacked onto e; its
        stationary covariance solves a discrete Lyapunov equation on the part
        of that state the noise reaches. Modes the noise never excites (a
        noiseless integrator, say) may sit on the unit circle.
        """
        if age < 1:
            raise ValueError(f"age must be >= 1, got {age}")
        n = model.n
        identity = np.eye(n)
        projector = model.B @ model.b_pinv
        residual = (identity - projector) @ model.A

        size = n * (age + 1)
        transition = np.zeros((size, size))
        transition[:n, :n] = residual
        for j in range(1, age + 1):
            transition[:n, j * n:(j + 1) * n] = projector @ model.powers.power(j)
        for j in range(2, age + 1):
            transition[j * n:(j + 1) * n, (j - 1) * n:j * n] = identity
        inject = np.zeros((size, n))
        inject[:n] = identity
        inject[n:2 * n] = identity

        basis = OutageService._reachable_basis(transition, inject @ model.noise_factor)
        variance = 0.0
        if basis.shape[1]:
            reduced = basis.T @ transition @ basis
            radius = float(np.abs(np.linalg.eigvals(reduced)).max())
            if radius >= 1.0 - 1e-12:
                raise NumericalError(
                    f"closed loop is not mean-square stable (spectral radius {radius:.6f} of the excited part)"
                )
            noise = basis.T @ inject @ model.sigma @ inject.T @ basis
            covariance = basis @ sla.solve_discrete_lyapunov(reduced, noise) @ basis.T
            variance = float(model.g[0] @ covariance[:n, :n] @ model.g[0])

        drift = (identity - projector) @ (model.A - identity) @ model.x_aim
        offset = 0.0
        if np.abs(drift).max() > 1e-12 * (1.0 + np.abs(model.x_aim).max()):
            mean, *_ = np.linalg.lstsq(identity - residual, drift, rcond=None)
            if not np.allclose((identity - residual) @ mean, drift, atol=1e-9):
                raise NumericalError("closed loop has no stationary mean: the drift excites an undamped mode")
            offset = float(model.g[0] @ mean)
        if abs(offset) > 1e-9 * (1.0 + model.delta_g):
            logger.warning(f"Cost has a stationary offset {offset:.4g}; outage band is no longer centred")
        return ClosedLoopMoments(mean_offset=offset, variance=max(0.0, variance))

    @staticmethod
    def outage_probability(delta_g: float, sigma_g_sq: float) -> float:
        """p_out = 2 Q(delta_g / sigma_G), extended by 0 at sigma_G^2 = 0."""
        if delta_g <= 0:
            raise ValueError(f"delta_g must be positive, got {delta_g}")
        if sigma_g_sq < 0:
            raise ValueError(f"sigma_g_sq must be non-negative, got {sigma_g_sq}")
        if sigma_g_sq == 0:
            return 0.0
        return min(1.0, 2.0 * OutageService.q_function(delta_g / math.sqrt(sigma_g_sq)))

    @staticmethod
    def stationary_outage_probability(
        model: SystemModel,
        p: float,
        convention: VarianceConvention = VarianceConvention.PAPER_SHIFTED,
    ) -> float:
        """Per-step outage under bernoulli(p) reception: the age-law mixture of per-age p_out."""
        ages, weights = AoiService.stationary_pmf_table(p)
        if ages[-1] > model.history_depth:
            logger.warning(f"Truncating the age law at the history depth {model.history_depth}")
            keep = ages <= model.history_depth
            ages, weights = ages[keep], weights[keep]
        total = math.fsum(
            float(weight) * OutageService.outage_probability(
                model.delta_g, OutageService.error_variance(model, int(age), convention)
            )
            for age, weight in zip(ages, weights)
        )
        return min(1.0, total)

    @staticmethod
    def regime_threshold(delta_g: float, axis: Axis) -> float:
        """Closed-form inflection of p_out in variance units for the given axis."""
        return delta_g ** 2 / (3.0 if axis == Axis.VARIANCE else 2.0)

    @staticmethod
    def _profile(delta_g: float, axis: Axis):
        """p_out as a function of the axis coordinate (sigma_G^2 or sigma_G)."""
        def p_of(coordinate):
            variance = coordinate if axis == Axis.VARIANCE else coordinate ** 2
            return 2.0 * OutageService.q_function(delta_g / np.sqrt(variance))
        return p_of

    @staticmethod
    def second_differences(delta_g: float, axis: Axis) -> tuple[np.ndarray, np.ndarray]:
        """Central second differences of p_out on a geometric grid of sigma_G^2.

        Returns (variances, second differences) at interior grid points; points
        whose neighbourhood lies in the negligible tail are NaN.
        """
        low, high = GRID_DECADES
        variances = delta_g ** 2 * np.logspace(low, high, (high - low) * GRID_POINTS_PER_DECADE + 1)
        coords = variances if axis == Axis.VARIANCE else np.sqrt(variances)
        values = OutageService._profile(delta_g, axis)(coords)
        h_lo = coords[1:-1] - coords[:-2]
        h_hi = coords[2:] - coords[1:-1]
        d2 = 2.0 * ((values[2:] - values[1:-1]) / h_hi - (values[1:-1] - values[:-2]) / h_lo) / (h_lo + h_hi)
        d2 = np.where(values[:-2] < NEGLIGIBLE_P, np.nan, d2)
        return variances[1:-1], d2

    @staticmethod
    def _sign_changes(d2: np.ndarray) -> np.ndarray:
        signs = np.sign(d2)
        valid = np.flatnonzero(np.isfinite(signs) & (signs != 0))
        flips = signs[valid[:-1]] * signs[valid[1:]] < 0
        return valid[:-1][flips], valid[1:][flips]

    @staticmethod
    def count_inflections(delta_g: float, axis: Axis) -> int:
        return len(OutageService._sign_changes(OutageService.second_differences(delta_g, axis)[1])[0])

    @staticmethod
    def _locate_inflection(delta_g: float, axis: Axis) -> float:
        variances, d2 = OutageService.second_differences(delta_g, axis)
        lows, highs = OutageService._sign_changes(d2)
        if len(lows) == 0:
            raise NumericalError(f"no inflection of p_out found for delta_g={delta_g}")
        if len(lows) > 1:
            logger.warning(f"{len(lows)} sign changes of the second difference; using the first")

        p_of = OutageService._profile(delta_g, axis)

        def to_coord(variance):
            return variance if axis == Axis.VARIANCE else math.sqrt(variance)

        def curvature(c):
            h = STENCIL_STEP * c
            return float(p_of(c + h) - 2.0 * p_of(c) + p_of(c - h))

        lo, hi = to_coord(variances[lows[0]]), to_coord(variances[highs[0]])
        lo_sign = math.copysign(1.0, curvature(lo))
        while (hi - lo) > BISECTION_RTOL * lo:
            mid = 0.5 * (lo + hi)
            if math.copysign(1.0, curvature(mid)) == lo_sign:
                lo = mid
            else:
                hi = mid
        turn = 0.5 * (lo + hi)
        return turn if axis == Axis.VARIANCE else turn ** 2

    @staticmethod
    def inflection_variance(delta_g: float, axis: Axis = Axis.VARIANCE) -> InflectionPoint:
        """Inflection of p_out along `axis`, next to the textbook value delta_g^2 / 2.

        Differentiating in sigma_G^2 puts the inflection at delta_g^2 / 3;
        differentiating in sigma_G puts it at delta_g^2 / 2. Both are reported
        in variance units.
        """
        if delta_g <= 0:
            raise ValueError(f"delta_g must be positive, got {delta_g}")
        return InflectionPoint(
            axis=axis,
            paper_value=delta_g ** 2 / 2.0,
            numeric_value=OutageService._locate_inflection(delta_g, axis),
            closed_form=OutageService.regime_threshold(delta_g, axis),
        )

    @staticmethod
    def classify_regime(delta_g: float, sigma_g_sq: float, axis: Axis = Axis.STD_DEV) -> Regime:
        if delta_g <= 0:
            raise ValueError(f"delta_g must be positive, got {delta_g}")
        if sigma_g_sq < 0:
            raise ValueError(f"sigma_g_sq must be non-negative, got {sigma_g_sq}")
        threshold = OutageService.regime_threshold(delta_g, axis)
        if abs(sigma_g_sq - threshold) <= REGIME_RTOL * threshold:
            return Regime.INFLECTION
        return Regime.CONVEX if sigma_g_sq < threshold else Regime.CONCAVE

    @staticmethod
    def outage_curve(
        model: SystemModel,
        ages: Iterable[int],
        convention: VarianceConvention = VarianceConvention.PAPER_SHIFTED,
        axis: Axis = Axis.STD_DEV,
    ) -> list[OutagePoint]:
        ages = list(ages)
        if not ages:
            raise ValueError("ages must not be empty")
        points = []
        for age in ages:
            variance = OutageService.error_variance(model, age, convention)
            points.append(OutagePoint(
                age=age,
                sigma_g_sq=variance,
                p_out=OutageService.outage_probability(model.delta_g, variance),
                regime=OutageService.classify_regime(model.delta_g, variance, axis),
            ))
        return points

    @staticmethod
    def model_probability(
        model: SystemModel,
        age: int,
        convention: VarianceConvention,
    ) -> tuple[float, float]:
        """(sigma_G^2, p_out) for one age."""
        variance = OutageService.error_variance(model, age, convention)
        return variance, OutageService.outage_probability(model.delta_g, variance)

    @staticmethod
    def conventions_for(model: SystemModel) -> list[VarianceConvention]:
        """Conventions that can be evaluated for `model` (closed_loop needs a stable unactuated part)."""
        available = [VarianceConvention.PAPER_SHIFTED, VarianceConvention.ACCUMULATION]
        try:
            OutageService.closed_loop_moments(model, 1)
            available.append(VarianceConvention.CLOSED_LOOP)
        except NumericalError:
            pass
        return available
