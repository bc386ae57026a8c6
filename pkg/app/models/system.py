from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from app.exceptions import ModelValidationError
from app.utils.linalg import MatrixPowers, as_matrix, psd_factor, pseudo_inverse, require_square

DEFAULT_HISTORY_DEPTH = 512


class LinkMode(str, Enum):
    """Uplink reception process."""
    BERNOULLI = "bernoulli"
    FIXED_AGE = "fixed_age"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class LinkModel:
    """Unreliable sensor-to-controller link.

    bernoulli: each step's packet (carrying the previous state) arrives with probability p.
    fixed_age: a constant-delay pipe delivering x(t - age) every step, pinning the AoI.
    periodic: a packet arrives exactly every `period` steps.
    """

    mode: LinkMode
    p: Optional[float] = None
    age: Optional[int] = None
    period: Optional[int] = None

    def __post_init__(self):
        if self.mode == LinkMode.BERNOULLI:
            if self.p is None or not 0.0 < self.p <= 1.0:
                raise ModelValidationError(f"bernoulli link needs 0 < p <= 1, got {self.p}")
        elif self.mode == LinkMode.FIXED_AGE:
            if self.age is None or self.age < 1:
                raise ModelValidationError(f"fixed_age link needs age >= 1, got {self.age}")
        elif self.mode == LinkMode.PERIODIC:
            if self.period is None or self.period < 1:
                raise ModelValidationError(f"periodic link needs period >= 1, got {self.period}")

    @classmethod
    def bernoulli(cls, p: float) -> "LinkModel":
        return cls(mode=LinkMode.BERNOULLI, p=p)

    @classmethod
    def fixed_age(cls, age: int) -> "LinkModel":
        return cls(mode=LinkMode.FIXED_AGE, age=age)

    @classmethod
    def periodic(cls, period: int) -> "LinkModel":
        return cls(mode=LinkMode.PERIODIC, period=period)

    @property
    def delay(self) -> int:
        """Steps between a state being sensed and the packet carrying it arriving."""
        return self.age if self.mode == LinkMode.FIXED_AGE else 1

    def __str__(self) -> str:
        if self.mode == LinkMode.BERNOULLI:
            return f"bernoulli(p={self.p})"
        if self.mode == LinkMode.FIXED_AGE:
            return f"fixed_age({self.age})"
        return f"periodic({self.period})"


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Plant x(t+1) = A x(t) + B u(t) + w(t), w ~ N(0, sigma), with scalar cost G = g x.

    Outage band is G_aim +/- delta_g where G_aim = g x_aim. Derived quantities
    (pseudo-inverse of B, cached powers of A, noise factor) are computed once
    at construction; the model is immutable afterwards.
    """

    A: np.ndarray
    B: np.ndarray
    sigma: np.ndarray
    g: np.ndarray
    x_aim: np.ndarray
    delta_g: float
    history_depth: int = DEFAULT_HISTORY_DEPTH

    b_pinv: np.ndarray = field(init=False, repr=False)
    b_rank: int = field(init=False, repr=False)
    powers: MatrixPowers = field(init=False, repr=False)
    powers_b: np.ndarray = field(init=False, repr=False)
    noise_factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        require_square(A, "A")
        n = A.shape[0]
        B = as_matrix(self.B, "B")
        if B.shape[0] != n:
            # a single printed row is read as the column it has to be
            if B.shape == (1, n):
                B = B.T
            else:
                raise ModelValidationError(f"B must have {n} rows, got shape {B.shape}")
        sigma = as_matrix(self.sigma, "sigma")
        if sigma.shape != (n, n):
            raise ModelValidationError(f"sigma must be {n}x{n}, got shape {sigma.shape}")
        g = as_matrix(self.g, "g")
        if g.shape != (1, n):
            raise ModelValidationError(f"g must be a row of length {n}, got shape {g.shape}")
        x_aim = np.array(self.x_aim, dtype=float).reshape(-1)
        if x_aim.shape != (n,) or not np.all(np.isfinite(x_aim)):
            raise ModelValidationError(f"x_aim must be a finite vector of length {n}")
        if not np.isfinite(self.delta_g) or self.delta_g <= 0:
            raise ModelValidationError(f"delta_g must be positive, got {self.delta_g}")
        if self.history_depth < 1:
            raise ModelValidationError(f"history_depth must be >= 1, got {self.history_depth}")

        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "x_aim", x_aim)
        object.__setattr__(self, "delta_g", float(self.delta_g))
        object.__setattr__(self, "noise_factor", psd_factor(sigma))

        pinv = pseudo_inverse(B)
        object.__setattr__(self, "b_pinv", pinv.matrix)
        object.__setattr__(self, "b_rank", pinv.rank)

        with np.errstate(over="ignore", invalid="ignore"):
            powers = MatrixPowers(A, self.history_depth + 1)
            powers_b = powers.stacked[:self.history_depth] @ B
        powers_b.setflags(write=False)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "powers_b", powers_b)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def g_aim(self) -> float:
        return float(self.g[0] @ self.x_aim)

    @property
    def g_band(self) -> tuple[float, float]:
        return self.g_aim - self.delta_g, self.g_aim + self.delta_g

    def cost(self, x: np.ndarray) -> float:
        return float(self.g[0] @ x)

    def with_noise_scale(self, scale: float) -> "SystemModel":
        """Same model with the noise standard deviation multiplied by `scale`."""
        return replace(self, sigma=self.sigma * scale ** 2)
