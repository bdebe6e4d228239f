"""Prior specifications in log-parameter space."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..nhpp import PowerLawParams

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def normal_logpdf(x, mean, sd):
    z = (np.asarray(x, dtype=float) - mean) / sd
    return -0.5 * z * z - np.log(sd) - _LOG_SQRT_2PI


@dataclass(frozen=True)
class LogParams:
    """``(ln a, ln b)``: the unconstrained working coordinates."""

    ln_a: float
    ln_b: float

    def __post_init__(self):
        if not (math.isfinite(self.ln_a) and math.isfinite(self.ln_b)):
            raise ValueError("log-parameters must be finite")

    def to_params(self) -> PowerLawParams:
        return PowerLawParams.from_log(self.ln_a, self.ln_b)

    @classmethod
    def from_params(cls, params: PowerLawParams) -> "LogParams":
        return cls(params.ln_a, params.ln_b)


@dataclass(frozen=True)
class Priors:
    """Independent Normal priors on ``ln a`` and ``ln b``."""

    mean_ln_a: float = -7.0
    sd_ln_a: float = 5.0
    mean_ln_b: float = 0.0
    sd_ln_b: float = 3.0

    def __post_init__(self):
        if not (self.sd_ln_a > 0 and self.sd_ln_b > 0):
            raise ValueError("prior standard deviations must be positive")

    def logpdf(self, ln_a, ln_b):
        return (normal_logpdf(ln_a, self.mean_ln_a, self.sd_ln_a)
                + normal_logpdf(ln_b, self.mean_ln_b, self.sd_ln_b))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HyperPriors:
    """Normal hyperpriors on the population means, Uniform on the population sds."""

    m_ln_a: float = -7.0
    s_ln_a: float = 4.0
    l_ln_a: float = 0.0
    u_ln_a: float = 5.0
    m_ln_b: float = -2.0
    s_ln_b: float = 2.0
    l_ln_b: float = 0.0
    u_ln_b: float = 3.0

    def __post_init__(self):
        # s = 0 pins a population mean at m; l = u pins a population sd at l
        if not (self.s_ln_a >= 0 and self.s_ln_b >= 0):
            raise ValueError("hyperprior standard deviations must be nonnegative")
        for lo, hi in ((self.l_ln_a, self.u_ln_a), (self.l_ln_b, self.u_ln_b)):
            if not (0 <= lo <= hi) or hi <= 0:
                raise ValueError(f"uniform bounds need 0 <= l <= u and u > 0, got [{lo}, {hi}]")

    def fixed_mean(self, p: int) -> bool:
        return (self.s_ln_a if p == 0 else self.s_ln_b) == 0

    def fixed_sd(self, p: int) -> bool:
        lo, hi = (self.l_ln_a, self.u_ln_a) if p == 0 else (self.l_ln_b, self.u_ln_b)
        return lo == hi

    def to_dict(self) -> dict:
        return asdict(self)
