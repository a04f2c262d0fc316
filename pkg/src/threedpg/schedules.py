"""Step-size sequences for the critic (alpha) and actor (beta).

Defaults::

    alpha(n) = c / (n/1000 + 1)
    beta(n)  = c / (n/1000 + 1) + c / (n/1000 + 1)**2

with ``c = e^-6``. ``sum alpha`` diverges like the harmonic series and
``sum alpha^2`` converges like ``sum 1/n^2``; ``beta/alpha - 1 = 1000/(n+1000)``.
The literal-``1e-6`` reading of the constant is available as ``base="1e-6"``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ConfigurationError

BASES = {"e-6": math.exp(-6.0), "1e-6": 1e-6}


class ScheduleKind(str, enum.Enum):
    ALPHA = "alpha"
    BETA = "beta"


@dataclass(frozen=True)
class StepSizes:
    base: float = BASES["e-6"]
    horizon: float = 1000.0

    @classmethod
    def from_config(cls, base="e-6", horizon=1000.0, scale=1.0) -> "StepSizes":
        if isinstance(base, str):
            if base not in BASES:
                raise ConfigurationError(f"unknown step-size base {base!r}; use one of {sorted(BASES)} or a number")
            base = BASES[base]
        base = float(base) * float(scale)
        if base <= 0 or horizon <= 0:
            raise ConfigurationError("step-size base and horizon must be positive")
        return cls(base, float(horizon))

    def alpha(self, n: int) -> float:
        if n < 0:
            raise ConfigurationError("step index must be >= 0")
        return self.base / (n / self.horizon + 1.0)

    def beta(self, n: int) -> float:
        if n < 0:
            raise ConfigurationError("step index must be >= 0")
        k = n / self.horizon + 1.0
        return self.base / k + self.base / (k * k)


DEFAULT_STEP_SIZES = StepSizes()


def schedule_eval(kind, n: int, sizes: StepSizes = DEFAULT_STEP_SIZES) -> float:
    kind = ScheduleKind(kind)
    return sizes.alpha(n) if kind is ScheduleKind.ALPHA else sizes.beta(n)
