from __future__ import annotations

import math

import numpy as np


class OuNoise:
    """Ornstein-Uhlenbeck process ``x <- x - theta*x*dt + sigma*sqrt(dt)*N(0, I)``.

    The process lives in normalized action units; :func:`threedpg.learner.act`
    scales it by each action interval's half-width.
    """

    def __init__(self, dim: int, rng: np.random.Generator, theta: float = 0.15,
                 sigma: float = 0.2, dt: float = 1.0, x0=None):
        self.dim = dim
        self.rng = rng
        self.theta = theta
        self.sigma = sigma
        self.dt = dt
        self._x0 = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
        self.x = self._x0.copy()

    def reset(self):
        self.x = self._x0.copy()

    def sample(self) -> np.ndarray:
        # draw even when sigma == 0 so RNG consumption is independent of sigma
        shock = self.rng.standard_normal(self.dim)
        self.x = self.x + self.theta * (0.0 - self.x) * self.dt + self.sigma * math.sqrt(self.dt) * shock
        return self.x.copy()
