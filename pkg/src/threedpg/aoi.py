"""Age-of-information analysis: analytic dominating tails and the dominance check.

Policy AoI under the dissemination schedule in :mod:`threedpg.netsim`.
Policy ``k`` is enqueued at slot ``e_k`` and completes at
``d_k = e_k + S_k - 1``, where ``S_k`` counts slots (inclusive) until the
link has had enough successful accesses to drain the queue up to the end of
the policy. The next policy is enqueued at ``d_k + K + 1``, so the
inter-delivery time is ``L = K + S``. Sampled at a uniformly random slot,

    tau = (S_prev - 1) + A,

with ``A`` the equilibrium age inside the current inter-delivery interval,
``P(A > u) = E[(L - u - 1)^+] / E[L]``.

Bounds used for the dominating variable:

* ``S <= S_bar`` in distribution, ``S_bar`` = slots to ``f_max`` successes
  (negative binomial), ``f_max = ceil((policy_bits + K * tuple_bits) / budget)``
  because at most one tuple phase of backlog sits ahead of a policy.
* ``E[L] >= K + f_min`` with ``f_min = ceil(policy_bits / budget)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .errors import ConfigurationError, InsufficientDataError

_TAIL_EPS = 1e-15


def completion_slots_pmf(fragments: int, p: float, tail_eps: float = _TAIL_EPS) -> np.ndarray:
    """pmf of the number of slots needed for ``fragments`` successes at access prob ``p``.

    Index ``s`` of the returned array is ``P(S = s)``; entries below ``fragments`` are 0.
    """
    if fragments < 0 or not 0.0 < p <= 1.0:
        raise ConfigurationError("need fragments >= 0 and 0 < p <= 1")
    if fragments == 0:
        return np.array([1.0])
    if p == 1.0:
        pmf = np.zeros(fragments + 1)
        pmf[fragments] = 1.0
        return pmf
    failures = stats.nbinom(fragments, p)
    upper = int(failures.isf(tail_eps)) + 1
    pmf = np.zeros(fragments + upper + 1)
    pmf[fragments:] = failures.pmf(np.arange(upper + 1))
    return pmf


def _sum_pmf(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)


def _tail_from_pmf(pmf: np.ndarray) -> np.ndarray:
    """``tail[m] = P(X > m)`` for ``m = 0..len(pmf)-1``."""
    cdf = np.cumsum(pmf)
    return np.clip(1.0 - cdf, 0.0, 1.0)


@dataclass(frozen=True)
class PolicyAoiBound:
    """Dominating distribution for the pooled policy AoI ``tau_ij(n)``."""

    pmf: np.ndarray
    f_min: int
    f_max: int
    cycle_tuples: int

    def tail(self, m) -> np.ndarray:
        """``P(tau_bar > m)`` for integer ``m >= 0`` (0 beyond the support)."""
        tail = _tail_from_pmf(self.pmf)
        m = np.asarray(m, dtype=np.int64)
        return np.where(m < tail.size, tail[np.minimum(m, tail.size - 1)], 0.0)

    def moment(self, q: float) -> float:
        support = np.arange(self.pmf.size, dtype=np.float64)
        return float(np.sum(self.pmf * support ** q))


def policy_aoi_bound(access_prob: float, policy_bits: int, tuple_bits: int, budget_bits: int,
                     tuples_per_cycle: int) -> PolicyAoiBound:
    if policy_bits <= 0:
        raise ConfigurationError("policy messages must have a positive size for the AoI bound")
    k = tuples_per_cycle
    f_min = math.ceil(policy_bits / budget_bits)
    f_max = math.ceil((policy_bits + k * tuple_bits) / budget_bits)
    s_bar = completion_slots_pmf(f_max, access_prob)
    # S_bar - 1
    prev = s_bar[1:]
    # L_bar = K + S_bar; P(A > u) <= E[(L_bar - u - 1)^+] / (K + f_min)
    l_support = k + np.arange(s_bar.size)
    u = np.arange(l_support[-1] + 1)
    excess = np.maximum(l_support[None, :] - u[:, None] - 1, 0) @ s_bar
    age_tail = np.minimum(1.0, excess / (k + f_min))
    age_pmf = np.clip(-np.diff(np.concatenate([[1.0], age_tail])), 0.0, None)
    pmf = _sum_pmf(prev, age_pmf)
    return PolicyAoiBound(pmf / pmf.sum(), f_min, f_max, k)


@dataclass(frozen=True)
class DominanceReport:
    dominated: bool
    worst_margin: float
    worst_at: int
    epsilon: float
    n_samples: int
    level: float


def dkw_epsilon(n: int, level: float = 0.99) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band at confidence ``level``."""
    return math.sqrt(math.log(2.0 / (1.0 - level)) / (2.0 * n))


def dominance_check(samples, bound: Callable[[np.ndarray], np.ndarray] | PolicyAoiBound,
                    level: float = 0.99, min_samples: int = 1000) -> DominanceReport:
    """Compare the empirical ccdf of ``samples`` with a candidate tail ``P(X_bar > m)``.

    Dominated iff ``ccdf_hat(m) <= tail(m) + eps`` for every ``m`` in the
    sample range, ``eps`` the DKW half-width. ``worst_margin`` is the smallest
    ``tail(m) + eps - ccdf_hat(m)`` (negative when not dominated).
    """
    x = np.asarray(samples, dtype=np.int64).ravel()
    if x.size < min_samples:
        raise InsufficientDataError(f"need at least {min_samples} samples, got {x.size}")
    if np.any(x < 0):
        raise ConfigurationError("AoI samples must be non-negative")
    tail_fn = bound.tail if isinstance(bound, PolicyAoiBound) else bound
    m = np.arange(int(x.max()) + 1)
    counts = np.bincount(x, minlength=m.size)
    ccdf = 1.0 - np.cumsum(counts) / x.size
    eps = dkw_epsilon(x.size, level)
    margin = np.asarray(tail_fn(m), dtype=np.float64) + eps - ccdf
    k = int(np.argmin(margin))
    return DominanceReport(bool(margin[k] >= 0.0), float(margin[k]), k, eps, int(x.size), level)
