"""Gradient error caused by using aged peer policies instead of the current ones."""

from __future__ import annotations

import numpy as np

from .errors import DiagnosticUnavailable
from .learner import (Algo, AgentLearner, PeerPolicies, actor_batch_gradient_3dpg,
                      critic_batch_gradient)
from .replay import Batch, GlobalTransition


def staleness_gradient_error(learner: AgentLearner, fresh_policies: PeerPolicies | None,
                             aged_policies: PeerPolicies, sample: GlobalTransition | Batch,
                             gamma: float = 0.9) -> tuple[float, float]:
    """Norms ``(|e_theta|, |e_phi|)`` of fresh-minus-aged critic and actor gradients.

    Needs the peers' true current policies, which only a simulator (or a
    centralized shadow run) has. MADDPG's actor gradient ignores peer
    policies, so its ``e_phi`` is zero.
    """
    if fresh_policies is None:
        raise DiagnosticUnavailable("fresh peer policies are not available in networked mode")
    batch = sample if isinstance(sample, Batch) else Batch.from_transitions([sample])
    fresh_c, _ = critic_batch_gradient(learner, fresh_policies, batch, gamma)
    aged_c, _ = critic_batch_gradient(learner, aged_policies, batch, gamma)
    if learner.algo is Algo.THREE_DPG:
        e_phi = actor_batch_gradient_3dpg(learner, fresh_policies, batch.states) \
            - actor_batch_gradient_3dpg(learner, aged_policies, batch.states)
        e_phi_norm = float(np.linalg.norm(e_phi))
    else:
        e_phi_norm = 0.0
    return float(np.linalg.norm(fresh_c - aged_c)), e_phi_norm
