"""Finite-difference oracle for the critic and actor gradients.

Each case draws a small random multi-agent problem, evaluates the analytic
batch gradients from :mod:`threedpg.learner`, and compares them against
central differences of scalar objectives that are rebuilt here directly from
``nn.forward``:

* critic: ``-(1/2M) sum (y - Q(s, a; theta))^2`` with the bootstrap ``y`` frozen,
  whose gradient is the semi-gradient ``mean(delta * grad Q)``;
* 3DPG actor: ``mean Q(s, a(phi))`` with every peer slot filled by that
  peer's policy;
* MADDPG actor: the same with peer slots taken from the stored actions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import nn
from .learner import (AgentLearner, Algo, Layout, actor_batch_gradient_3dpg, actor_batch_gradient_maddpg,
                      critic_batch_gradient)
from .replay import Batch

FD_STEP = 1e-5
REL_FLOOR = 1e-6


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for k in range(x.size):
        up, down = x.copy(), x.copy()
        up[k] += h
        down[k] -= h
        grad[k] = (f(up) - f(down)) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor: float = REL_FLOOR) -> float:
    """Largest per-coordinate ``|a - f| / max(|a|, |f|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    f = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)
    return float(np.max(np.abs(a - f) / scale)) if a.size else 0.0


@dataclass
class GradCase:
    learner: AgentLearner
    peers: dict[int, nn.MlpParams]
    batch: Batch
    gamma: float

    @property
    def n_params(self) -> int:
        return self.learner.actor.size + self.learner.critic.size


def _rand_hidden(rng, max_layers: int, lo: int, hi: int) -> tuple[int, ...]:
    return tuple(int(w) for w in rng.integers(lo, hi + 1, size=rng.integers(1, max_layers + 1)))


def _scaled_init(shape, rng, gain: float) -> nn.MlpParams:
    p = nn.init_params(shape, rng)
    return p.replace(gain * p.values)


def random_case(rng: np.random.Generator, max_params: int = 200, batch_size: int = 4) -> GradCase:
    """A random learner (actor + critic <= ``max_params``), peer policies and minibatch."""
    while True:
        d = int(rng.integers(1, 4))
        obs_dims = tuple(int(v) for v in rng.integers(1, 4, size=d))
        act_dims = tuple(int(v) for v in rng.integers(1, 3, size=d))
        bounds = []
        for k in act_dims:
            lo = rng.uniform(-1.0, 0.0, size=k)
            bounds.append(np.stack([lo, lo + rng.uniform(0.1, 1.5, size=k)], axis=1))
        layout = Layout(obs_dims, act_dims, tuple(bounds))
        agent = int(rng.integers(0, d))
        actor_shape = nn.build_shape(obs_dims[agent], _rand_hidden(rng, 2, 2, 4), act_dims[agent],
                                     output_activation=nn.Activation.TANH)
        critic_shape = nn.build_shape(layout.critic_input_dim, _rand_hidden(rng, 2, 2, 5), 1)
        if nn.param_count(actor_shape) + nn.param_count(critic_shape) <= max_params:
            break
    gain = rng.uniform(0.8, 2.0)
    learner = AgentLearner(agent, Algo.THREE_DPG, layout,
                           _scaled_init(actor_shape, rng, gain), _scaled_init(critic_shape, rng, gain),
                           _scaled_init(actor_shape, rng, gain), _scaled_init(critic_shape, rng, gain))
    peers = {}
    for j in range(d):
        if j != agent:
            shape = nn.build_shape(obs_dims[j], _rand_hidden(rng, 2, 2, 4), act_dims[j],
                                   output_activation=nn.Activation.TANH)
            peers[j] = _scaled_init(shape, rng, gain)
    s = rng.uniform(-1.0, 1.0, size=(batch_size, layout.state_dim))
    actions = np.concatenate([rng.uniform(b[:, 0], b[:, 1], size=(batch_size, b.shape[0])) for b in bounds], axis=1)
    batch = Batch(s, actions, rng.uniform(0.0, 1.0, size=batch_size),
                  rng.uniform(-1.0, 1.0, size=(batch_size, layout.state_dim)), np.zeros(batch_size, dtype=np.int64))
    return GradCase(learner, peers, batch, float(rng.uniform(0.5, 0.99)))


def _joint(case: GradCase, states: np.ndarray, own_actor: nn.MlpParams, stored: np.ndarray | None) -> np.ndarray:
    lay, i = case.learner.layout, case.learner.agent
    cols = []
    for j in range(lay.num_agents):
        obs = states[:, lay.obs_slice(j)]
        if j == i:
            cols.append(nn.actor_forward(own_actor, obs, lay.action_bounds[j]))
        elif stored is not None:
            cols.append(stored[:, lay.action_slice(j)])
        else:
            cols.append(nn.actor_forward(case.peers[j], obs, lay.action_bounds[j]))
    return np.concatenate(cols, axis=1)


def critic_objective(case: GradCase) -> tuple[Callable[[np.ndarray], float], np.ndarray]:
    b, lrn = case.batch, case.learner
    a_next = _joint(case, b.next_states, lrn.actor_target, None)
    q_next, _ = nn.forward(lrn.critic_target, np.concatenate([b.next_states, a_next], axis=1))
    y = b.rewards + case.gamma * q_next[:, 0]
    x = np.concatenate([b.states, b.actions], axis=1)

    def f(theta):
        q, _ = nn.forward(nn.MlpParams(lrn.critic.shape, theta), x)
        return -0.5 * float(np.mean((y - q[:, 0]) ** 2))

    return f, lrn.critic.values


def actor_objective(case: GradCase, stored: np.ndarray | None) -> tuple[Callable[[np.ndarray], float], np.ndarray]:
    lrn, s = case.learner, case.batch.states

    def f(phi):
        joint = _joint(case, s, nn.MlpParams(lrn.actor.shape, phi), stored)
        q, _ = nn.forward(lrn.critic, np.concatenate([s, joint], axis=1))
        return float(np.mean(q))

    return f, lrn.actor.values


def check_case(case: GradCase, h: float = FD_STEP) -> dict[str, float]:
    """Relative errors of the three analytic gradients against central differences."""
    b = case.batch
    critic, _ = critic_batch_gradient(case.learner, case.peers, b, case.gamma)
    actor_3dpg = actor_batch_gradient_3dpg(case.learner, case.peers, b.states)
    actor_maddpg = actor_batch_gradient_maddpg(case.learner, b.states, b.actions)
    out = {}
    for name, analytic, (f, x) in (
        ("critic", critic, critic_objective(case)),
        ("actor_3dpg", actor_3dpg, actor_objective(case, None)),
        ("actor_maddpg", actor_maddpg, actor_objective(case, b.actions)),
    ):
        out[name] = relative_error(analytic, central_difference(f, x, h))
    return out


@dataclass
class GradcheckReport:
    cases: int
    max_error: dict[str, float]
    max_params: int
    seconds: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.max_error.values())

    def summary(self) -> str:
        parts = ", ".join(f"{k}={v:.2e}" for k, v in self.max_error.items())
        return (f"{self.cases} cases (<= {self.max_params} params), max rel err: {parts}; "
                f"{self.seconds:.1f}s; {'PASS' if self.passed else 'FAIL'} at {self.tolerance:g}")


def run_gradcheck(cases: int = 100, seed: int = 0, tolerance: float = 1e-4, max_params: int = 200) -> GradcheckReport:
    rng = np.random.default_rng(seed)
    started = time.perf_counter()
    worst = {"critic": 0.0, "actor_3dpg": 0.0, "actor_maddpg": 0.0}
    largest = 0
    for _ in range(cases):
        case = random_case(rng, max_params)
        largest = max(largest, case.n_params)
        for k, v in check_case(case).items():
            worst[k] = max(worst[k], v)
    return GradcheckReport(cases, worst, largest, time.perf_counter() - started, tolerance)


def onpolicy_gap(case: GradCase) -> float:
    """Max-abs difference of 3DPG and MADDPG actor gradients when stored peer actions are on-policy."""
    stored = _joint(case, case.batch.states, case.learner.actor, None)
    g3 = actor_batch_gradient_3dpg(case.learner, case.peers, case.batch.states)
    gm = actor_batch_gradient_maddpg(case.learner, case.batch.states, stored)
    return float(np.max(np.abs(g3 - gm)))


def run_onpolicy_equivalence(cases: int = 1000, seed: int = 1) -> float:
    rng = np.random.default_rng(seed)
    return max(onpolicy_gap(random_case(rng)) for _ in range(cases))
