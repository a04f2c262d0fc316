"""Per-agent actor-critic learners and the 3DPG / MADDPG minibatch update.

Critic input is ``[s, a^1, ..., a^D]`` where ``s`` concatenates every agent's
observation; agent ``i``'s actor sees only its own observation slice.

All gradient functions return ascent directions: the update is
``theta += alpha(n) * grad`` and ``phi += beta(n) * grad``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import nn
from .errors import ConfigurationError, DataCorruptionError, PolicyNotInitializedError
from .noise import OuNoise
from .replay import Batch, GlobalTransition, ReplayBuffer
from .schedules import DEFAULT_STEP_SIZES, StepSizes


class Algo(str, enum.Enum):
    THREE_DPG = "3dpg"
    MADDPG = "maddpg"


@dataclass(frozen=True)
class Layout:
    """Observation and action dimensions of every agent, in agent order."""

    obs_dims: tuple[int, ...]
    action_dims: tuple[int, ...]
    action_bounds: tuple[np.ndarray, ...]

    @classmethod
    def homogeneous(cls, num_agents: int, obs_dim: int, action_bounds) -> "Layout":
        bounds = np.asarray(action_bounds, dtype=np.float64)
        return cls((obs_dim,) * num_agents, (bounds.shape[0],) * num_agents, (bounds,) * num_agents)

    @property
    def num_agents(self) -> int:
        return len(self.obs_dims)

    @property
    def state_dim(self) -> int:
        return sum(self.obs_dims)

    @property
    def joint_action_dim(self) -> int:
        return sum(self.action_dims)

    @property
    def critic_input_dim(self) -> int:
        return self.state_dim + self.joint_action_dim

    def obs_slice(self, agent: int) -> slice:
        start = sum(self.obs_dims[:agent])
        return slice(start, start + self.obs_dims[agent])

    def action_slice(self, agent: int) -> slice:
        start = sum(self.action_dims[:agent])
        return slice(start, start + self.action_dims[agent])


@dataclass(frozen=True)
class AgentLearner:
    agent: int
    algo: Algo
    layout: Layout
    actor: nn.MlpParams
    critic: nn.MlpParams
    actor_target: nn.MlpParams
    critic_target: nn.MlpParams

    def __post_init__(self):
        lay = self.layout
        if self.actor.input_dim != lay.obs_dims[self.agent] or self.actor.output_dim != lay.action_dims[self.agent]:
            raise ConfigurationError("actor dims do not match the agent's observation/action dims")
        if self.critic.input_dim != lay.critic_input_dim or self.critic.output_dim != 1:
            raise ConfigurationError(f"critic input must be {lay.critic_input_dim} -> 1")
        if self.actor_target.shape != self.actor.shape or self.critic_target.shape != self.critic.shape:
            raise ConfigurationError("target networks must share the online network shapes")

    @property
    def bounds(self) -> np.ndarray:
        return self.layout.action_bounds[self.agent]


def make_learner(agent: int, layout: Layout, rng: np.random.Generator, algo=Algo.THREE_DPG,
                 actor_hidden: Sequence[int] = (64, 8), critic_hidden: Sequence[int] = (128, 32),
                 actor: nn.MlpParams | None = None) -> AgentLearner:
    actor_shape = nn.build_shape(layout.obs_dims[agent], actor_hidden, layout.action_dims[agent],
                                 output_activation=nn.Activation.TANH)
    critic_shape = nn.build_shape(layout.critic_input_dim, critic_hidden, 1)
    if actor is None:
        actor = nn.init_params(actor_shape, rng)
    critic = nn.init_params(critic_shape, rng)
    return AgentLearner(agent, Algo(algo), layout, actor, critic, actor, critic)


class PolicyCache:
    """Latest known actor parameters of each peer and the step they originate from.

    Updates with an origin step that is not strictly newer are discarded, so
    the cache never moves backward.
    """

    def __init__(self, owner: int | None = None):
        self.owner = owner
        self._entries: dict[int, tuple[nn.MlpParams, int]] = {}

    def __contains__(self, peer: int) -> bool:
        return peer in self._entries

    def peers(self) -> list[int]:
        return sorted(self._entries)

    def seed(self, peer: int, params: nn.MlpParams, origin_step: int = 0) -> None:
        self._entries[peer] = (params, origin_step)

    def update(self, peer: int, params: nn.MlpParams, origin_step: int) -> bool:
        current = self._entries.get(peer)
        if current is not None and origin_step <= current[1]:
            return False
        self._entries[peer] = (params, origin_step)
        return True

    def params(self, peer: int) -> nn.MlpParams:
        try:
            return self._entries[peer][0]
        except KeyError:
            raise PolicyNotInitializedError(f"no policy cached for peer {peer}") from None

    def origin_step(self, peer: int) -> int:
        try:
            return self._entries[peer][1]
        except KeyError:
            raise PolicyNotInitializedError(f"no policy cached for peer {peer}") from None

    def age(self, peer: int, n: int) -> int:
        """tau_ij(n) = n - origin step of the cached policy."""
        return n - self.origin_step(peer)

    def snapshot(self) -> dict[int, tuple[nn.MlpParams, int]]:
        return dict(self._entries)

    @classmethod
    def fresh(cls, actors: Sequence[nn.MlpParams], owner: int | None = None, n: int = 0) -> "PolicyCache":
        cache = cls(owner)
        for j, actor in enumerate(actors):
            if j != owner:
                cache.seed(j, actor, n)
        return cache


PeerPolicies = PolicyCache | Mapping[int, nn.MlpParams]


def _peer_params(peers: PeerPolicies, j: int) -> nn.MlpParams:
    if isinstance(peers, PolicyCache):
        return peers.params(j)
    try:
        return peers[j]
    except KeyError:
        raise PolicyNotInitializedError(f"no policy cached for peer {j}") from None


def _policy_joint_action(learner: AgentLearner, peers: PeerPolicies, states: np.ndarray,
                         own_actor: nn.MlpParams, stored_actions: np.ndarray | None = None):
    """Fill every action slot; returns ``(joint_action, own_tape)``.

    Peer slots come from cached peer policies, or from ``stored_actions`` when
    given (MADDPG). The own slot always comes from ``own_actor``.
    """
    lay = learner.layout
    parts = []
    own_tape = None
    for j in range(lay.num_agents):
        obs = states[:, lay.obs_slice(j)]
        if j == learner.agent:
            a, own_tape = nn.actor_forward_tape(own_actor, obs, lay.action_bounds[j])
        elif stored_actions is not None:
            a = stored_actions[:, lay.action_slice(j)]
        else:
            a = nn.actor_forward(_peer_params(peers, j), obs, lay.action_bounds[j])
        parts.append(a)
    return np.concatenate(parts, axis=1), own_tape


def critic_batch_gradient(learner: AgentLearner, peers: PeerPolicies, batch: Batch,
                          gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean over the batch of ``grad_theta Q(s, a) * delta``; also returns the TD errors.

    The bootstrap uses the target critic and the product policy built from
    the agent's own target actor and the peers' cached actors.
    """
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError("gamma must lie in (0, 1)")
    m = len(batch)
    next_actions, _ = _policy_joint_action(learner, peers, batch.next_states, learner.actor_target)
    q_next, _ = nn.forward(learner.critic_target, np.concatenate([batch.next_states, next_actions], axis=1))
    target = batch.rewards + gamma * q_next[:, 0]
    q, tape = nn.forward(learner.critic, np.concatenate([batch.states, batch.actions], axis=1))
    delta = target - q[:, 0]
    grad, _ = nn.backward(learner.critic, tape, delta[:, None])
    return grad / m, delta


def _actor_gradient(learner: AgentLearner, peers: PeerPolicies, states: np.ndarray,
                    stored_actions: np.ndarray | None) -> np.ndarray:
    lay = learner.layout
    m = states.shape[0]
    joint, own_tape = _policy_joint_action(learner, peers, states, learner.actor, stored_actions)
    q, tape = nn.forward(learner.critic, np.concatenate([states, joint], axis=1))
    _, input_grad = nn.backward(learner.critic, tape, np.ones_like(q))
    own = lay.action_slice(learner.agent)
    dq_da = input_grad[:, lay.state_dim + own.start: lay.state_dim + own.stop]
    return nn.actor_backward(learner.actor, own_tape, dq_da, learner.bounds) / m


def actor_batch_gradient_3dpg(learner: AgentLearner, peers: PeerPolicies, states: np.ndarray) -> np.ndarray:
    return _actor_gradient(learner, peers, np.atleast_2d(states), None)


def actor_batch_gradient_maddpg(learner: AgentLearner, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    states = np.atleast_2d(states)
    actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
    if actions.shape != (states.shape[0], learner.layout.joint_action_dim):
        raise DataCorruptionError(
            f"stored actions have shape {actions.shape}, expected {(states.shape[0], learner.layout.joint_action_dim)}")
    return _actor_gradient(learner, {}, states, actions)


# single-sample forms ----------------------------------------------------------

def critic_sample_gradient(learner: AgentLearner, aged_policies: PeerPolicies,
                           t: GlobalTransition, gamma: float) -> np.ndarray:
    grad, _ = critic_batch_gradient(learner, aged_policies, Batch.from_transitions([t]), gamma)
    return grad


def actor_sample_gradient_3dpg(learner: AgentLearner, aged_policies: PeerPolicies, s_m) -> np.ndarray:
    return actor_batch_gradient_3dpg(learner, aged_policies, np.asarray(s_m, dtype=np.float64)[None, :])


def actor_sample_gradient_maddpg(learner: AgentLearner, s_m, peer_actions) -> np.ndarray:
    """``peer_actions``: the stored joint action vector, or a mapping ``peer -> action``."""
    lay = learner.layout
    if isinstance(peer_actions, Mapping):
        joint = np.zeros(lay.joint_action_dim)
        for j in range(lay.num_agents):
            if j == learner.agent:
                continue
            if j not in peer_actions:
                raise DataCorruptionError(f"missing stored action of peer {j}")
            a = np.asarray(peer_actions[j], dtype=np.float64)
            if a.shape != (lay.action_dims[j],):
                raise DataCorruptionError(f"peer {j} action has shape {a.shape}, expected ({lay.action_dims[j]},)")
            joint[lay.action_slice(j)] = a
    else:
        joint = np.asarray(peer_actions, dtype=np.float64)
        if joint.shape != (lay.joint_action_dim,):
            raise DataCorruptionError(f"joint action has shape {joint.shape}, expected ({lay.joint_action_dim},)")
    return actor_batch_gradient_maddpg(learner, np.asarray(s_m, dtype=np.float64)[None, :], joint[None, :])


# update -----------------------------------------------------------------------

def soft_update(target: nn.MlpParams, online: nn.MlpParams, tau: float) -> nn.MlpParams:
    if tau == 1.0:
        return online
    return target.replace((1.0 - tau) * target.values + tau * online.values)


def apply_update(learner: AgentLearner, critic_grad: np.ndarray, actor_grad: np.ndarray,
                 alpha: float, beta: float, tau_soft: float) -> AgentLearner:
    critic = learner.critic.replace(nn.ensure_finite(learner.critic.values + alpha * critic_grad, "critic"))
    actor = learner.actor.replace(nn.ensure_finite(learner.actor.values + beta * actor_grad, "actor"))
    return replace(learner, actor=actor, critic=critic,
                   actor_target=soft_update(learner.actor_target, actor, tau_soft),
                   critic_target=soft_update(learner.critic_target, critic, tau_soft))


def batch_update(learner: AgentLearner, batch: Batch, aged_policies: PeerPolicies, n: int,
                 gamma: float, tau_soft: float, step_sizes: StepSizes = DEFAULT_STEP_SIZES) -> AgentLearner:
    """One iteration on an already-drawn minibatch.

    Both gradients are evaluated at the current ``(theta_n, phi_n)`` before
    either is applied.
    """
    critic_grad, _ = critic_batch_gradient(learner, aged_policies, batch, gamma)
    if learner.algo is Algo.THREE_DPG:
        actor_grad = actor_batch_gradient_3dpg(learner, aged_policies, batch.states)
    else:
        actor_grad = actor_batch_gradient_maddpg(learner, batch.states, batch.actions)
    return apply_update(learner, critic_grad, actor_grad,
                        step_sizes.alpha(n), step_sizes.beta(n), tau_soft)


def train_step(learner: AgentLearner, buffer: ReplayBuffer, aged_policies: PeerPolicies, n: int,
               m: int, gamma: float, tau_soft: float, rng: np.random.Generator,
               step_sizes: StepSizes = DEFAULT_STEP_SIZES) -> AgentLearner | None:
    """Sample ``m`` transitions and apply one update; ``None`` if the buffer holds fewer than ``m``."""
    if len(buffer) < m:
        return None
    batch = buffer.sample(m, rng)
    return batch_update(learner, batch, aged_policies, n, gamma, tau_soft, step_sizes)


def act(learner: AgentLearner, obs, noise: OuNoise | None = None) -> np.ndarray:
    lo, hi = nn.check_bounds(learner.bounds)
    action = nn.actor_forward(learner.actor, obs, learner.bounds)
    if noise is not None:
        action = action + noise.sample() * (hi - lo) / 2.0
    return np.clip(action, lo, hi)
