"""Plain single-agent DDPG, written against the nn primitives only.

Serves as the reference that a one-agent 3DPG learner must reproduce bit for
bit: with no peers, the product policy is just the agent's own actor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .schedules import DEFAULT_STEP_SIZES, StepSizes


@dataclass(frozen=True)
class DdpgState:
    actor: nn.MlpParams
    critic: nn.MlpParams
    actor_target: nn.MlpParams
    critic_target: nn.MlpParams


class DdpgMemory:
    """Minimal ring memory; sampling draws ``rng.integers(0, size, m)`` indices."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: list[tuple] = []
        self._next = 0

    def add(self, s, a, r, s2) -> None:
        item = (np.asarray(s, float), np.asarray(a, float), float(r), np.asarray(s2, float))
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            self.items[self._next] = item
        self._next = (self._next + 1) % self.capacity

    def __len__(self):
        return len(self.items)

    def sample(self, m: int, rng: np.random.Generator):
        idx = rng.integers(0, len(self.items), size=m)
        rows = [self.items[k] for k in idx]
        return (np.stack([r[0] for r in rows]), np.stack([r[1] for r in rows]),
                np.array([r[2] for r in rows]), np.stack([r[3] for r in rows]))


def ddpg_update(state: DdpgState, s, a, r, s2, n: int, bounds, gamma: float, tau: float,
                step_sizes: StepSizes = DEFAULT_STEP_SIZES) -> DdpgState:
    m = s.shape[0]
    a2 = nn.actor_forward(state.actor_target, s2, bounds)
    q2, _ = nn.forward(state.critic_target, np.concatenate([s2, a2], axis=1))
    y = r + gamma * q2[:, 0]
    q, tape = nn.forward(state.critic, np.concatenate([s, a], axis=1))
    critic_grad, _ = nn.backward(state.critic, tape, (y - q[:, 0])[:, None])
    critic_grad = critic_grad / m

    a_pi, actor_tape = nn.actor_forward_tape(state.actor, s, bounds)
    q_pi, tape = nn.forward(state.critic, np.concatenate([s, a_pi], axis=1))
    _, input_grad = nn.backward(state.critic, tape, np.ones_like(q_pi))
    dq_da = input_grad[:, s.shape[1]:]
    actor_grad = nn.actor_backward(state.actor, actor_tape, dq_da, bounds) / m

    critic = state.critic.replace(state.critic.values + step_sizes.alpha(n) * critic_grad)
    actor = state.actor.replace(state.actor.values + step_sizes.beta(n) * actor_grad)
    return DdpgState(
        actor, critic,
        state.actor_target.replace((1.0 - tau) * state.actor_target.values + tau * actor.values),
        state.critic_target.replace((1.0 - tau) * state.critic_target.values + tau * critic.values),
    )


def ddpg_init(obs_dim: int, action_dim: int, rng: np.random.Generator,
              actor_hidden=(64, 8), critic_hidden=(128, 32)) -> DdpgState:
    actor = nn.init_params(nn.build_shape(obs_dim, actor_hidden, action_dim,
                                          output_activation=nn.Activation.TANH), rng)
    critic = nn.init_params(nn.build_shape(obs_dim + action_dim, critic_hidden, 1), rng)
    return DdpgState(actor, critic, actor, critic)


def run_reference_rewards(env_config, hyper, epochs: int, seed: int) -> np.ndarray:
    """Per-epoch mean reward of one DDPG agent trained online in ``env_config``.

    Draws from the same per-seed random streams as the experiment runner, so a
    one-agent centralized 3DPG run must produce identical numbers.
    """
    from . import env as envmod
    from .noise import OuNoise
    from .runner import seed_streams

    if env_config.num_agents != 1:
        raise ValueError("the DDPG reference is single-agent")
    streams = seed_streams(seed, 1)
    bounds = env_config.action_bounds
    lo, hi = bounds[:, 0], bounds[:, 1]
    state = ddpg_init(env_config.obs_dim, env_config.action_dim, streams.init,
                      hyper.actor_hidden, hyper.critic_hidden)
    noise = OuNoise(env_config.action_dim, streams.noise[0], hyper.ou.theta, hyper.ou.sigma, hyper.ou.dt)
    memory = DdpgMemory(hyper.replay_size)
    sizes = hyper.schedules.step_sizes()
    world = envmod.ParticleEnv(env_config)
    out = np.zeros(epochs)
    n = 0
    for epoch in range(epochs):
        world.reset(streams.env)
        noise.reset()
        noise.sigma = hyper.ou.sigma * hyper.ou.sigma_decay ** epoch
        rewards = []
        for _ in range(env_config.horizon):
            obs = world.observations()[0]
            a = nn.actor_forward(state.actor, obs, bounds) + noise.sample() * (hi - lo) / 2.0
            a = np.clip(a, lo, hi)
            r = world.step(a[None, :])[0]
            memory.add(obs, a, r, world.observations()[0])
            rewards.append(r)
            if len(memory) >= hyper.minibatch:
                s, a_b, r_b, s2 = memory.sample(hyper.minibatch, streams.sample[0])
                state = ddpg_update(state, s, a_b, r_b, s2, n, bounds, hyper.gamma, hyper.tau_soft, sizes)
            n += 1
        out[epoch] = np.array(rewards).mean()
    return out
