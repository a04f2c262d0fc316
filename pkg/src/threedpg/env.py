"""Simplified multi-particle environments: simple-spread and orientation coordination.

Agents and landmarks are points in [-1, 1]^2. Each step an agent picks a
displacement in [-0.1, 0.1]^2; in the coordination variant it also steers its
orientation by up to 0.25 rad. Dynamics are deterministic.

Observation layout for agent ``i`` (length ``2L + 2(D-1) + 2``)::

    [landmark_0 - p_i, ..., landmark_{L-1} - p_i,
     p_j - p_i for j != i in increasing j,
     cos(theta_i), sin(theta_i)]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ActionBoundsError, ConfigurationError

TWO_PI = 2.0 * math.pi
MAX_DISPLACEMENT = 0.1
MAX_TURN = 0.25


@dataclass(frozen=True)
class EnvConfig:
    variant: str = "coord"          # "spread" | "coord"
    num_agents: int = 2
    num_landmarks: int = 3
    horizon: int = 25
    seed: int = 0
    # "steer": third action dim turns the agent; "heading": orientation follows movement
    orientation_mode: str = "steer"

    def __post_init__(self):
        if self.variant not in ("spread", "coord"):
            raise ConfigurationError(f"unknown env variant {self.variant!r}")
        if self.orientation_mode not in ("steer", "heading"):
            raise ConfigurationError(f"unknown orientation_mode {self.orientation_mode!r}")
        if self.num_agents < 1 or self.num_landmarks < 1 or self.horizon < 1:
            raise ConfigurationError("num_agents, num_landmarks and horizon must be >= 1")

    @property
    def obs_dim(self) -> int:
        return 2 * self.num_landmarks + 2 * (self.num_agents - 1) + 2

    @property
    def action_dim(self) -> int:
        return 3 if (self.variant == "coord" and self.orientation_mode == "steer") else 2

    @property
    def action_bounds(self) -> np.ndarray:
        bounds = [[-MAX_DISPLACEMENT, MAX_DISPLACEMENT]] * 2
        if self.action_dim == 3:
            bounds.append([-MAX_TURN, MAX_TURN])
        return np.array(bounds)

    @property
    def state_dim(self) -> int:
        """Length of the global state encoding (all observations concatenated)."""
        return self.num_agents * self.obs_dim


@dataclass(frozen=True)
class GlobalState:
    positions: np.ndarray       # (D, 2)
    orientations: np.ndarray    # (D,) in [0, 2pi)
    landmarks: np.ndarray       # (L, 2)

    def __eq__(self, other):
        if not isinstance(other, GlobalState):
            return NotImplemented
        return (np.array_equal(self.positions, other.positions)
                and np.array_equal(self.orientations, other.orientations)
                and np.array_equal(self.landmarks, other.landmarks))

    __hash__ = None


def wrap_angle(theta):
    wrapped = np.mod(theta, TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


def angle_difference_cs(c1, s1, c2, s2):
    """Absolute angular difference in [0, pi] from (cos, sin) pairs."""
    return np.abs(np.arctan2(s1 * c2 - c1 * s2, c1 * c2 + s1 * s2))


def angle_difference(a, b):
    return angle_difference_cs(np.cos(a), np.sin(a), np.cos(b), np.sin(b))


def env_reset(config: EnvConfig, seed=None, rng: np.random.Generator | None = None) -> GlobalState:
    if rng is None:
        rng = np.random.default_rng(config.seed if seed is None else seed)
    positions = rng.uniform(-1.0, 1.0, size=(config.num_agents, 2))
    orientations = rng.uniform(0.0, TWO_PI, size=config.num_agents)
    landmarks = rng.uniform(-1.0, 1.0, size=(config.num_landmarks, 2))
    return GlobalState(positions, wrap_angle(orientations), landmarks)


def _landmark_distances(landmark_disp: np.ndarray) -> np.ndarray:
    # landmark_disp: (..., D, L, 2) displacements landmark - agent
    return np.sqrt(landmark_disp[..., 0] * landmark_disp[..., 0]
                   + landmark_disp[..., 1] * landmark_disp[..., 1])


def _spread_from_disp(landmark_disp: np.ndarray) -> np.ndarray:
    dist = _landmark_distances(landmark_disp)          # (..., D, L)
    closest = dist.min(axis=-2)                        # (..., L)
    return np.exp(-closest.mean(axis=-1))


def _coord_weight(cos_t: np.ndarray, sin_t: np.ndarray) -> np.ndarray:
    # cos_t, sin_t: (..., D); mean pairwise angular difference
    d = cos_t.shape[-1]
    if d < 2:
        return np.ones(cos_t.shape[:-1])
    diffs = [angle_difference_cs(cos_t[..., i], sin_t[..., i], cos_t[..., j], sin_t[..., j])
             for i in range(d) for j in range(i + 1, d)]
    total = diffs[0]
    for extra in diffs[1:]:
        total = total + extra
    return np.exp(-total / len(diffs))


def reward_spread(state: GlobalState) -> float:
    disp = state.landmarks[None, :, :] - state.positions[:, None, :]
    return float(_spread_from_disp(disp))


def _orientation_cs(state: GlobalState) -> tuple[np.ndarray, np.ndarray]:
    # single evaluation point so observations and rewards agree bitwise
    return np.cos(state.orientations), np.sin(state.orientations)


def reward_coord(state: GlobalState) -> float:
    cos_t, sin_t = _orientation_cs(state)
    return reward_spread(state) * float(_coord_weight(cos_t, sin_t))


def observe(state: GlobalState, agent: int) -> np.ndarray:
    d = state.positions.shape[0]
    if not 0 <= agent < d:
        raise ConfigurationError(f"agent id {agent} out of range for {d} agents")
    own = state.positions[agent]
    parts = [(state.landmarks - own).ravel()]
    others = [j for j in range(d) if j != agent]
    if others:
        parts.append((state.positions[others] - own).ravel())
    cos_t, sin_t = _orientation_cs(state)
    parts.append(np.array([cos_t[agent], sin_t[agent]]))
    return np.concatenate(parts)


def encode_state(state: GlobalState) -> np.ndarray:
    return np.concatenate([observe(state, i) for i in range(state.positions.shape[0])])


def reward_from_encoding(encoding, config: EnvConfig) -> np.ndarray:
    """Recompute the shared reward from concatenated observations.

    Works on one encoding or a batch. Uses each agent's own landmark
    displacements and orientation encoding, so the result matches
    :func:`reward_spread` / :func:`reward_coord` bit for bit.
    """
    enc = np.asarray(encoding, dtype=np.float64)
    lead = enc.shape[:-1]
    obs = enc.reshape(*lead, config.num_agents, config.obs_dim)
    disp = obs[..., : 2 * config.num_landmarks].reshape(*lead, config.num_agents, config.num_landmarks, 2)
    reward = _spread_from_disp(disp)
    if config.variant == "coord":
        reward = reward * _coord_weight(obs[..., -2], obs[..., -1])
    return reward


@dataclass
class ParticleEnv:
    config: EnvConfig
    state: GlobalState | None = field(default=None)

    def reset(self, rng: np.random.Generator) -> GlobalState:
        self.state = env_reset(self.config, rng=rng)
        return self.state

    def step(self, action) -> list[float]:
        self.state, rewards = env_step(self.config, self.state, action)
        return rewards

    def observations(self) -> list[np.ndarray]:
        return [observe(self.state, i) for i in range(self.config.num_agents)]


def env_step(config: EnvConfig, state: GlobalState, action) -> tuple[GlobalState, list[float]]:
    """Apply a joint action ``(D, action_dim)``; returns the next state and per-agent rewards.

    Rewards are evaluated on the next state and shared by all agents.
    """
    action = np.asarray(action, dtype=np.float64).reshape(config.num_agents, config.action_dim)
    bounds = config.action_bounds
    if np.any(action < bounds[:, 0]) or np.any(action > bounds[:, 1]) or not np.all(np.isfinite(action)):
        raise ActionBoundsError(f"action outside bounds {bounds.tolist()}: {action.tolist()}")
    disp = action[:, :2]
    positions = np.clip(state.positions + disp, -1.0, 1.0)
    if config.variant == "coord" and config.orientation_mode == "steer":
        orientations = wrap_angle(state.orientations + action[:, 2])
    elif config.variant == "coord":
        moving = np.any(disp != 0.0, axis=1)
        heading = wrap_angle(np.arctan2(disp[:, 1], disp[:, 0]))
        orientations = np.where(moving, heading, state.orientations)
    else:
        orientations = state.orientations.copy()
    nxt = GlobalState(positions, orientations, state.landmarks.copy())
    reward = reward_coord(nxt) if config.variant == "coord" else reward_spread(nxt)
    return nxt, [reward] * config.num_agents
