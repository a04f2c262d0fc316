from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class GlobalTransition:
    """``(s_m, a_m, r^i_m, s_{m+1})`` with ``s`` the concatenated observations."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    origin_step: int


@dataclass(frozen=True)
class Batch:
    states: np.ndarray        # (M, state_dim)
    actions: np.ndarray       # (M, joint_action_dim)
    rewards: np.ndarray       # (M,)
    next_states: np.ndarray   # (M, state_dim)
    origin_steps: np.ndarray  # (M,)

    def __len__(self):
        return self.rewards.shape[0]

    @classmethod
    def from_transitions(cls, transitions) -> "Batch":
        transitions = list(transitions)
        return cls(
            np.stack([t.state for t in transitions]),
            np.stack([t.action for t in transitions]),
            np.array([t.reward for t in transitions], dtype=np.float64),
            np.stack([t.next_state for t in transitions]),
            np.array([t.origin_step for t in transitions], dtype=np.int64),
        )


class ReplayBuffer:
    """FIFO ring of global transitions for one agent.

    ``oldest_origin_step`` is the minimum origin step over stored entries,
    which need not be the entry next in line for eviction when transitions
    arrive out of order over the network.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ConfigurationError("replay capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.origins = np.zeros(capacity, dtype=np.int64)
        self._next = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, t: GlobalTransition) -> None:
        k = self._next
        self.states[k] = t.state
        self.actions[k] = t.action
        self.rewards[k] = t.reward
        self.next_states[k] = t.next_state
        self.origins[k] = t.origin_step
        self._next = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, m: int, rng: np.random.Generator) -> Batch:
        """Uniform with replacement."""
        if self.size == 0:
            raise ConfigurationError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self.size, size=m)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.origins[idx])

    def latest(self) -> GlobalTransition:
        k = (self._next - 1) % self.capacity
        return GlobalTransition(self.states[k].copy(), self.actions[k].copy(), float(self.rewards[k]),
                                self.next_states[k].copy(), int(self.origins[k]))

    @property
    def oldest_origin_step(self) -> int | None:
        if self.size == 0:
            return None
        return int(self.origins[: self.size].min())

    def age_of_oldest(self, n: int) -> int | None:
        """Delta^i(n): ``n`` minus the oldest stored origin step."""
        oldest = self.oldest_origin_step
        return None if oldest is None else n - oldest
