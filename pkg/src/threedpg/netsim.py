"""Slotted lossy network: Bernoulli channel access, bit budgets, policy/tuple dissemination.

Each agent owns one broadcast link. In every slot the link gets access with
probability ``lambda``; on success it drains up to ``budget_bits`` from its
FIFO queue, possibly finishing several messages. A failed slot only delays
traffic (nothing is dropped inside a link).

Dissemination cycle per agent: one POLICY_UPDATE, then ``K`` LOCAL_TUPLE
messages, repeat. The policy snapshot is taken at enqueue time. While a
policy transfer is in flight no tuples are allocated; during the tuple phase
each slot allocates the freshly generated tuple. With ``lambda = 1``, 45000
policy bits at 15000 bits/slot and ``K = 33`` this gives a 36-slot period.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import nn
from .errors import ConfigurationError
from .learner import PolicyCache
from .replay import GlobalTransition, ReplayBuffer

BITS_PER_FLOAT = 32
PAPER_POLICY_BITS = 45000
PAPER_TUPLE_BITS = 1363


class MessageKind(str, enum.Enum):
    POLICY_UPDATE = "policy"
    LOCAL_TUPLE = "tuple"


@dataclass(frozen=True, eq=False)
class Message:
    kind: MessageKind
    origin_agent: int
    origin_step: int
    payload: np.ndarray
    size_bits: int

    @property
    def payload_bits(self) -> int:
        return BITS_PER_FLOAT * self.payload.size


@dataclass(frozen=True)
class NetworkConfig:
    access_prob: tuple[float, ...] | float = float(np.exp(-2.0))
    budget_bits: int = 15000
    tuples_per_cycle: int = 33
    force_paper_ratios: bool = False
    quantize_wire: bool = True
    # test-only: every message is 0 bits and every slot carries the fresh policy and tuple
    zero_size_messages: bool = False

    def __post_init__(self):
        probs = self.access_prob if isinstance(self.access_prob, (tuple, list)) else (self.access_prob,)
        for p in probs:
            if not 0.0 < float(p) <= 1.0:
                raise ConfigurationError(f"channel access probability must be in (0, 1], got {p}")
        if self.budget_bits < 1:
            raise ConfigurationError("budget_bits must be >= 1")
        if self.tuples_per_cycle < 0:
            raise ConfigurationError("tuples_per_cycle must be >= 0")

    def lambda_for(self, agent: int) -> float:
        if isinstance(self.access_prob, (tuple, list)):
            return float(self.access_prob[agent])
        return float(self.access_prob)

    def policy_bits(self, n_params: int) -> int:
        if self.zero_size_messages:
            return 0
        return PAPER_POLICY_BITS if self.force_paper_ratios else BITS_PER_FLOAT * n_params

    def tuple_bits(self, tuple_len: int) -> int:
        if self.zero_size_messages:
            return 0
        return PAPER_TUPLE_BITS if self.force_paper_ratios else BITS_PER_FLOAT * tuple_len


class ChannelLink:
    """Unidirectional (broadcast) link with Bernoulli access and a per-slot bit budget."""

    def __init__(self, owner: int, access_prob: float, budget_bits: int):
        if not 0.0 < access_prob <= 1.0:
            raise ConfigurationError(f"access probability must be in (0, 1], got {access_prob}")
        self.owner = owner
        self.access_prob = access_prob
        self.budget_bits = budget_bits
        self.queue: deque[list] = deque()   # [message, remaining_bits]
        self.bits_enqueued = 0
        self.bits_delivered = 0
        self.successes = 0

    @property
    def bits_queued(self) -> int:
        return sum(remaining for _, remaining in self.queue)

    def push(self, message: Message) -> None:
        self.queue.append([message, message.size_bits])
        self.bits_enqueued += message.size_bits

    def transmit(self, success: bool) -> list[Message]:
        """Deliver up to one slot's budget; returns the messages completed in this slot."""
        if not success:
            return []
        self.successes += 1
        budget = self.budget_bits
        done = []
        while self.queue:
            entry = self.queue[0]
            sent = min(budget, entry[1])
            entry[1] -= sent
            budget -= sent
            self.bits_delivered += sent
            if entry[1] > 0:
                break
            done.append(entry[0])
            self.queue.popleft()
        return done


def slot_tick(links: Sequence[ChannelLink], n: int, rng: np.random.Generator) -> dict[int, list[Message]]:
    """Run one slot on every link; returns completed messages keyed by recipient.

    Every link consumes exactly one uniform draw per slot, in link order.
    """
    num = len(links)
    delivered: dict[int, list[Message]] = {link.owner: [] for link in links}
    draws = rng.random(num)
    for link, u in zip(links, draws):
        for message in link.transmit(bool(u < link.access_prob)):
            for peer in delivered:
                if peer != link.owner:
                    delivered[peer].append(message)
    return delivered


class DisseminationSchedule:
    """Position-based cycle ``[POLICY, TUPLE x K]`` for one agent."""

    def __init__(self, agent: int, tuples_per_cycle: int = 33):
        self.agent = agent
        self.k = tuples_per_cycle
        self.position = 0
        self.policy_in_flight = False
        self.last_tuple_step = -1

    def next_kind(self) -> MessageKind:
        return MessageKind.POLICY_UPDATE if self.position == 0 else MessageKind.LOCAL_TUPLE

    def enqueue_schedule(self, n: int, policy: np.ndarray, fresh_tuple: np.ndarray,
                         policy_bits: int, tuple_bits: int) -> Message:
        """Build the next message of the cycle and advance the position."""
        if self.next_kind() is MessageKind.POLICY_UPDATE:
            msg = Message(MessageKind.POLICY_UPDATE, self.agent, n, policy, policy_bits)
            self.policy_in_flight = True
        else:
            if n <= self.last_tuple_step:
                raise ConfigurationError(f"tuple for step {n} is not newer than {self.last_tuple_step}")
            msg = Message(MessageKind.LOCAL_TUPLE, self.agent, n, fresh_tuple, tuple_bits)
            self.last_tuple_step = n
        self.position = (self.position + 1) % (self.k + 1)
        return msg

    def wants_allocation(self) -> bool:
        """Whether this slot allocates a message (policy transfers are stop-and-wait)."""
        return not self.policy_in_flight


class TupleAssembler:
    """Joins local tuples ``(s^j, a^j, s'^j)`` of all agents into global transitions.

    A transition for step ``m`` is emitted once, when every agent's tuple for
    ``m`` is present. Pending steps that can no longer complete (a peer has
    already delivered a newer tuple) are dropped; peers send tuples in
    increasing step order.
    """

    def __init__(self, owner: int, obs_dims: Sequence[int], action_dims: Sequence[int],
                 reward_fn: Callable[[np.ndarray], float]):
        self.owner = owner
        self.obs_dims = tuple(obs_dims)
        self.action_dims = tuple(action_dims)
        self.reward_fn = reward_fn
        self.num_agents = len(self.obs_dims)
        self._pending: dict[int, dict[int, tuple]] = {}
        self._emitted: set[int] = set()
        self._last_seen = [-1] * self.num_agents

    def split(self, agent: int, payload: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        o, a = self.obs_dims[agent], self.action_dims[agent]
        if payload.size != 2 * o + a:
            raise ConfigurationError(f"tuple payload of agent {agent} has {payload.size} values, expected {2 * o + a}")
        return payload[:o], payload[o:o + a], payload[o + a:]

    def add(self, agent: int, step: int, payload: np.ndarray) -> list[GlobalTransition]:
        if step in self._emitted:
            return []
        self._last_seen[agent] = max(self._last_seen[agent], step)
        entry = self._pending.setdefault(step, {})
        entry[agent] = self.split(agent, np.asarray(payload, dtype=np.float64))
        out = []
        if len(entry) == self.num_agents:
            del self._pending[step]
            self._emitted.add(step)
            parts = [entry[j] for j in range(self.num_agents)]
            state = np.concatenate([p[0] for p in parts])
            action = np.concatenate([p[1] for p in parts])
            next_state = np.concatenate([p[2] for p in parts])
            out.append(GlobalTransition(state, action, float(self.reward_fn(next_state)), next_state, step))
        self._prune()
        return out

    def _prune(self) -> None:
        dead = [m for m, entry in self._pending.items()
                if any(j not in entry and self._last_seen[j] >= m for j in range(self.num_agents))]
        for m in dead:
            del self._pending[m]

    @property
    def pending_steps(self) -> list[int]:
        return sorted(self._pending)


@dataclass
class AoiTracker:
    """Per-slot series of tau_ij(n) for all ordered pairs and Delta^i(n) for all agents.

    ``Delta`` is recorded as -1 while a replay buffer is still empty.
    """

    num_agents: int
    slots: list[int] = field(default_factory=list)
    tau: dict[tuple[int, int], list[int]] = field(default_factory=dict)
    delta: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        for i in range(self.num_agents):
            self.delta.setdefault(i, [])
            for j in range(self.num_agents):
                if i != j:
                    self.tau.setdefault((i, j), [])

    def record(self, n: int, caches: Sequence[PolicyCache], buffers: Sequence[ReplayBuffer]) -> None:
        self.slots.append(n)
        for (i, j), series in self.tau.items():
            series.append(caches[i].age(j, n))
        for i, series in self.delta.items():
            age = buffers[i].age_of_oldest(n)
            series.append(-1 if age is None else age)

    def record_values(self, n: int, tau: dict[tuple[int, int], int], delta: dict[int, int]) -> None:
        self.slots.append(n)
        for key, series in self.tau.items():
            series.append(tau[key])
        for i, series in self.delta.items():
            series.append(delta[i])

    def columns(self) -> list[str]:
        return (["slot"] + [f"tau_{i + 1}_{j + 1}" for i, j in self.tau]
                + [f"delta_{i + 1}" for i in self.delta])

    def rows(self, start: int = 0):
        for k in range(start, len(self.slots)):
            yield ([self.slots[k]] + [series[k] for series in self.tau.values()]
                   + [series[k] for series in self.delta.values()])

    def pooled_tau(self) -> np.ndarray:
        if not self.tau:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([np.asarray(s, dtype=np.int64) for s in self.tau.values()])


def aoi_snapshot(tracker: AoiTracker, n: int) -> dict:
    """Exact ages at slot ``n`` (must already be recorded)."""
    try:
        k = tracker.slots.index(n)
    except ValueError:
        raise ConfigurationError(f"slot {n} has not been recorded") from None
    return {
        "tau": {pair: series[k] for pair, series in tracker.tau.items()},
        "delta": {i: series[k] for i, series in tracker.delta.items()},
    }


class NetworkSimulator:
    """All links, schedules, policy caches and tuple assemblers of one networked run.

    Call :meth:`slot` once per environment step, after acting and before
    training. It returns, per agent, the global transitions completed in that
    slot; peers' policies are available from :attr:`caches`.
    """

    def __init__(self, config: NetworkConfig, actors: Sequence[nn.MlpParams],
                 obs_dims: Sequence[int], action_dims: Sequence[int],
                 reward_fn: Callable[[np.ndarray], float], rng: np.random.Generator):
        self.config = config
        self.num_agents = len(actors)
        self.rng = rng
        self.actor_shapes = [a.shape for a in actors]
        self.links = [ChannelLink(i, config.lambda_for(i), config.budget_bits) for i in range(self.num_agents)]
        self.schedules = [DisseminationSchedule(i, config.tuples_per_cycle) for i in range(self.num_agents)]
        # peers start from the shared random initialisation, tau = 0
        self.caches = [PolicyCache.fresh(actors, owner=i, n=0) for i in range(self.num_agents)]
        self.assemblers = [TupleAssembler(i, obs_dims, action_dims, reward_fn) for i in range(self.num_agents)]
        self._policy_bits = [config.policy_bits(a.size) for a in actors]
        self._tuple_bits = [config.tuple_bits(2 * o + a) for o, a in zip(obs_dims, action_dims)]
        self.policies_delivered = 0
        self.tuples_delivered = 0

    def _decode_policy(self, message: Message) -> nn.MlpParams:
        payload = message.payload
        if self.config.quantize_wire:
            payload = payload.astype(np.float32).astype(np.float64)
        return nn.MlpParams(self.actor_shapes[message.origin_agent], payload)

    def slot(self, n: int, actors: Sequence[nn.MlpParams],
             local_tuples: Sequence[np.ndarray]) -> list[list[GlobalTransition]]:
        emitted: list[list[GlobalTransition]] = [[] for _ in range(self.num_agents)]
        for i, payload in enumerate(local_tuples):
            emitted[i].extend(self.assemblers[i].add(i, n, payload))

        for i, sched in enumerate(self.schedules):
            link = self.links[i]
            if self.config.zero_size_messages:
                link.push(Message(MessageKind.POLICY_UPDATE, i, n, actors[i].values, 0))
                link.push(Message(MessageKind.LOCAL_TUPLE, i, n, local_tuples[i], 0))
                continue
            if not sched.wants_allocation():
                continue
            link.push(sched.enqueue_schedule(n, actors[i].values, local_tuples[i],
                                             self._policy_bits[i], self._tuple_bits[i]))

        delivered = slot_tick(self.links, n, self.rng)

        for recipient, messages in delivered.items():
            for message in messages:
                if message.kind is MessageKind.POLICY_UPDATE:
                    self.policies_delivered += 1
                    self.caches[recipient].update(message.origin_agent, self._decode_policy(message),
                                                  message.origin_step)
                else:
                    self.tuples_delivered += 1
                    emitted[recipient].extend(
                        self.assemblers[recipient].add(message.origin_agent, message.origin_step, message.payload))
        for link in self.links:
            # a policy transfer is finished once no policy message remains queued
            sched = self.schedules[link.owner]
            if sched.policy_in_flight and not any(m.kind is MessageKind.POLICY_UPDATE for m, _ in link.queue):
                sched.policy_in_flight = False
        return emitted


def simulate_network_aoi(config: NetworkConfig, num_agents: int, slots: int, seed: int,
                         actor_shape: Sequence[nn.LayerSpec], obs_dim: int, action_dim: int,
                         replay_size: int = 20000, reward_fn: Callable[[np.ndarray], float] | None = None,
                         ) -> tuple[AoiTracker, "NetworkSimulator", list[ReplayBuffer]]:
    """Drive the network alone with frozen policies and placeholder tuples.

    Message sizes and the schedule do not depend on payload values, so the
    AoI process is the same as in a learning run with the same channel seed.
    """
    actor = nn.zero_params(actor_shape)
    actors = [actor] * num_agents
    if reward_fn is None:
        reward_fn = lambda encoding: 0.0  # noqa: E731
    net = NetworkSimulator(config, actors, [obs_dim] * num_agents, [action_dim] * num_agents,
                           reward_fn, np.random.default_rng(seed))
    buffers = [ReplayBuffer(replay_size, num_agents * obs_dim, num_agents * action_dim)
               for _ in range(num_agents)]
    tracker = AoiTracker(num_agents)
    payload = np.zeros(2 * obs_dim + action_dim)
    for n in range(slots):
        emitted = net.slot(n, actors, [payload] * num_agents)
        for i, transitions in enumerate(emitted):
            for t in transitions:
                buffers[i].add(t)
        tracker.record(n, net.caches, buffers)
    return tracker, net, buffers
