"""Seeded experiment loop for centralized and networked training.

Per slot: observe -> act (OU noise) -> env step -> store (centralized) or
hand tuples to the network simulator (networked) -> one train step per agent.
Every artifact is a function of ``(config, seed)`` only; wall-clock time goes
to ``timing.csv`` so that ``metrics.csv`` stays byte-reproducible.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import env as envmod
from .config import Mode, RunConfig, dump_config
from .diagnostics import staleness_gradient_error
from .errors import StabilityViolation, ThreeDPGError
from .learner import AgentLearner, Layout, PolicyCache, act, make_learner, train_step
from .netsim import AoiTracker, NetworkSimulator
from .noise import OuNoise
from .replay import GlobalTransition, ReplayBuffer

log = logging.getLogger(__name__)

METRICS_SCHEMA = "threedpg.metrics/1"
AOI_SCHEMA = "threedpg.aoi/1"


class BookkeepingError(ThreeDPGError, AssertionError):
    pass


@dataclass
class SeedStreams:
    env: np.random.Generator
    init: np.random.Generator
    channel: np.random.Generator
    noise: list[np.random.Generator]
    sample: list[np.random.Generator]


def seed_streams(seed: int, num_agents: int) -> SeedStreams:
    root = np.random.SeedSequence(seed)
    env_s, init_s, chan_s, noise_s, sample_s = root.spawn(5)
    gen = np.random.default_rng
    return SeedStreams(gen(env_s), gen(init_s), gen(chan_s),
                       [gen(s) for s in noise_s.spawn(num_agents)],
                       [gen(s) for s in sample_s.spawn(num_agents)])


def metrics_columns(num_agents: int) -> list[str]:
    return (["epoch", "mean_reward"] + [f"reward_{i + 1}" for i in range(num_agents)]
            + ["aoi_max", "aoi_mean", "delta_max", "actor_norm", "critic_norm",
               "grad_err_critic", "grad_err_actor", "train_steps"])


@dataclass
class SeedResult:
    seed: int
    rows: list[dict] = field(default_factory=list)
    tracker: AoiTracker | None = None
    learners: list[AgentLearner] = field(default_factory=list)
    buffers: list[ReplayBuffer] = field(default_factory=list)
    wall_ms: list[int] = field(default_factory=list)
    status: str = "ok"
    reason: str = ""

    def mean_rewards(self) -> np.ndarray:
        return np.array([row["mean_reward"] for row in self.rows])


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _audit_replay(config: RunConfig, buffers, tracker: AoiTracker, n: int) -> None:
    for i, buf in enumerate(buffers):
        recorded = tracker.delta[i][-1]
        if len(buf) == 0:
            if recorded != -1:
                raise BookkeepingError(f"agent {i}: empty buffer but Delta recorded as {recorded}")
            continue
        oldest = min(int(o) for o in buf.origins[: len(buf)])
        if recorded != n - oldest:
            raise BookkeepingError(f"agent {i}: Delta {recorded} != {n} - {oldest}")
        if config.mode is Mode.CENTRALIZED and recorded > config.hyper.replay_size:
            raise BookkeepingError(f"agent {i}: Delta {recorded} exceeds replay size")


def run_seed(config: RunConfig, seed: int, layout: Layout | None = None) -> SeedResult:
    ecfg, hyp = config.env, config.hyper
    d = ecfg.num_agents
    layout = layout or Layout.homogeneous(d, ecfg.obs_dim, ecfg.action_bounds)
    streams = seed_streams(seed, d)
    step_sizes = hyp.schedules.step_sizes()
    learners = [make_learner(i, layout, streams.init, config.algo, hyp.actor_hidden, hyp.critic_hidden)
                for i in range(d)]
    noises = [OuNoise(layout.action_dims[i], streams.noise[i], hyp.ou.theta, hyp.ou.sigma, hyp.ou.dt)
              for i in range(d)]
    buffers = [ReplayBuffer(hyp.replay_size, layout.state_dim, layout.joint_action_dim) for _ in range(d)]
    networked = config.mode is Mode.NETWORKED
    net = None
    if networked:
        net = NetworkSimulator(config.network, [l.actor for l in learners], layout.obs_dims,
                               layout.action_dims, lambda enc: float(envmod.reward_from_encoding(enc, ecfg)),
                               streams.channel)
    tracker = AoiTracker(d)
    environment = envmod.ParticleEnv(ecfg)
    result = SeedResult(seed, tracker=tracker)
    n = 0
    try:
        for epoch in range(config.epochs):
            started = time.perf_counter()
            environment.reset(streams.env)
            for i, noise in enumerate(noises):
                noise.reset()
                noise.sigma = hyp.ou.sigma * hyp.ou.sigma_decay ** epoch
            rewards = np.zeros((ecfg.horizon, d))
            grad_errs = []
            trained = 0
            first_slot = len(tracker.slots)
            for k in range(ecfg.horizon):
                obs = environment.observations()
                actions = [act(learners[i], obs[i], noises[i]) for i in range(d)]
                rewards[k] = environment.step(np.stack(actions))
                next_obs = environment.observations()
                actors = [l.actor for l in learners]
                if networked:
                    local = [np.concatenate([obs[i], actions[i], next_obs[i]]) for i in range(d)]
                    for i, transitions in enumerate(net.slot(n, actors, local)):
                        for t in transitions:
                            buffers[i].add(t)
                    views = net.caches
                else:
                    s, a, s2 = np.concatenate(obs), np.concatenate(actions), np.concatenate(next_obs)
                    for i in range(d):
                        buffers[i].add(GlobalTransition(s, a, float(rewards[k, i]), s2, n))
                    views = [PolicyCache.fresh(actors, owner=i, n=n) for i in range(d)]
                tracker.record(n, views, buffers)

                updated = []
                for i in range(d):
                    new = train_step(learners[i], buffers[i], views[i], n, hyp.minibatch, hyp.gamma,
                                     hyp.tau_soft, streams.sample[i], step_sizes)
                    if new is not None:
                        trained += 1
                        if config.diagnostics:
                            fresh = PolicyCache.fresh(actors, owner=i, n=n)
                            grad_errs.append(staleness_gradient_error(
                                learners[i], fresh, views[i], buffers[i].latest(), hyp.gamma))
                    updated.append(new if new is not None else learners[i])
                learners = updated
                for l in learners:
                    if max(l.actor.norm(), l.critic.norm()) > hyp.param_norm_ceiling:
                        raise StabilityViolation(
                            f"agent {l.agent}: parameter norm above {hyp.param_norm_ceiling} at step {n}")
                n += 1

            _audit_replay(config, buffers, tracker, n - 1)
            taus = [v for series in tracker.tau.values() for v in series[first_slot:]]
            deltas = [v for series in tracker.delta.values() for v in series[first_slot:]]
            per_agent = rewards.mean(axis=0)
            row = {"epoch": epoch, "mean_reward": float(rewards.mean())}
            row.update({f"reward_{i + 1}": float(per_agent[i]) for i in range(d)})
            row.update({
                "aoi_max": int(max(taus)) if taus else 0,
                "aoi_mean": float(np.mean(taus)) if taus else 0.0,
                "delta_max": int(max(deltas)),
                "actor_norm": max(l.actor.norm() for l in learners),
                "critic_norm": max(l.critic.norm() for l in learners),
                "grad_err_critic": float(np.mean([e[0] for e in grad_errs])) if grad_errs else None,
                "grad_err_actor": float(np.mean([e[1] for e in grad_errs])) if grad_errs else None,
                "train_steps": trained,
            })
            result.rows.append(row)
            result.wall_ms.append(int(round(1000 * (time.perf_counter() - started))))
    except StabilityViolation as exc:
        log.warning("seed %d aborted: %s", seed, exc)
        result.status, result.reason = "aborted", str(exc)
    result.learners = learners
    result.buffers = buffers
    return result


def write_seed(result: SeedResult, directory: Path, num_agents: int) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    columns = metrics_columns(num_agents)
    with open(directory / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["schema", METRICS_SCHEMA])
        writer.writerow(columns)
        for row in result.rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    with open(directory / "aoi.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["schema", AOI_SCHEMA])
        tracker = result.tracker or AoiTracker(num_agents)
        writer.writerow(tracker.columns())
        writer.writerows(tracker.rows())
    with open(directory / "timing.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "wall_ms"])
        writer.writerows(enumerate(result.wall_ms))
    arrays = {}
    for l in result.learners:
        arrays[f"actor_{l.agent + 1}"] = l.actor.values
        arrays[f"critic_{l.agent + 1}"] = l.critic.values
        arrays[f"actor_target_{l.agent + 1}"] = l.actor_target.values
        arrays[f"critic_target_{l.agent + 1}"] = l.critic_target.values
    np.savez(directory / "final_params.npz", **arrays)
    (directory / "status.json").write_text(
        json.dumps({"seed": result.seed, "status": result.status, "reason": result.reason,
                    "epochs_completed": len(result.rows)}, sort_keys=True) + "\n", encoding="utf-8")


def _run_and_write(args) -> tuple[int, str]:
    config, seed, out = args
    result = run_seed(config, seed)
    write_seed(result, Path(out) / f"seed_{seed}", config.env.num_agents)
    return seed, result.status


def run(config: RunConfig, out_dir, jobs: int = 1) -> dict[int, str]:
    """Run every seed of ``config`` into ``out_dir``; returns ``{seed: status}``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(config, out / "config.yaml")
    tasks = [(config, seed, str(out)) for seed in config.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            statuses = dict(pool.map(_run_and_write, tasks))
    else:
        statuses = dict(_run_and_write(t) for t in tasks)
    return statuses


def run_zero_policy(env_config: envmod.EnvConfig, epochs: int, seed: int) -> np.ndarray:
    """Per-epoch mean reward of agents that never move or turn, on the same layouts."""
    streams = seed_streams(seed, env_config.num_agents)
    environment = envmod.ParticleEnv(env_config)
    zero = np.zeros((env_config.num_agents, env_config.action_dim))
    out = np.zeros(epochs)
    for epoch in range(epochs):
        environment.reset(streams.env)
        out[epoch] = np.mean([environment.step(zero)[0] for _ in range(env_config.horizon)])
    return out
