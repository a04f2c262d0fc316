from __future__ import annotations

import math

import numpy as np
import pytest

from threedpg import learner as L
from threedpg import nn
from threedpg.aoi import dominance_check, policy_aoi_bound
from threedpg.config import HyperConfig, Mode, OuConfig, RunConfig, ScheduleConfig
from threedpg.diagnostics import staleness_gradient_error
from threedpg.errors import DiagnosticUnavailable
from threedpg.netsim import NetworkConfig, simulate_network_aoi
from threedpg.replay import GlobalTransition
from threedpg.runner import run_seed

UNIT = np.array([[-1.0, 1.0]])


def _scalar_pair(w_peer):
    """Two agents with 1-d observations and actions; linear critic over (s1, s2, a1, a2)."""
    layout = L.Layout((1, 1), (1, 1), (UNIT, UNIT))
    actor = nn.MlpParams((nn.LayerSpec(1, 1, nn.Activation.TANH),), [0.5, 0.0])
    critic = nn.MlpParams((nn.LayerSpec(4, 1, nn.Activation.IDENTITY),), [0.3, -0.2, 0.7, 1.5, 0.1])
    peer = nn.MlpParams((nn.LayerSpec(1, 1, nn.Activation.TANH),), [w_peer, 0.0])
    return L.AgentLearner(0, L.Algo.THREE_DPG, layout, actor, critic, actor, critic), peer


def test_equal_policies_give_zero_error():
    lrn, peer = _scalar_pair(0.8)
    t = GlobalTransition(np.array([0.2, -0.4]), np.array([0.1, 0.3]), 0.5, np.array([0.6, 0.9]), 0)
    assert staleness_gradient_error(lrn, {1: peer}, {1: peer}, t) == (0.0, 0.0)


def test_scalar_error_matches_chain_rule_by_hand():
    lrn, fresh = _scalar_pair(0.8)
    _, aged = _scalar_pair(-0.3)
    s, a, s2, gamma = np.array([0.2, -0.4]), np.array([0.1, 0.3]), np.array([0.6, 0.9]), 0.9
    t = GlobalTransition(s, a, 0.5, s2, 0)
    e_theta, e_phi = staleness_gradient_error(lrn, {1: fresh}, {1: aged}, t, gamma)
    # only the bootstrap term sees the peer policy: delta differs by gamma * c_a2 * (pi_fresh - pi_aged)
    d_delta = gamma * 1.5 * (math.tanh(0.8 * 0.9) - math.tanh(-0.3 * 0.9))
    u = np.array([0.2, -0.4, 0.1, 0.3, 1.0])
    assert e_theta == pytest.approx(abs(d_delta) * np.linalg.norm(u), rel=1e-12)
    # a linear critic's action slope does not depend on the peer action
    assert e_phi == pytest.approx(0.0, abs=1e-15)


def test_maddpg_actor_error_is_zero_and_fresh_policies_required():
    lrn, fresh = _scalar_pair(0.8)
    _, aged = _scalar_pair(-0.3)
    lrn = L.AgentLearner(0, L.Algo.MADDPG, lrn.layout, lrn.actor, lrn.critic, lrn.actor_target, lrn.critic_target)
    t = GlobalTransition(np.zeros(2), np.zeros(2), 0.0, np.ones(2), 0)
    assert staleness_gradient_error(lrn, {1: fresh}, {1: aged}, t)[1] == 0.0
    with pytest.raises(DiagnosticUnavailable):
        staleness_gradient_error(lrn, None, {1: aged}, t)


def test_actor_error_shrinks_with_decaying_steps():
    hyper = HyperConfig(minibatch=16, replay_size=2000, tau_soft=0.05, actor_hidden=(8,), critic_hidden=(16, 8),
                        schedules=ScheduleConfig(scale=20.0, horizon=200.0), ou=OuConfig(sigma=0.3))
    cfg = RunConfig(hyper=hyper, epochs=150, mode=Mode.NETWORKED, diagnostics=True,
                    network=NetworkConfig(access_prob=math.exp(-1)))
    result = run_seed(cfg, 0)
    errors = np.array([row["grad_err_actor"] for row in result.rows])
    assert np.all(np.isfinite(errors)) and errors.max() > 0
    windows = errors.reshape(-1, 25).mean(axis=1)
    assert np.mean(np.diff(windows) <= 0) >= 0.8


def test_centralized_diagnostics_are_zero(tiny_hyper):
    result = run_seed(RunConfig(hyper=tiny_hyper, epochs=2, diagnostics=True), 0)
    assert result.rows[-1]["grad_err_actor"] == 0.0 and result.rows[-1]["grad_err_critic"] == 0.0
    assert run_seed(RunConfig(hyper=tiny_hyper, epochs=1), 0).rows[0]["grad_err_actor"] is None


def test_injected_stalls_break_dominance():
    cfg = NetworkConfig(access_prob=math.exp(-1), force_paper_ratios=True)
    tracker, _, _ = simulate_network_aoi(cfg, 2, 20_000, 3, nn.build_shape(10, (64, 8), 3), 10, 3)
    bound = policy_aoi_bound(cfg.lambda_for(0), 45000, 1363, 15000, 33)
    samples = tracker.pooled_tau()
    assert dominance_check(samples, bound).dominated
    stalled = samples + 60 * (np.arange(samples.size) % 3 == 0)
    report = dominance_check(stalled, bound)
    assert not report.dominated and report.worst_margin < 0
