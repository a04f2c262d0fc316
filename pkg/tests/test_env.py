from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threedpg import env as E
from threedpg.errors import ActionBoundsError, ConfigurationError

COORD = E.EnvConfig()
SPREAD = E.EnvConfig(variant="spread")


def _brute_spread(state):
    total = 0.0
    for lx, ly in state.landmarks:
        total += min(math.hypot(px - lx, py - ly) for px, py in state.positions)
    return math.exp(-total / len(state.landmarks))


def _state(positions, orientations, landmarks):
    return E.GlobalState(np.array(positions, float), np.array(orientations, float), np.array(landmarks, float))


def test_reset_is_seeded_and_in_domain():
    a = E.env_reset(COORD, seed=5)
    b = E.env_reset(COORD, seed=5)
    assert a == b
    assert a != E.env_reset(COORD, seed=6)
    assert np.all(np.abs(a.positions) <= 1) and np.all(np.abs(a.landmarks) <= 1)
    assert np.all((a.orientations >= 0) & (a.orientations < 2 * math.pi))


def test_reset_coordinates_are_centred():
    rng = np.random.default_rng(0)
    pos, lms = [], []
    for _ in range(10_000):
        s = E.env_reset(COORD, rng=rng)
        pos.append(s.positions)
        lms.append(s.landmarks)
    assert np.all(np.abs(np.mean(pos, axis=0)) <= 0.02)
    assert np.all(np.abs(np.mean(lms, axis=0)) <= 0.02)


def test_zero_action_keeps_state():
    s = E.env_reset(COORD, seed=1)
    nxt, _ = E.env_step(COORD, s, np.zeros((2, 3)))
    assert nxt == s


def test_position_is_clamped():
    s = _state([[0.99, 0.0], [0.0, 0.0]], [0.0, 0.0], [[0.5, 0.5]] * 3)
    nxt, _ = E.env_step(COORD, s, [[0.1, 0.0, 0.0], [0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(nxt.positions[0], [1.0, 0.0])


def test_out_of_bounds_action_is_rejected():
    s = E.env_reset(COORD, seed=1)
    with pytest.raises(ActionBoundsError):
        E.env_step(COORD, s, [[0.2, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(ActionBoundsError):
        E.env_step(COORD, s, [[0.0, 0.0, 0.3], [0.0, 0.0, 0.0]])


def test_random_walk_stays_in_box():
    rng = np.random.default_rng(2)
    s = E.env_reset(COORD, rng=rng)
    bounds = COORD.action_bounds
    for _ in range(1000):
        a = rng.uniform(bounds[:, 0], bounds[:, 1], size=(2, 3))
        s, rewards = E.env_step(COORD, s, a)
        assert np.all(np.abs(s.positions) <= 1.0)
        assert np.all((s.orientations >= 0) & (s.orientations < 2 * math.pi))
        assert 0.0 < rewards[0] <= 1.0


def test_spread_reward_examples():
    assert E.reward_spread(_state([[0.3, -0.2], [0.1, 0.9]], [0, 0], [[0.1, 0.9], [0.3, -0.2]])) == 1.0
    one = _state([[0.0, 0.0]], [0.0], [[1.0, 0.0]])
    assert E.reward_spread(one) == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert E.reward_spread(one) == pytest.approx(0.36787944117144233, rel=1e-15)


def test_spread_reward_matches_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(200):
        s = E.env_reset(COORD, rng=rng)
        assert E.reward_spread(s) == pytest.approx(_brute_spread(s), rel=1e-13)


def test_coord_reward_examples():
    s = E.env_reset(COORD, seed=3)
    same = _state(s.positions, [1.2, 1.2], s.landmarks)
    assert E.reward_coord(same) == E.reward_spread(same)
    opposite = _state(s.positions, [0.0, math.pi], s.landmarks)
    assert E.reward_coord(opposite) == pytest.approx(E.reward_spread(opposite) * math.exp(-math.pi), rel=1e-12)
    assert math.exp(-math.pi) == pytest.approx(0.0432139, abs=1e-7)


def test_angle_difference_wraps():
    assert E.angle_difference(0.1, 2 * math.pi - 0.1) == pytest.approx(0.2, abs=1e-12)


@given(st.floats(0, 2 * math.pi, exclude_max=True), st.floats(0, 2 * math.pi, exclude_max=True))
def test_angle_difference_is_symmetric_and_bounded(a, b):
    d = E.angle_difference(a, b)
    assert d == E.angle_difference(b, a)
    assert 0.0 <= d <= math.pi


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_coord_reward_at_most_spread(seed):
    s = E.env_reset(COORD, seed=seed)
    rc, rs = E.reward_coord(s), E.reward_spread(s)
    assert 0.0 < rc <= rs <= 1.0
    if E.angle_difference(*s.orientations) > 0:
        assert rc < rs


def test_observation_layout_and_dimension():
    s = _state([[0.2, 0.1], [-0.5, 0.4]], [0.3, 2.0], [[0.2, 0.1], [1.0, -1.0], [0.0, 0.0]])
    o = E.observe(s, 0)
    assert o.size == COORD.obs_dim == 2 * 3 + 2 * 1 + 2
    np.testing.assert_array_equal(o[:2], [0.0, 0.0])          # agent sits on landmark 0
    np.testing.assert_allclose(o[6:8], [-0.7, 0.3])          # displacement to agent 1
    np.testing.assert_array_equal(o[8:], [math.cos(0.3), math.sin(0.3)])
    with pytest.raises(ConfigurationError):
        E.observe(s, 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_observation_is_translation_invariant(seed, dx, dy):
    s = E.env_reset(COORD, seed=seed)
    shift = np.array([dx, dy])
    moved = E.GlobalState(s.positions + shift, s.orientations, s.landmarks + shift)
    for i in range(2):
        np.testing.assert_allclose(E.observe(moved, i), E.observe(s, i), atol=1e-12)


def test_step_is_deterministic_and_reward_uses_next_state():
    s = E.env_reset(COORD, seed=9)
    a = np.array([[0.05, -0.02, 0.1], [-0.1, 0.1, -0.25]])
    n1, r1 = E.env_step(COORD, s, a)
    n2, r2 = E.env_step(COORD, s, a)
    assert n1 == n2 and r1 == r2
    assert r1 == [E.reward_coord(n1)] * 2


def test_reward_from_encoding_is_bitwise_equal():
    rng = np.random.default_rng(12)
    for cfg in (COORD, SPREAD, E.EnvConfig(num_agents=3, num_landmarks=2)):
        states = [E.env_reset(cfg, rng=rng) for _ in range(64)]
        enc = np.stack([E.encode_state(s) for s in states])
        batched = E.reward_from_encoding(enc, cfg)
        strided = E.reward_from_encoding(np.repeat(enc, 2, axis=0)[::2], cfg)
        direct = [E.reward_coord(s) if cfg.variant == "coord" else E.reward_spread(s) for s in states]
        assert batched.tolist() == direct
        assert strided.tolist() == direct
        assert [float(E.reward_from_encoding(e, cfg)) for e in enc] == direct


def test_env_rewards_equal_encoded_rewards_along_trajectories():
    rng = np.random.default_rng(1)
    world = E.ParticleEnv(COORD)
    world.reset(rng)
    bounds = COORD.action_bounds
    for _ in range(300):
        r = world.step(rng.uniform(bounds[:, 0], bounds[:, 1], size=(2, 3)))
        assert float(E.reward_from_encoding(np.concatenate(world.observations()), COORD)) == r[0]


def test_heading_mode_follows_movement():
    cfg = E.EnvConfig(orientation_mode="heading")
    assert cfg.action_dim == 2
    s = _state([[0.0, 0.0], [0.5, 0.5]], [1.0, 2.0], [[0.0, 0.0]] * 3)
    nxt, _ = E.env_step(cfg, s, [[0.0, 0.1], [0.0, 0.0]])
    assert nxt.orientations[0] == pytest.approx(math.pi / 2)
    assert nxt.orientations[1] == 2.0


def test_config_validation():
    with pytest.raises(ConfigurationError):
        E.EnvConfig(variant="tag")
    with pytest.raises(ConfigurationError):
        E.EnvConfig(num_landmarks=0)
