from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threedpg import nn
from threedpg.errors import ConfigurationError, NonFiniteParameterError, StaleTapeError
from threedpg.gradcheck import central_difference, relative_error


def _phi(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _naive_mlp(shape, values, x):
    """Straight-line loops over the flat parameter vector; no numpy linear algebra."""
    h = [float(v) for v in x]
    k = 0
    for layer in shape:
        w = [[float(values[k + r * layer.input_dim + c]) for c in range(layer.input_dim)]
             for r in range(layer.output_dim)]
        k += layer.input_dim * layer.output_dim
        b = [float(values[k + r]) for r in range(layer.output_dim)]
        k += layer.output_dim
        z = [sum(w[r][c] * h[c] for c in range(layer.input_dim)) + b[r] for r in range(layer.output_dim)]
        if layer.activation is nn.Activation.GELU:
            h = [v * _phi(v) for v in z]
        elif layer.activation is nn.Activation.TANH:
            h = [math.tanh(v) for v in z]
        else:
            h = z
    return np.array(h)


def _random_net(rng, dims, hidden_act=nn.Activation.GELU, out_act=nn.Activation.TANH, gain=1.5):
    shape = nn.build_shape(dims[0], dims[1:-1], dims[-1], hidden_act, out_act)
    p = nn.init_params(shape, rng)
    return p.replace(gain * p.values)


def test_gelu_frozen_values():
    assert nn.gelu(0.0) == 0.0
    assert nn.gelu_prime(0.0) == 0.5
    # x * Phi(x) via math.erf
    assert nn.gelu(1.0) == pytest.approx(0.8413447460685429, rel=1e-15)
    assert nn.gelu(-1.0) == pytest.approx(-0.15865525393145707, rel=1e-14)
    assert nn.gelu_prime(1.0) == pytest.approx(_phi(1.0) + math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-15)


def test_gelu_prime_matches_central_difference_at_one():
    h = 1e-5
    fd = (nn.gelu(1.0 + h) - nn.gelu(1.0 - h)) / (2 * h)
    assert abs(nn.gelu_prime(1.0) - fd) / abs(fd) <= 1e-6


@given(st.floats(min_value=-8.0, max_value=8.0))
def test_gelu_prime_matches_fd_everywhere(x):
    h = 1e-5
    fd = (nn.gelu(x + h) - nn.gelu(x - h)) / (2 * h)
    assert abs(nn.gelu_prime(x) - fd) <= 1e-6 * max(1.0, abs(fd))


def test_gelu_is_not_the_tanh_approximation():
    approx = 0.5 * 1.5 * (1 + math.tanh(math.sqrt(2 / math.pi) * (1.5 + 0.044715 * 1.5 ** 3)))
    assert nn.gelu(1.5) != pytest.approx(approx, abs=1e-6)
    assert nn.gelu(1.5) == pytest.approx(1.5 * _phi(1.5), rel=1e-15)


def test_zero_params_identity_output_gives_zero():
    shape = nn.build_shape(4, (5, 3), 2)
    out, _ = nn.forward(nn.zero_params(shape), np.arange(4.0))
    assert np.array_equal(out, np.zeros(2))


def test_single_identity_unit():
    shape = (nn.LayerSpec(1, 1, nn.Activation.IDENTITY),)
    p = nn.MlpParams(shape, [2.5, -0.75])
    out, tape = nn.forward(p, [3.0])
    assert out[0] == 2.5 * 3.0 - 0.75
    pg, ig = nn.backward(p, tape, [1.0])
    assert np.array_equal(pg, [3.0, 1.0])
    assert np.array_equal(ig, [2.5])


def test_layer_major_row_major_layout():
    shape = (nn.LayerSpec(3, 2, nn.Activation.IDENTITY),)
    p = nn.MlpParams(shape, np.arange(8.0))
    w = np.arange(6.0).reshape(2, 3)
    x = np.array([1.0, -2.0, 0.5])
    out, _ = nn.forward(p, x)
    assert np.array_equal(out, w @ x + np.array([6.0, 7.0]))


def test_random_net_matches_straight_line_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = _random_net(rng, (3, 4, 2))
        x = rng.uniform(-2, 2, size=3)
        out, _ = nn.forward(p, x)
        np.testing.assert_allclose(out, _naive_mlp(p.shape, p.values, x), rtol=1e-13, atol=1e-15)


def test_batched_forward_matches_rows():
    rng = np.random.default_rng(3)
    p = _random_net(rng, (5, 6, 4, 3))
    xs = rng.normal(size=(9, 5))
    batch, _ = nn.forward(p, xs)
    for k in range(9):
        np.testing.assert_allclose(batch[k], nn.forward(p, xs[k])[0], rtol=1e-14, atol=1e-15)


def test_backward_matches_finite_differences_on_100_nets():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        depth = int(rng.integers(1, 4))
        dims = [int(rng.integers(1, 5)) for _ in range(depth + 1)]
        acts = list(nn.Activation)
        shape = nn.build_shape(dims[0], dims[1:-1], dims[-1], acts[rng.integers(3)], acts[rng.integers(3)])
        if nn.param_count(shape) > 200:
            continue
        p0 = nn.init_params(shape, rng)
        p = p0.replace(1.5 * p0.values)
        x = rng.uniform(-2, 2, size=dims[0])
        g = rng.normal(size=dims[-1])
        _, tape = nn.forward(p, x)
        pg, ig = nn.backward(p, tape, g)
        fd_p = central_difference(lambda v: float(g @ nn.forward(nn.MlpParams(shape, v), x)[0]), p.values)
        fd_x = central_difference(lambda v: float(g @ nn.forward(p, v)[0]), x)
        worst = max(worst, relative_error(pg, fd_p), relative_error(ig, fd_x))
    assert worst <= 1e-4


def test_batched_backward_sums_parameter_gradients():
    rng = np.random.default_rng(5)
    p = _random_net(rng, (4, 3, 2))
    xs = rng.normal(size=(6, 4))
    gs = rng.normal(size=(6, 2))
    _, tape = nn.forward(p, xs)
    pg, ig = nn.backward(p, tape, gs)
    singles = [nn.backward(p, nn.forward(p, xs[k])[1], gs[k]) for k in range(6)]
    np.testing.assert_allclose(pg, sum(s[0] for s in singles), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(ig, np.stack([s[1] for s in singles]), rtol=1e-12, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_backward_is_linear_in_out_grad(seed, a, b):
    rng = np.random.default_rng(seed)
    p = _random_net(rng, (3, 4, 3))
    _, tape = nn.forward(p, rng.normal(size=3))
    g1, g2 = rng.normal(size=3), rng.normal(size=3)
    pg, ig = nn.backward(p, tape, a * g1 + b * g2)
    p1, i1 = nn.backward(p, tape, g1)
    p2, i2 = nn.backward(p, tape, g2)
    np.testing.assert_allclose(pg, a * p1 + b * p2, rtol=0, atol=1e-12)
    np.testing.assert_allclose(ig, a * i1 + b * i2, rtol=0, atol=1e-12)


def test_zero_out_grad_gives_zero_gradients():
    rng = np.random.default_rng(0)
    p = _random_net(rng, (3, 4, 2))
    _, tape = nn.forward(p, rng.normal(size=3))
    pg, ig = nn.backward(p, tape, np.zeros(2))
    assert not pg.any() and not ig.any()


def test_stale_tape_is_rejected():
    rng = np.random.default_rng(0)
    p = _random_net(rng, (3, 4, 2))
    _, tape = nn.forward(p, np.ones(3))
    q = p.replace(p.values)  # same numbers, new instance
    with pytest.raises(StaleTapeError):
        nn.backward(q, tape, np.ones(2))


def test_forward_is_deterministic():
    rng = np.random.default_rng(2)
    p = _random_net(rng, (6, 8, 3))
    x = rng.normal(size=(4, 6))
    assert nn.forward(p, x)[0].tobytes() == nn.forward(p, x)[0].tobytes()


def test_dimension_errors():
    with pytest.raises(ConfigurationError):
        nn.LayerSpec(0, 3)
    with pytest.raises(ConfigurationError):
        nn.MlpParams((nn.LayerSpec(2, 3), nn.LayerSpec(4, 1)), np.zeros(9 + 5))
    shape = nn.build_shape(3, (4,), 2)
    with pytest.raises(ConfigurationError):
        nn.MlpParams(shape, np.zeros(nn.param_count(shape) + 1))
    with pytest.raises(ConfigurationError):
        nn.forward(nn.zero_params(shape), np.zeros(4))


def test_params_are_immutable_and_finite():
    shape = nn.build_shape(2, (3,), 1)
    raw = np.zeros(nn.param_count(shape))
    p = nn.MlpParams(shape, raw)
    raw[0] = 5.0
    assert p.values[0] == 0.0
    with pytest.raises(ValueError):
        p.values[0] = 1.0
    bad = np.zeros(nn.param_count(shape))
    bad[3] = np.nan
    with pytest.raises(NonFiniteParameterError):
        nn.MlpParams(shape, bad)


def test_init_respects_fan_in_bounds():
    shape = nn.build_shape(16, (9,), 4)
    p = nn.init_params(shape, np.random.default_rng(0))
    for w, b, _ in p._layers:
        bound = 1.0 / math.sqrt(w.shape[1])
        assert np.all(np.abs(w) <= bound) and np.all(np.abs(b) <= bound)


def test_actor_zero_params_gives_midpoint():
    shape = nn.build_shape(4, (5,), 3, output_activation=nn.Activation.TANH)
    bounds = [[-0.1, 0.1], [0.0, 1.0], [-0.25, 0.75]]
    a = nn.actor_forward(nn.zero_params(shape), np.ones(4), bounds)
    np.testing.assert_array_equal(a, [0.0, 0.5, 0.25])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 20.0))
def test_actor_outputs_stay_in_displacement_bounds(seed, gain):
    rng = np.random.default_rng(seed)
    p = _random_net(rng, (4, 6, 2), gain=gain)
    a = nn.actor_forward(p, rng.normal(scale=5.0, size=(10, 4)), [[-0.1, 0.1], [-0.1, 0.1]])
    assert np.all(a >= -0.1) and np.all(a <= 0.1)


def test_actor_rescale_formula():
    rng = np.random.default_rng(4)
    p = _random_net(rng, (3, 4, 2))
    x = rng.normal(size=3)
    bounds = np.array([[-2.0, 0.5], [1.0, 3.0]])
    t, _ = nn.forward(p, x)
    lo, hi = bounds[:, 0], bounds[:, 1]
    np.testing.assert_allclose(nn.actor_forward(p, x, bounds), lo + (t + 1) * (hi - lo) / 2, rtol=1e-15)


def test_actor_backward_matches_fd():
    rng = np.random.default_rng(9)
    p = _random_net(rng, (3, 5, 2))
    bounds = np.array([[-0.3, 0.1], [0.0, 2.0]])
    x = rng.normal(size=3)
    g = rng.normal(size=2)
    _, tape = nn.actor_forward_tape(p, x, bounds)
    pg = nn.actor_backward(p, tape, g, bounds)
    fd = central_difference(lambda v: float(g @ nn.actor_forward(nn.MlpParams(p.shape, v), x, bounds)), p.values)
    assert relative_error(pg, fd) <= 1e-4


def test_bad_bounds_and_output_layer():
    shape = nn.build_shape(2, (3,), 1, output_activation=nn.Activation.TANH)
    with pytest.raises(ConfigurationError):
        nn.actor_forward(nn.zero_params(shape), np.zeros(2), [[0.2, 0.1]])
    with pytest.raises(ConfigurationError):
        nn.actor_forward(nn.zero_params(nn.build_shape(2, (3,), 1)), np.zeros(2), [[-1, 1]])
