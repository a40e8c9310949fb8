import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddgan import autodiff as ad
from ddgan.mlp import (CheckpointError, MlpSpec, ParameterSet, checkpoint_bytes, forward, forward_jac,
                       forward_jac_numpy, forward_var, init_params, input_jacobian, load_checkpoint,
                       loss_gradient, save_checkpoint)
from ddgan.autodiff import UnsupportedOperationError

from conftest import central_diff, rel_err


def small(activation="hardswish", seed=0, layers=3, units=8, d_in=2, d_out=2):
    spec = MlpSpec(d_in, d_out, layers, units, activation)
    return init_params(spec, np.random.default_rng(seed))


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec(0, 1, 1, 4)
    with pytest.raises(ValueError):
        MlpSpec(2, 1, 1, 4, "swish")
    assert MlpSpec(2, 1, 4, 64).n_params == 2 * 64 + 64 + 3 * (64 * 64 + 64) + 64 + 1


def test_zero_net_outputs_zero():
    p = ParameterSet.zeros(MlpSpec(2, 3, 2, 5))
    assert np.array_equal(forward(p, np.array([0.3, -2.0])), np.zeros(3))
    assert np.array_equal(input_jacobian(p, np.array([0.3, -2.0])), np.zeros((3, 2)))


def test_single_affine_layer():
    spec = MlpSpec(3, 2, 0, 1, "identity")
    W = np.array([[1.0, 2], [3, 4], [5, 6]])
    b = np.array([0.5, -1])
    p = ParameterSet(spec, [(W, b)])
    x = np.array([1.0, -1, 2])
    assert np.array_equal(forward(p, x), x @ W + b)
    assert np.array_equal(input_jacobian(p, x), W.T)


def test_hand_computed_two_layer_net():
    spec = MlpSpec(2, 1, 1, 2, "hardswish")
    W1 = np.array([[1.0, -1.0], [2.0, 0.5]])
    b1 = np.array([0.0, 1.0])
    W2 = np.array([[1.0], [3.0]])
    b2 = np.array([-0.5])
    p = ParameterSet(spec, [(W1, b1), (W2, b2)])
    # x = (1, 1): pre-activations (3, 0.5); hardswish -> (3, (0.25 + 1.5)/6)
    # output = 3 + 3 * 1.75/6 - 0.5
    assert forward(p, np.array([1.0, 1.0]))[0] == pytest.approx(2.5 + 1.75 / 2, rel=1e-15)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        forward(small(), np.zeros(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 4), st.integers(1, 9), st.integers(0, 10_000))
def test_flatten_roundtrip(layers, units, seed):
    p = init_params(MlpSpec(3, 2, layers, units), np.random.default_rng(seed))
    theta = p.flatten()
    back = ParameterSet.unflatten(p.spec, theta)
    assert np.array_equal(back.flatten(), theta)
    for (W, b), (W2, b2) in zip(p.layers, back.layers):
        assert np.array_equal(W, W2) and np.array_equal(b, b2)


def test_unflatten_wrong_length():
    with pytest.raises(ValueError):
        ParameterSet.unflatten(MlpSpec(2, 1, 1, 3), np.zeros(5))


def test_glorot_bounds_and_zero_bias():
    p = init_params(MlpSpec(2, 1, 2, 64), np.random.default_rng(0))
    for W, b in p.layers:
        lim = np.sqrt(6.0 / sum(W.shape))
        assert np.all(np.abs(W) <= lim) and np.all(b == 0)
    q = init_params(MlpSpec(2, 1, 2, 64), np.random.default_rng(0))
    assert np.array_equal(p.flatten(), q.flatten())


@pytest.mark.parametrize("act", ["hardswish", "leaky_relu", "identity"])
def test_input_jacobian_vs_finite_differences(act):
    p = small(act, seed=4)
    x = np.random.default_rng(5).normal(size=(7, 2))
    J = input_jacobian(p, x)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (forward(p, x + e) - forward(p, x - e)) / (2 * h)
        assert rel_err(J[:, :, j], fd) < 1e-5


def test_numpy_jacobian_matches_graph():
    p = small(seed=2)
    x = np.random.default_rng(3).normal(size=(9, 2))
    y, J = forward_jac_numpy(p, x)
    assert np.allclose(y, forward(p, x), rtol=1e-14, atol=1e-14)
    assert np.allclose(J, input_jacobian(p, x), rtol=1e-13, atol=1e-14)


def _fd_check(loss, p, tol=1e-4):
    val, g = loss_gradient(loss, p)

    def f(theta):
        return float(loss(p.spec, [(ad.Var(W), ad.Var(b)) for W, b in
                                    ParameterSet.unflatten(p.spec, theta).layers]).value)
    fd = central_diff(f, p.flatten())
    assert rel_err(g, fd) < tol
    return val


def test_plain_l2_loss_gradient():
    p = small(seed=1)
    x = np.random.default_rng(0).normal(size=(5, 2))
    _fd_check(lambda spec, pv: 0.5 * ad.sum(ad.square(forward_var(spec, pv, x))), p)


@pytest.mark.parametrize("act", ["hardswish", "leaky_relu"])
def test_jacobian_loss_gradient(act):
    p = small(act, seed=6)
    x = np.random.default_rng(1).normal(size=(5, 2))

    def loss(spec, pv):
        _, J = forward_jac(spec, pv, x)
        return ad.sum(ad.square(J[:, 0, :]))
    _fd_check(loss, p)


def test_gradient_norm_penalty_gradient():
    p = small("leaky_relu", seed=7, d_in=6, d_out=1)
    x = np.random.default_rng(2).normal(size=(6, 6))

    def loss(spec, pv):
        _, J = forward_jac(spec, pv, x)
        norm = ad.sqrt(ad.sum(ad.square(J[:, 0, :]), axis=1))
        return ad.mean(ad.square(norm - 1.0))
    _fd_check(loss, p)


def test_parameter_free_loss_has_zero_gradient():
    p = small()
    _, g = loss_gradient(lambda spec, pv: ad.Var(3.0) * 2.0, p)
    assert np.array_equal(g, np.zeros(p.spec.n_params))


def test_non_var_loss_rejected():
    with pytest.raises(UnsupportedOperationError):
        loss_gradient(lambda spec, pv: 1.0, small())


def test_checkpoint_roundtrip(tmp_path):
    a, b = small(seed=1), small("leaky_relu", seed=2, d_in=6, d_out=1)
    path = tmp_path / "c.ckpt"
    save_checkpoint(path, {"a": a, "b": b}, seed=9, epoch=3, extra={"k": 1.5})
    nets, header = load_checkpoint(path)
    assert header["seed"] == 9 and header["epoch"] == 3 and header["extra"] == {"k": 1.5}
    assert nets["a"].spec == a.spec and np.array_equal(nets["a"].flatten(), a.flatten())
    assert np.array_equal(nets["b"].flatten(), b.flatten())
    assert path.read_bytes() == checkpoint_bytes({"a": a, "b": b}, 9, 3, {"k": 1.5})


def test_checkpoint_corruption(tmp_path):
    blob = checkpoint_bytes({"a": small()})
    p = tmp_path / "c.ckpt"
    p.write_bytes(blob[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(p)
    p.write_bytes(b"garbage")
    with pytest.raises(CheckpointError):
        load_checkpoint(p)


def test_gradient_checks_are_fast():
    t0 = time.perf_counter()
    test_jacobian_loss_gradient("hardswish")
    test_gradient_norm_penalty_gradient()
    assert time.perf_counter() - t0 < 10.0
