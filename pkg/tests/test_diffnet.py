import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iher import diffnet
from iher.diffnet import AdamState, Mlp, adam_update, backward, forward, gradient_check, init_mlp


def naive_forward(net, x):
    """Straight-line loops over units; shares nothing with the vectorised path."""
    out = []
    for row in x:
        h = [float(v) for v in row]
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            z = [sum(w[o][j] * h[j] for j in range(len(h))) + b[o] for o in range(len(b))]
            kind = net.output_activation if i == net.n_layers - 1 else net.hidden_activation
            if kind == "relu":
                h = [max(v, 0.0) for v in z]
            elif kind == "tanh":
                h = [math.tanh(v) for v in z]
            else:
                h = z
        out.append(h)
    return np.array(out)


def test_zero_network_outputs_zero():
    net = Mlp([3, 5, 2])
    assert np.array_equal(forward(net, np.random.default_rng(0).normal(size=(4, 3))), np.zeros((4, 2)))


def test_affine_single_layer():
    net = Mlp([1, 1], weights=[np.array([[2.0]])], biases=[np.array([1.0])])
    assert forward(net, [3.0]).tolist() == [[7.0]]


def test_forward_matches_naive_loops():
    net = init_mlp([4, 8, 2], 0)
    x = np.random.default_rng(1).normal(size=(5, 4))
    np.testing.assert_allclose(forward(net, x), naive_forward(net, x), rtol=1e-13, atol=1e-14)


def test_forward_rejects_wrong_width():
    with pytest.raises(ValueError):
        forward(init_mlp([4, 3], 0), np.zeros((2, 5)))


def test_layer_shapes():
    net = init_mlp([3, 16, 16, 2], 0)
    assert net.n_layers == 3
    assert [w.shape for w in net.weights] == [(16, 3), (16, 16), (2, 16)]
    assert [b.shape for b in net.biases] == [(16,), (16,), (2,)]


def test_init_is_bounded_and_seeded():
    a, b = init_mlp([9, 4], 3), init_mlp([9, 4], 3)
    assert np.array_equal(a.weights[0], b.weights[0])
    assert np.all(np.abs(a.weights[0]) <= 1 / 3)


def test_zero_upstream_gives_zero_gradients():
    net = init_mlp([3, 6, 2], 0)
    x = np.random.default_rng(0).normal(size=(4, 3))
    grads, gin = backward(net, x, np.zeros((4, 2)))
    assert all(np.all(g == 0) for g in grads)
    assert np.all(gin == 0)


def test_scalar_chain_rule():
    w, x = 1.7, 0.4
    net = Mlp([1, 1], weights=[np.array([[w]])], biases=[np.array([0.3])])
    grads, gin = backward(net, [[x]], [[1.0]])
    assert grads[0][0, 0] == pytest.approx(x)
    assert grads[1][0] == pytest.approx(1.0)
    assert gin[0, 0] == pytest.approx(w)


def test_backward_rejects_bad_upstream():
    net = init_mlp([3, 4, 2], 0)
    with pytest.raises(ValueError):
        backward(net, np.zeros((4, 3)), np.zeros((4, 3)))


def test_random_deep_net_matches_finite_differences():
    net = init_mlp([3, 16, 16, 2], 7, "tanh", "tanh")
    x = np.random.default_rng(2).normal(size=(3, 3))
    up = np.random.default_rng(3).normal(size=(3, 2))
    assert gradient_check(net, x, up).max_rel_error < 1e-4


def test_gradcheck_linear_net_is_exact():
    net = init_mlp([3, 4], 0)
    x = np.random.default_rng(0).normal(size=(2, 3))
    assert gradient_check(net, x).max_rel_error < 1e-8


def test_gradcheck_tanh_output():
    net = init_mlp([3, 8, 2], 0, "tanh", "tanh")
    x = np.random.default_rng(0).normal(size=(4, 3))
    assert gradient_check(net, x).max_rel_error < 1e-4


def relu_safe_inputs(net, rng, n, margin=1e-3, tries=1000):
    """Draw inputs whose hidden pre-activations all sit at least ``margin`` from 0."""
    rows = []
    for _ in range(tries):
        x = rng.normal(size=(1, net.in_dim))
        h, ok = x, True
        for w, b in zip(net.weights[:-1], net.biases[:-1]):
            z = h @ w.T + b
            ok &= bool(np.all(np.abs(z) > margin))
            h = np.maximum(z, 0)
        if ok:
            rows.append(x[0])
        if len(rows) == n:
            return np.array(rows)
    raise RuntimeError("could not find kink-free inputs")


def test_gradcheck_relu_away_from_kinks():
    net = init_mlp([3, 8, 8, 2], 0, "relu", "identity")
    x = relu_safe_inputs(net, np.random.default_rng(0), 4)
    assert gradient_check(net, x).max_rel_error < 1e-4


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1),
       hidden=st.lists(st.integers(1, 8), min_size=0, max_size=3),
       hidden_act=st.sampled_from(["relu", "tanh"]),
       out_act=st.sampled_from(["identity", "tanh"]))
def test_backward_matches_finite_differences_property(seed, hidden, hidden_act, out_act):
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(1, 5)), *hidden, int(rng.integers(1, 4))]
    net = init_mlp(sizes, rng, hidden_act, out_act)
    x = relu_safe_inputs(net, rng, 3) if hidden_act == "relu" else rng.normal(size=(3, sizes[0]))
    up = rng.normal(size=(3, sizes[-1]))
    assert gradient_check(net, x, up).max_rel_error < 1e-4


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_forward_is_batch_order_equivariant(seed):
    rng = np.random.default_rng(seed)
    net = init_mlp([3, 7, 2], rng)
    x = rng.normal(size=(6, 3))
    perm = rng.permutation(6)
    np.testing.assert_array_equal(forward(net, x)[perm], forward(net, x[perm]))


def test_adam_zero_gradient_leaves_params():
    net = init_mlp([2, 3], 0)
    before = [p.copy() for p in net.params()]
    state = AdamState.for_net(net)
    adam_update(net, [np.zeros_like(p) for p in net.params()], state)
    assert state.step_count == 1
    assert all(np.array_equal(a, b) for a, b in zip(before, net.params()))


def test_adam_zero_gradient_decays_moments():
    net = init_mlp([2, 3], 0)
    state = AdamState.for_net(net)
    state.first_moment[0][...] = 1.0
    state.second_moment[0][...] = 1.0
    adam_update(net, [np.zeros_like(p) for p in net.params()], state)
    assert np.allclose(state.first_moment[0], 0.9)
    assert np.allclose(state.second_moment[0], 0.999)


def test_adam_first_step_moves_by_learning_rate():
    net = Mlp([1, 1])
    state = AdamState.for_net(net, learning_rate=0.1)
    adam_update(net, [np.ones((1, 1)), np.zeros(1)], state)
    # m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
    assert net.weights[0][0, 0] == pytest.approx(-0.1 / (1 + 1e-8), abs=1e-12)


def test_adam_converges_on_quadratic():
    net = Mlp([1, 1])
    state = AdamState.for_net(net, learning_rate=0.1)
    for _ in range(1000):
        p = net.weights[0][0, 0]
        adam_update(net, [np.array([[2 * (p - 3)]]), np.zeros(1)], state)
    assert abs(net.weights[0][0, 0] - 3) < 0.01


def test_adam_rejects_non_finite_and_names_layer():
    net = init_mlp([2, 3, 1], 0)
    grads = [np.zeros_like(p) for p in net.params()]
    grads[2][0, 0] = np.nan
    with pytest.raises(diffnet.NonFiniteGradientError, match="layer 1"):
        adam_update(net, grads, AdamState.for_net(net))


def test_adam_is_bit_reproducible():
    rng = np.random.default_rng(0)
    grads = [rng.normal(size=p.shape) for p in init_mlp([3, 4, 2], 0).params()]
    results = []
    for _ in range(2):
        net = init_mlp([3, 4, 2], 0)
        st_ = AdamState.for_net(net)
        for _ in range(5):
            adam_update(net, grads, st_)
        results.append(net.params())
    assert all(np.array_equal(a, b) for a, b in zip(*results))


def test_parameters_stay_finite_after_updates():
    net = init_mlp([3, 8, 1], 0)
    state = AdamState.for_net(net)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.normal(size=(16, 3))
        grads, _ = backward(net, x, 2 * (forward(net, x) - 1.0))
        adam_update(net, grads, state)
    assert all(np.all(np.isfinite(p)) for p in net.params())
