import numpy as np
import pytest

from slicesim.neural import AdamState, Mlp, adam_update, forward, init_mlp, loss_and_grads, train_step


def numeric_grads(net, batch, h=1e-6):
    out = []
    for p in net.params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = loss_and_grads(net, batch)[0]
            p[idx] = old - h
            down = loss_and_grads(net, batch)[0]
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def random_batch(rng, dims, n=8):
    return [(rng.normal(size=dims[0]), int(rng.integers(dims[-1])), float(rng.normal())) for _ in range(n)]


def test_init_deterministic():
    a, b = init_mlp([3, 8, 4], 1), init_mlp([3, 8, 4], 1)
    for p, q in zip(a.params, b.params):
        np.testing.assert_array_equal(p, q)
    assert [w.shape for w in a.weights] == [(8, 3), (4, 8)]
    assert all(np.all(bias == 0) for bias in a.biases)


def test_init_rejects_bad_dims():
    with pytest.raises(ValueError):
        init_mlp([], 0)
    with pytest.raises(ValueError):
        init_mlp([3], 0)


def test_forward_zero_net():
    net = init_mlp([3, 5, 2], 0)
    for p in net.params:
        p[...] = 0
    np.testing.assert_array_equal(forward(net, [1.0, 2.0, 3.0]), [0.0, 0.0])


def test_forward_single_layer_by_hand():
    net = Mlp((2, 2), [np.array([[1.0, 2.0], [3.0, 4.0]])], [np.array([0.5, -1.0])])
    # [1*1 + 2*2 + 0.5, 3*1 + 4*2 - 1]
    np.testing.assert_allclose(forward(net, [1.0, 2.0]), [5.5, 10.0])


def test_forward_relu_zeroes_negative_hidden():
    net = Mlp((1, 2, 1), [np.array([[1.0], [-1.0]]), np.array([[1.0, 1.0]])], [np.zeros(2), np.zeros(1)])
    # hidden pre-activations [2, -2]: only the first contributes
    assert forward(net, [2.0])[0] == 2.0
    assert forward(net, [-3.0])[0] == 3.0


def test_forward_batch_matches_single():
    net = init_mlp([3, 6, 4], 2)
    x = np.random.default_rng(0).normal(size=(5, 3))
    np.testing.assert_allclose(forward(net, x), np.stack([forward(net, r) for r in x]))


def test_forward_dim_mismatch():
    with pytest.raises(ValueError):
        forward(init_mlp([3, 2], 0), [1.0, 2.0])


def test_gradient_check_small():
    rng = np.random.default_rng(0)
    net = init_mlp([3, 8, 4], 5)
    batch = random_batch(rng, net.dims)
    _, grads = loss_and_grads(net, batch)
    for a, n in zip(grads, numeric_grads(net, batch)):
        np.testing.assert_allclose(a, n, rtol=1e-5, atol=1e-7)


def test_fixed_point_zero_loss_and_grad():
    net = init_mlp([2, 4, 3], 1)
    xs = np.random.default_rng(1).normal(size=(4, 2))
    preds = forward(net, xs)
    batch = [(x, i % 3, float(preds[i, i % 3])) for i, x in enumerate(xs)]
    loss, grads = loss_and_grads(net, batch)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads)


def test_train_step_validation():
    net = init_mlp([2, 3], 0)
    adam = AdamState.for_net(net)
    with pytest.raises(ValueError):
        train_step(net, adam, [])
    with pytest.raises(ValueError):
        train_step(net, adam, [(np.zeros(2), 0, float("nan"))])
    with pytest.raises(ValueError):
        train_step(net, adam, [(np.zeros(2), 3, 1.0)])


def test_adam_first_step_moves_by_lr():
    net = Mlp((1, 1), [np.array([[0.0]])], [np.array([0.0])])
    adam = AdamState.for_net(net, lr=0.1)
    adam_update(net, adam, [np.array([[2.0]]), np.array([-3.0])])
    # bias-corrected first step is lr * sign(g)
    assert net.weights[0][0, 0] == pytest.approx(-0.1, rel=1e-6)
    assert net.biases[0][0] == pytest.approx(0.1, rel=1e-6)


def test_training_reduces_loss():
    rng = np.random.default_rng(3)
    net = init_mlp([2, 16, 2], 0)
    adam = AdamState.for_net(net, lr=1e-2)
    xs = rng.normal(size=(64, 2))
    batch = [(x, i % 2, float(x[0] - 2 * x[1]) if i % 2 else float(x.sum())) for i, x in enumerate(xs)]
    first = train_step(net, adam, batch)
    for _ in range(300):
        last = train_step(net, adam, batch)
    assert last < 0.1 * first


def test_serialisation_round_trip():
    net = init_mlp([3, 5, 2], 4)
    back = Mlp.from_dict(net.to_dict())
    x = np.array([0.1, -0.2, 0.3])
    np.testing.assert_array_equal(forward(back, x), forward(net, x))
    cp = net.copy()
    cp.weights[0][0, 0] += 1
    assert net.weights[0][0, 0] != cp.weights[0][0, 0]
