import numpy as np
import pytest

from sourcetrace import autodiff as ad
from sourcetrace.errors import ConfigError, NumericalError
from sourcetrace.gradcheck import grad_check
from sourcetrace.params import ParamStore, adam_step
from oracles import adam_scalar_oracle, attention_naive, matmul_naive


def sum_all(x):
    """Scalar test loss: sum of all entries of a graph node."""
    flat = ad.reshape(x, (1, -1))
    w = ad.Tensor(np.ones((flat.data.shape[1], 1)))
    return ad.reshape(ad.matmul(flat, w), ())


# -- forward semantics ---------------------------------------------------------


def test_dense_identity_passthrough():
    x = np.arange(6.0).reshape(2, 3)
    out = ad.dense_forward(x, np.eye(3), np.zeros(3))
    assert np.array_equal(out.data, x)


def test_dense_hand_sum():
    out = ad.dense_forward(np.array([[1.0, 1.0]]), np.array([[1.0], [1.0]]), np.zeros(1))
    assert out.data[0, 0] == pytest.approx(2.0)


def test_dense_matches_naive_matmul():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, 4))
    w = rng.standard_normal((4, 2))
    b = rng.standard_normal(2)
    out = ad.dense_forward(x, w, b)
    assert np.abs(out.data - (matmul_naive(x, w) + b)).max() < 1e-12


def test_dense_shape_mismatch():
    with pytest.raises(ValueError, match="matmul shape mismatch"):
        ad.matmul(np.ones((2, 3)), np.ones((4, 2)))


def test_sigmoid_and_softmax_values():
    assert ad.sigmoid(np.zeros((1, 1))).data[0, 0] == pytest.approx(0.5)
    row = ad.softmax_rows(np.full((1, 4), 3.7))
    assert np.allclose(row.data, 0.25)
    big = ad.softmax_rows(np.array([[1000.0, 0.0]]))
    assert np.all(np.isfinite(big.data))
    assert abs(big.data[0, 0] - 1.0) < 1e-12
    assert abs(big.data[0, 1]) < 1e-12


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(1)
    s = ad.softmax_rows(rng.standard_normal((40, 9)) * 30).data
    assert np.abs(s.sum(axis=1) - 1).max() < 1e-6
    assert s.min() >= 0 and s.max() <= 1


def test_monotone_activations():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((50, 4))
    bump = np.abs(rng.standard_normal((50, 4)))
    for op in (ad.relu, ad.sigmoid):
        assert np.all(op(x + bump).data >= op(x).data)
    x3 = rng.standard_normal((2, 3, 8))
    from sourcetrace import kernels

    lo, _ = kernels.maxpool1d_forward(x3)
    hi, _ = kernels.maxpool1d_forward(x3 + 1e-3)
    assert np.all(hi >= lo)


def test_dropout_modes():
    rng = np.random.default_rng(3)
    x = np.ones((10, 10))
    assert ad.dropout(x, 0.0, rng, training=True).data is not None
    assert np.array_equal(ad.dropout(x, 0.0, rng, training=True).data, x)
    assert np.array_equal(ad.dropout(x, 0.5, rng, training=False).data, x)
    with pytest.raises(ConfigError):
        ad.dropout(x, 1.0, rng, training=True)


def test_dropout_preserves_expectation():
    rng = np.random.default_rng(4)
    x = np.ones((400, 250))  # 1e5 entries
    out = ad.dropout(x, 0.5, rng, training=True).data
    assert 0.98 <= out.mean() <= 1.02


def test_attention_single_token_is_its_value_row():
    rng = np.random.default_rng(5)
    tokens = rng.standard_normal((1, 4))
    wq, wk, wv = (rng.standard_normal((4, 4)) for _ in range(3))
    out = ad.self_attention(tokens, wq, wk, wv)
    assert np.abs(out.data - tokens @ wv).max() < 1e-12


def test_attention_zero_queries_average_values():
    rng = np.random.default_rng(6)
    tokens = rng.standard_normal((5, 3))
    wv = rng.standard_normal((3, 3))
    out = ad.self_attention(tokens, np.zeros((3, 3)), np.zeros((3, 3)), wv)
    v = tokens @ wv
    assert np.abs(out.data - v.mean(axis=0)).max() < 1e-12


def test_attention_matches_naive_oracle():
    rng = np.random.default_rng(7)
    tokens = rng.standard_normal((3, 4))
    wq, wk, wv = (rng.standard_normal((4, 4)) for _ in range(3))
    out = ad.self_attention(tokens, wq, wk, wv)
    assert np.abs(out.data - attention_naive(tokens, wq, wk, wv)).max() < 1e-12


def test_attention_permutation_equivariant():
    rng = np.random.default_rng(8)
    tokens = rng.standard_normal((6, 5))
    wq, wk, wv = (rng.standard_normal((5, 5)) for _ in range(3))
    perm = rng.permutation(6)
    out = ad.self_attention(tokens, wq, wk, wv).data
    out_p = ad.self_attention(tokens[perm], wq, wk, wv).data
    assert np.abs(out_p - out[perm]).max() < 1e-10


def test_cross_entropy_values():
    probs = np.full((3, 4), 0.25)
    assert ad.cross_entropy(probs, [0, 1, 2]).item() == pytest.approx(np.log(4))
    onehot = np.eye(4)[[2, 0]]
    assert ad.cross_entropy(onehot, [2, 0]).item() == pytest.approx(0.0)
    assert ad.cross_entropy(np.array([[0.7, 0.3]]), [1]).item() == pytest.approx(
        -np.log(0.3)
    )
    with pytest.raises(ValueError, match="label out of range"):
        ad.cross_entropy(np.full((2, 3), 1 / 3), [0, 3])


# -- gradients -----------------------------------------------------------------


def test_bias_gradient_is_ones_for_sum_loss():
    x = ad.Tensor(np.random.default_rng(9).standard_normal((4, 3)))
    b = ad.Tensor(np.zeros(3))
    loss = sum_all(ad.dense_forward(x, np.eye(3), b))
    ad.backward(loss)
    assert np.array_equal(b.grad, np.full(3, 4.0))


def test_backward_deterministic():
    rng = np.random.default_rng(10)
    x = ad.Tensor(rng.standard_normal((5, 4)))
    w = ad.Tensor(rng.standard_normal((4, 2)))
    grads = []
    for _ in range(2):
        x.grad = w.grad = None
        loss = sum_all(ad.relu(ad.matmul(x, w)))
        ad.backward(loss)
        grads.append((x.grad.copy(), w.grad.copy()))
    assert np.array_equal(grads[0][0], grads[1][0])
    assert np.array_equal(grads[0][1], grads[1][1])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_grad_dense(seed):
    rng = np.random.default_rng(seed)
    x = ad.Tensor(rng.standard_normal((4, 3)))
    w = ad.Tensor(rng.standard_normal((3, 2)))
    b = ad.Tensor(rng.standard_normal(2))
    err = grad_check(lambda: sum_all(ad.dense_forward(x, w, b)), {"x": x, "w": w, "b": b})
    assert err < 1e-6


def test_grad_conv_and_pool():
    rng = np.random.default_rng(11)
    x = ad.Tensor(rng.standard_normal((2, 2, 9)))
    k = ad.Tensor(rng.standard_normal((3, 2, 3)))
    b = ad.Tensor(rng.standard_normal(3))
    err = grad_check(lambda: sum_all(ad.conv1d(x, k, b)), {"x": x, "k": k, "b": b})
    assert err < 1e-6
    # off-tie pooling input: separate window elements
    base = rng.standard_normal((2, 2, 8))
    base[..., 1::2] += np.where(base[..., 1::2] >= base[..., ::2], 0.5, -0.5)
    xp = ad.Tensor(base)
    err = grad_check(lambda: sum_all(ad.maxpool1d(xp)), {"x": xp})
    assert err < 1e-6


def test_grad_sigmoid_gate_composite():
    rng = np.random.default_rng(12)
    x = ad.Tensor(rng.standard_normal((5, 4)))
    w = ad.Tensor(rng.standard_normal((4, 4)) * 0.5)
    b = ad.Tensor(rng.standard_normal(4) * 0.1)

    def loss_fn():
        gate = ad.sigmoid(ad.dense_forward(x, w, b))
        gated = ad.mul(gate, x)
        return sum_all(ad.mul(gated, gated))

    assert grad_check(loss_fn, {"x": x, "w": w, "b": b}) < 1e-6


def test_grad_attention():
    rng = np.random.default_rng(13)
    tokens = ad.Tensor(rng.standard_normal((3, 4)))
    wq = ad.Tensor(rng.standard_normal((4, 4)))
    wk = ad.Tensor(rng.standard_normal((4, 4)))
    wv = ad.Tensor(rng.standard_normal((4, 4)))

    def loss_fn():
        out = ad.self_attention(tokens, wq, wk, wv)
        return sum_all(ad.mul(out, out))

    err = grad_check(loss_fn, {"t": tokens, "wq": wq, "wk": wk, "wv": wv})
    assert err < 1e-6


def test_grad_softmax_cross_entropy():
    rng = np.random.default_rng(14)
    logits = ad.Tensor(rng.standard_normal((6, 4)))
    labels = rng.integers(0, 4, 6)
    err = grad_check(
        lambda: ad.cross_entropy(ad.softmax_rows(logits), labels), {"logits": logits}
    )
    assert err < 1e-6


# -- Adam ----------------------------------------------------------------------


def test_adam_zero_gradient_keeps_parameters():
    store = ParamStore()
    p = store.add("w", np.array([1.0, -2.0]))
    p.grad = np.zeros(2)
    adam_step(store, lr=0.1)
    assert np.array_equal(p.data, [1.0, -2.0])
    assert store.t == 1


def test_adam_first_step_is_signed_lr():
    store = ParamStore()
    p = store.add("w", np.array([0.0, 0.0]))
    p.grad = np.array([3.0, -0.004])
    adam_step(store, lr=0.01, eps=1e-12)
    assert np.allclose(p.data, [-0.01, 0.01], atol=1e-8)


def test_adam_converges_on_quadratic_and_matches_scalar_oracle():
    store = ParamStore()
    p = store.add("theta", np.array([1.0]))
    traj = []
    for _ in range(100):
        p.grad = 2.0 * p.data
        adam_step(store, lr=0.1)
        traj.append(float(p.data[0]))
    oracle = adam_scalar_oracle(1.0, lambda th: 2.0 * th, lr=0.1, steps=100)
    assert np.abs(np.array(traj) - oracle).max() < 1e-12
    assert abs(traj[-1]) < 0.05


def test_adam_rejects_non_finite_gradients():
    store = ParamStore()
    p = store.add("w", np.array([1.0]))
    p.grad = np.array([np.nan])
    with pytest.raises(NumericalError, match="'w'"):
        adam_step(store)
