import numpy as np
import pytest

from editaug import autodiff as ad
from editaug.errors import GraphNotRecordedError


def numeric_grad(fn, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar-valued fn at x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = fn(x)
        flat[i] = orig - eps
        lo = fn(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return g


def check_op(build, shape, rng, rtol=1e-6):
    x = rng.standard_normal(shape)
    t = ad.Tensor(x.copy(), requires_grad=True)
    out = build(t)
    loss = ad.tsum(out)
    loss.backward()

    def fn(arr):
        return float(ad.tsum(build(ad.Tensor(arr))).data)

    num = numeric_grad(fn, x.copy())
    np.testing.assert_allclose(t.grad, num, rtol=rtol, atol=1e-7)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_add_sub_mul_div_broadcast(rng):
    b = ad.Tensor(rng.standard_normal((1, 4)) + 2.0)
    check_op(lambda t: ad.add(t, b), (3, 4), rng)
    check_op(lambda t: ad.sub(t, b), (3, 4), rng)
    check_op(lambda t: ad.mul(t, b), (3, 4), rng)
    check_op(lambda t: ad.div(t, b), (3, 4), rng)


def test_broadcast_grad_flows_to_small_operand(rng):
    x = ad.Tensor(rng.standard_normal((3, 4)))
    b = ad.Tensor(rng.standard_normal((1, 4)), requires_grad=True)
    ad.tsum(ad.add(x, b)).backward()
    np.testing.assert_allclose(b.grad, np.full((1, 4), 3.0))


def test_matmul_2d_and_batched(rng):
    w = ad.Tensor(rng.standard_normal((4, 5)))
    check_op(lambda t: ad.matmul(t, w), (3, 4), rng)
    wb = ad.Tensor(rng.standard_normal((2, 5, 3)))
    check_op(lambda t: ad.matmul(t, wb), (2, 4, 5), rng)
    # gradient w.r.t. a broadcast right operand
    x = ad.Tensor(rng.standard_normal((2, 3, 4)))
    w2 = ad.Tensor(rng.standard_normal((4, 5)), requires_grad=True)
    ad.tsum(ad.matmul(x, w2)).backward()

    def fn(arr):
        return float(np.matmul(x.data, arr).sum())

    np.testing.assert_allclose(w2.grad, numeric_grad(fn, w2.data.copy()), rtol=1e-6)


def test_reductions_and_shapes(rng):
    check_op(lambda t: ad.tsum(t, axis=1, keepdims=True), (3, 4), rng)
    check_op(lambda t: ad.mean(t, axis=-1), (2, 5), rng)
    check_op(lambda t: ad.reshape(t, (4, 3)), (3, 4), rng)
    check_op(lambda t: ad.swapaxes(t, 0, 1), (3, 4), rng)


def test_nonlinearities(rng):
    check_op(ad.relu, (3, 4), rng)
    check_op(lambda t: ad.sqrt(ad.add(ad.mul(t, t), 1.0)), (3, 4), rng)
    check_op(lambda t: ad.softmax(t, axis=-1), (3, 4), rng)
    check_op(lambda t: ad.clip_max(t, 0.3), (3, 4), rng)


def test_concat(rng):
    other = ad.Tensor(rng.standard_normal((3, 2)))
    check_op(lambda t: ad.concat([t, other], axis=-1), (3, 4), rng)
    check_op(lambda t: ad.concat([other, t, other], axis=-1), (3, 4), rng)


def test_softmax_rows_sum_to_one(rng):
    out = ad.softmax(ad.Tensor(rng.standard_normal((6, 9)) * 30), axis=-1)
    np.testing.assert_allclose(out.data.sum(axis=-1), np.ones(6), atol=1e-6)


def test_masked_nll_matches_manual(rng):
    logits = rng.standard_normal((5, 7))
    targets = rng.integers(0, 7, size=5)
    mask = np.array([1.0, 1.0, 0.0, 1.0, 0.0])
    t = ad.Tensor(logits.copy(), requires_grad=True)
    loss = ad.masked_nll(t, targets, mask)

    p = np.exp(logits - logits.max(axis=-1, keepdims=True))
    p /= p.sum(axis=-1, keepdims=True)
    expect = -(np.log(p[np.arange(5), targets]) * mask).sum() / mask.sum()
    assert loss.item() == pytest.approx(expect, rel=1e-12)

    loss.backward()

    def fn(arr):
        return ad.masked_nll(ad.Tensor(arr), targets, mask).item()

    np.testing.assert_allclose(t.grad, numeric_grad(fn, logits.copy()), rtol=1e-5, atol=1e-9)


def test_masked_positions_get_zero_grad(rng):
    logits = ad.Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    mask = np.array([1.0, 0.0, 1.0, 0.0])
    ad.masked_nll(logits, np.array([0, 1, 2, 1]), mask).backward()
    np.testing.assert_array_equal(logits.grad[1], 0.0)
    np.testing.assert_array_equal(logits.grad[3], 0.0)


def test_loss_scaling_scales_gradients(rng):
    x = rng.standard_normal((3, 3))
    t1 = ad.Tensor(x.copy(), requires_grad=True)
    ad.tsum(ad.mul(ad.relu(t1), 1.0)).backward()
    t2 = ad.Tensor(x.copy(), requires_grad=True)
    ad.tsum(ad.mul(ad.relu(t2), 2.0)).backward()
    np.testing.assert_allclose(t2.grad, 2.0 * t1.grad)


def test_reused_tensor_accumulates(rng):
    t = ad.Tensor(rng.standard_normal((2, 2)), requires_grad=True)
    ad.tsum(ad.add(t, t)).backward()
    np.testing.assert_allclose(t.grad, np.full((2, 2), 2.0))


def test_untracked_graph_raises():
    loss = ad.tsum(ad.mul(ad.Tensor(np.ones(3)), 2.0))
    with pytest.raises(GraphNotRecordedError):
        loss.backward()


def test_no_tape_retained_without_grad():
    out = ad.add(ad.Tensor(np.ones(3)), ad.Tensor(np.ones(3)))
    assert out._parents == ()


def test_dropout_identity_and_scale(rng):
    x = ad.Tensor(np.ones((1000,)))
    assert ad.dropout(x, 0.0, rng) is x
    y = ad.dropout(x, 0.5, np.random.default_rng(0))
    kept = y.data != 0
    assert abs(kept.mean() - 0.5) < 0.06
    np.testing.assert_allclose(y.data[kept], 2.0)
