import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from s2fgl import autodiff as ad

from conftest import check_gradients


def P(x):
    return ad.Parameter(np.asarray(x, dtype=float))


def test_matmul_identity_and_hand_product():
    m = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(ad.matmul(np.eye(2), m).value, m)
    assert ad.matmul([[1.0, 2.0]], [[3.0], [4.0]]).item() == 11.0


def test_matmul_shape_error():
    with pytest.raises(ad.ShapeError):
        ad.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    a, b = P(rng.standard_normal((4, 5))), P(rng.standard_normal((5, 3)))
    err = check_gradients(lambda t, l: ad.total(ad.matmul(l[0], l[1])), [a, b], tol=1e-6)
    assert err < 1e-6


def test_softmax_rows_values():
    np.testing.assert_allclose(ad.softmax_rows([[0.0, 0.0]]).value, [[0.5, 0.5]])
    s = ad.softmax_rows([[1000.0, 0.0]]).value
    assert np.isfinite(s).all()
    np.testing.assert_allclose(s, [[1.0, 0.0]], atol=1e-300)


def test_softmax_jvp_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = P(rng.standard_normal((3, 4)))
    w = rng.standard_normal((3, 4))
    check_gradients(lambda t, l: ad.total(ad.mul(ad.softmax_rows(l[0]), w)), [x], tol=1e-5)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 6), elements=st.floats(-50, 50)))
def test_softmax_rows_sum_to_one(x):
    s = ad.softmax_rows(x).value
    np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-12)
    assert (s >= 0).all() and (s <= 1).all()


def test_kl_rows_closed_forms():
    p = ad.softmax_rows([[0.3, -1.0, 2.0]]).value
    assert ad.kl_rows(p, p).item() == pytest.approx(0.0, abs=1e-15)
    assert ad.kl_rows([[1.0, 0.0]], [[0.5, 0.5]]).item() == pytest.approx(np.log(2), abs=1e-12)


def test_kl_rows_shape_error():
    with pytest.raises(ad.ShapeError):
        ad.kl_rows(np.ones((2, 2)) / 2, np.ones((2, 3)) / 3)


def test_kl_gradient_through_logits():
    rng = np.random.default_rng(2)
    z = P(rng.standard_normal((5, 4)))
    q = ad.softmax_rows(rng.standard_normal((5, 4))).value
    check_gradients(lambda t, l: ad.kl_rows(ad.softmax_rows(l[0]), q), [z])


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, (3, 5), elements=st.floats(-20, 20)),
    arrays(np.float64, (3, 5), elements=st.floats(-20, 20)),
)
def test_kl_rows_non_negative(a, b):
    p = ad.softmax_rows(a).value
    q = ad.softmax_rows(b).value
    assert ad.kl_rows(p, q).item() >= -1e-12
    assert ad.kl_rows(p, p).item() == pytest.approx(0.0, abs=1e-12)


def test_mse_values_and_gradient():
    assert ad.mse([[1.0, 2.0]], [[1.0, 2.0]]).item() == 0.0
    assert ad.mse([[2.0]], [[0.0]]).item() == 4.0
    rng = np.random.default_rng(3)
    a, b = P(rng.standard_normal((3, 3))), P(rng.standard_normal((3, 3)))
    check_gradients(lambda t, l: ad.mse(l[0], l[1]), [a, b])


def test_cross_entropy_values():
    assert ad.cross_entropy(np.zeros((4, 7)), [0, 1, 2, 3], np.ones(4, bool)).item() == pytest.approx(np.log(7))
    logits = np.array([[1e4, 0.0, 0.0]])
    assert ad.cross_entropy(logits, [0], [True]).item() == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_errors():
    with pytest.raises(ValueError):
        ad.cross_entropy(np.zeros((3, 2)), [0, 1, 0], np.zeros(3, bool))
    with pytest.raises(ValueError):
        ad.cross_entropy(np.zeros((2, 2)), [0, 2], np.ones(2, bool))


def test_cross_entropy_gradient():
    rng = np.random.default_rng(4)
    z = P(rng.standard_normal((6, 4)))
    labels = rng.integers(0, 4, 6)
    mask = np.array([1, 0, 1, 1, 0, 1], bool)
    check_gradients(lambda t, l: ad.cross_entropy(l[0], labels, mask), [z])


def test_cosine_sim_rows_conventions():
    b = np.array([[1.0, 2.0], [-2.0, 1.0]])
    a = np.array([[1.0, 2.0], [0.0, 0.0]])
    s = ad.cosine_sim_rows(a, b).value
    assert s[0, 0] == pytest.approx(1.0)
    assert s[0, 1] == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_array_equal(s[1], [0.0, 0.0])
    assert (ad.cosine_sim_rows(a, np.zeros((1, 2))).value == 0).all()


def test_cosine_sim_gradient():
    rng = np.random.default_rng(5)
    a = P(rng.standard_normal((4, 3)))
    b = rng.standard_normal((5, 3))
    w = rng.standard_normal((4, 5))
    check_gradients(lambda t, l: ad.total(ad.mul(ad.cosine_sim_rows(l[0], b), w)), [a])


def test_backward_simple_closed_forms():
    w = P(np.arange(6.0).reshape(2, 3))
    tape = ad.Tape()
    tape.backward(ad.total(tape.watch(w)))
    np.testing.assert_array_equal(w.grad, np.ones((2, 3)))
    w.zero_grad()
    tape = ad.Tape()
    x = tape.watch(w)
    tape.backward(ad.total(ad.mul(x, x)))
    np.testing.assert_array_equal(w.grad, 2 * w.value)


def test_backward_rejects_non_scalar():
    w = P(np.ones((2, 2)))
    tape = ad.Tape()
    with pytest.raises(ad.ShapeError):
        tape.backward(ad.scale(tape.watch(w), 2.0))


def test_reused_node_accumulates():
    w = P([[3.0]])
    tape = ad.Tape()
    x = tape.watch(w)
    y = ad.mul(x, x)
    tape.backward(ad.add(y, y))
    assert w.grad[0, 0] == pytest.approx(12.0)


def test_stop_gradient_blocks_flow():
    w = P([[2.0]])
    tape = ad.Tape()
    x = tape.watch(w)
    tape.backward(ad.mul(x, ad.stop_gradient(x)))
    assert w.grad[0, 0] == 2.0


def test_non_finite_is_an_error():
    with np.errstate(over="ignore"), pytest.raises(ad.NonFiniteError):
        ad.scale([[1e308]], 10.0)


def test_gradients_are_deterministic():
    rng = np.random.default_rng(6)
    x0 = rng.standard_normal((5, 4))
    grads = []
    for _ in range(2):
        w = P(x0)
        tape = ad.Tape()
        tape.backward(ad.kl_rows(ad.softmax_rows(tape.watch(w)), np.full((5, 4), 0.25)))
        grads.append(w.grad.tobytes())
    assert grads[0] == grads[1]


def test_sgd_step():
    p = P([[1.0]])
    ad.sgd_step([p], 0.1)
    assert p.value[0, 0] == 1.0
    p.grad = np.array([[1.0]])
    ad.sgd_step([p], 0.1)
    assert p.value[0, 0] == pytest.approx(0.9)
    with pytest.raises(ValueError):
        ad.sgd_step([p], -1.0)


def test_sgd_on_quadratic_matches_closed_form():
    # f(p) = 0.5 * c * p^2: after k steps p_k = (1 - lr c)^k p_0
    c, lr, p0 = 3.0, 0.1, 2.0
    p = P([[p0]])
    for _ in range(2):
        p.zero_grad()
        tape = ad.Tape()
        x = tape.watch(p)
        tape.backward(ad.scale(ad.mul(x, x), 0.5 * c))
        ad.sgd_step([p], lr)
    assert p.value[0, 0] == pytest.approx((1 - lr * c) ** 2 * p0)
    # one step at the summed displacement differs since the gradient is not constant
    assert p.value[0, 0] != pytest.approx(p0 - 2 * lr * c * p0)
    # with a constant gradient the two agree
    q = P([[p0]])
    for _ in range(2):
        q.grad = np.array([[c]])
        ad.sgd_step([q], lr)
    assert q.value[0, 0] == pytest.approx(p0 - 2 * lr * c)


def test_weight_decay():
    p = P([[2.0]])
    ad.sgd_step([p], 0.5, weight_decay=0.1)
    assert p.value[0, 0] == pytest.approx(2.0 - 0.5 * 0.2)
