import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stattn.errors import NumericError, ShapeError
from stattn.numeric import Adam, Tensor, backward, clip_gradients, global_grad_norm, no_grad, ops, parameter
from stattn.numeric.gradcheck import check_gradients, numerical_grad, relative_error

SEEDS = range(20)


def fd_check(build, shapes, seed, tol=1e-4, h=1e-5):
    rng = np.random.default_rng(seed)
    params = [parameter(rng.uniform(-1, 1, s), f"p{i}") for i, s in enumerate(shapes)]
    errors = check_gradients(lambda: build(*params), params, h=h)
    assert max(errors.values()) < tol, errors


# every differentiable op, each reduced to a scalar by a random projection

def _project(t, seed=99):
    w = np.random.default_rng(seed).uniform(-1, 1, t.shape)
    return ops.sum(t * w)


OP_CASES = {
    "add": (lambda a, b: _project(a + b), [(3, 4), (4,)]),
    "sub": (lambda a, b: _project(a - b), [(3, 4), (3, 1)]),
    "mul": (lambda a, b: _project(a * b), [(2, 3, 4), (3, 4)]),
    "matmul": (lambda a, b: _project(a @ b), [(3, 4), (4, 2)]),
    "matmul_batched": (lambda a, b: _project(a @ b), [(2, 3, 4), (4,)]),
    "linear": (lambda x, w, b: _project(ops.linear(x, w, b)), [(5, 3), (4, 3), (4,)]),
    "tanh": (lambda a: _project(ops.tanh(a)), [(3, 4)]),
    "sigmoid": (lambda a: _project(ops.sigmoid(a)), [(3, 4)]),
    "softmax": (lambda a: _project(ops.softmax(a, axis=0)), [(4, 3)]),
    "concat": (lambda a, b: _project(ops.concat([a, b], axis=1)), [(2, 3), (2, 2)]),
    "stack": (lambda a, b: _project(ops.stack([a, b], axis=1)), [(2, 3), (2, 3)]),
    "slice": (lambda a: _project(a[:, 1:3]), [(3, 4)]),
    "fancy_index": (lambda a: _project(a[[0, 0, 2]]), [(3, 4)]),
    "reshape": (lambda a: _project(ops.reshape(a, (6, 2))), [(3, 4)]),
    "transpose": (lambda a: _project(ops.transpose(a)), [(3, 4)]),
    "broadcast": (lambda a: _project(ops.broadcast_to(a, (5, 4))), [(4,)]),
    "scalar_broadcast": (lambda a, s: _project(a * s), [(3, 4), ()]),
    "sum_axis": (lambda a: _project(ops.sum(a, axis=1, keepdims=True)), [(3, 4)]),
    "mean": (lambda a: _project(ops.mean(a, axis=0)), [(3, 4)]),
    "mean_square": (lambda a: ops.mean_square(a), [(3, 4)]),
    "sqrt": (lambda a: _project(ops.sqrt(a * a + 0.5)), [(3, 4)]),
}


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_op_gradients_match_finite_differences(name):
    build, shapes = OP_CASES[name]
    for seed in SEEDS:
        fd_check(build, shapes, seed)


def test_matmul_tanh_mean_square_input_gradient():
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        x = parameter(rng.uniform(-1, 1, (3, 4)), "x")
        w = Tensor(rng.uniform(-1, 1, (4, 2)))
        errors = check_gradients(lambda: ops.mean_square(ops.tanh(x @ w)), [x])
        assert errors["x"] < 1e-6


def test_linear_regression_loss_gradients():
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        W = parameter(rng.uniform(-1, 1, (3, 5)), "W")
        x = Tensor(rng.uniform(-1, 1, (5, 4)))
        y = Tensor(rng.uniform(-1, 1, (3, 4)))
        errors = check_gradients(lambda: ops.mean_square(W @ x - y), [W])
        assert errors["W"] < 1e-6


def test_identity_cases():
    assert np.allclose(ops.softmax(Tensor(np.zeros(3))).data, [1 / 3] * 3, atol=1e-15)
    assert ops.tanh(Tensor(0.0)).data == 0.0
    assert ops.sigmoid(Tensor(0.0)).data == 0.5


def test_sigmoid_is_stable_for_large_inputs():
    out = ops.sigmoid(Tensor(np.array([-1000.0, 1000.0]))).data
    assert np.all(np.isfinite(out))
    assert out[0] == 0.0 and out[1] == 1.0


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6), st.floats(-50, 50))
def test_softmax_sums_to_one(seed, rows, cols, shift):
    x = np.random.default_rng(seed).normal(0, 10, (rows, cols)) + shift
    for axis in (0, 1):
        out = ops.softmax(Tensor(x), axis=axis).data
        assert np.all(out >= 0)
        assert np.allclose(out.sum(axis=axis), 1.0, atol=1e-12, rtol=0)


def test_softmax_rejects_empty_axis():
    with pytest.raises(ShapeError):
        ops.softmax(Tensor(np.zeros((3, 0))), axis=1)


def test_shape_mismatch_reports_both_shapes():
    with pytest.raises(ShapeError, match=r"\(3, 4\).*\(5, 2\)"):
        Tensor(np.zeros((3, 4))) @ Tensor(np.zeros((5, 2)))
    with pytest.raises(ShapeError, match=r"\(3, 4\).*\(2,\)"):
        Tensor(np.zeros((3, 4))) + Tensor(np.zeros(2))


# ------------------------------------------------------------ backward


def test_backward_identity_loss():
    x = parameter(np.array(2.5), "x")
    backward(x)
    assert x.grad == 1.0


def test_unreached_parameter_gets_exact_zero():
    a = parameter(np.ones(3), "a")
    b = parameter(np.ones(3), "b")
    backward(ops.sum(a * 2.0), [a, b])
    assert np.array_equal(a.grad, np.full(3, 2.0))
    assert np.array_equal(b.grad, np.zeros(3))


def test_backward_rejects_non_scalar():
    with pytest.raises(ShapeError):
        backward(parameter(np.ones(2), "v") * 2.0)


def test_leaf_gradients_accumulate_across_calls():
    x = parameter(np.array([1.0, -2.0]), "x")
    backward(ops.sum(x * x))
    backward(ops.sum(x * x))
    assert np.array_equal(x.grad, 4 * x.data)


def test_shared_subexpression_visited_once():
    x = parameter(np.array(3.0), "x")
    y = x * x
    backward(y * y + y)  # d/dx (x^4 + x^2) = 4x^3 + 2x
    assert x.grad == 4 * 27 + 6


def test_grad_shape_matches_data():
    rng = np.random.default_rng(0)
    params = [parameter(rng.normal(size=s), f"p{i}") for i, s in enumerate([(2, 3), (3,), ()])]
    backward(ops.sum(params[0] * params[1] * params[2]), params)
    for p in params:
        assert p.grad.shape == p.data.shape


def test_deep_chain_does_not_recurse():
    x = parameter(np.array(1.0), "x")
    y = x
    for _ in range(5000):
        y = y * 1.0
    backward(y)
    assert x.grad == 1.0


def test_no_grad_builds_no_graph():
    x = parameter(np.ones(2), "x")
    with no_grad():
        y = x * 3.0
    assert y.is_leaf and not y.requires_grad


def test_backward_is_deterministic():
    def grads():
        rng = np.random.default_rng(7)
        w = parameter(rng.normal(size=(6, 5)), "w")
        x = Tensor(rng.normal(size=(4, 5)))
        backward(ops.mean_square(ops.tanh(ops.linear(x, w))), [w])
        return w.grad

    assert np.array_equal(grads(), grads())


# ------------------------------------------------------------ dropout


def test_dropout_identity_at_inference():
    x = Tensor(np.arange(6.0))
    assert ops.dropout(x, 0.7, None, training=False) is x
    assert ops.dropout(x, 1.0, np.random.default_rng(0), training=True) is x


def test_dropout_preserves_expectation():
    rng = np.random.default_rng(3)
    x = Tensor(np.full(20000, 2.0))
    out = ops.dropout(x, 0.7, rng, training=True).data
    assert abs(out.mean() - 2.0) / 2.0 < 0.01
    assert set(np.unique(out)) <= {0.0, 2.0 / 0.7}


def test_dropout_gradient_uses_the_same_mask():
    rng = np.random.default_rng(5)
    x = parameter(np.ones(50), "x")
    out = ops.dropout(x, 0.5, rng, training=True)
    backward(ops.sum(out))
    assert np.array_equal(x.grad, out.data)


# ------------------------------------------------------------ clipping


def _with_grads(grads):
    params = []
    for i, g in enumerate(grads):
        p = parameter(np.zeros_like(g), f"g{i}")
        p.grad = np.array(g, dtype=float)
        params.append(p)
    return params


def test_clip_scales_by_half():
    params = _with_grads([np.array([3.0, 0.0]), np.array([4.0])])
    norm = clip_gradients(params, 2.5)
    assert norm == 5.0
    assert np.array_equal(params[0].grad, [1.5, 0.0]) and np.array_equal(params[1].grad, [2.0])


def test_clip_below_threshold_is_bit_identical():
    g = np.array([0.6, 0.8])
    params = _with_grads([g])
    before = params[0].grad
    clip_gradients(params, 2.5)
    assert params[0].grad is before


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_clip_norm_matches_independent_recomputation(seed, scale):
    rng = np.random.default_rng(seed)
    params = _with_grads([rng.normal(0, scale, s) for s in [(3, 4), (5,), (2, 2, 2)]])
    raw = math.sqrt(sum(float((p.grad ** 2).sum()) for p in params))
    clip_gradients(params, 2.5)
    after = math.sqrt(sum(float(x) ** 2 for p in params for x in p.grad.ravel()))
    assert abs(after - min(raw, 2.5)) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_clip_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    params = _with_grads([rng.normal(0, 3, (4, 4))])
    clip_gradients(params, 2.5)
    once = params[0].grad.copy()
    clip_gradients(params, 2.5)
    assert np.array_equal(params[0].grad, once)


def test_value_clipping_mode():
    params = _with_grads([np.array([-5.0, 1.0, 3.0])])
    clip_gradients(params, 2.5, mode="value")
    assert np.array_equal(params[0].grad, [-2.5, 1.0, 2.5])


def test_clip_rejects_non_finite_and_bad_threshold():
    with pytest.raises(NumericError):
        clip_gradients(_with_grads([np.array([1.0, np.nan])]), 2.5)
    with pytest.raises(ValueError):
        clip_gradients(_with_grads([np.ones(2)]), 0.0)


def test_global_norm():
    assert global_grad_norm(_with_grads([np.array([3.0]), np.array([4.0])])) == 5.0


# ------------------------------------------------------------ Adam


def test_adam_first_step_moves_by_lr():
    x = parameter(np.array(1.0), "x")
    opt = Adam([x], lr=0.001)
    x.grad = np.array(1.0)
    opt.step()
    assert abs((1.0 - x.data) - 0.001 * 1.0 / (1.0 + 1e-8)) < 1e-15
    assert opt.step_count == 1


def test_adam_zero_gradient_leaves_parameter():
    x = parameter(np.array([1.0, 2.0]), "x")
    opt = Adam([x])
    x.grad = np.array([1.0, -1.0])
    opt.step()
    before = x.data.copy()
    m1 = opt.m1["x"].copy()
    x.grad = np.zeros(2)
    opt.step()
    assert np.array_equal(x.data, before - 0.001 * (0.9 * m1 / (1 - 0.9**2)) /
                          (np.sqrt(opt.m2["x"] / (1 - 0.999**2)) + 1e-8))
    assert np.all(np.abs(opt.m1["x"]) < np.abs(m1))


def test_adam_truly_zero_gradient_is_a_no_op():
    x = parameter(np.array([1.0, 2.0]), "x")
    opt = Adam([x])
    x.grad = np.zeros(2)
    opt.step()
    assert np.array_equal(x.data, [1.0, 2.0])


def _reference_adam(x0, grad_fn, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    x, m, v = x0, 0.0, 0.0
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return x


def test_adam_minimises_quadratic():
    x = parameter(np.array(0.0), "x")
    opt = Adam([x], lr=0.1)
    for _ in range(100):
        opt.zero_grad()
        backward(ops.mean_square(x - 3.0), [x])
        opt.step()
    assert abs(float(x.data) - 3.0) < 0.1
    ref = _reference_adam(0.0, lambda v: 2 * (v - 3.0), 0.1, 100)
    assert abs(float(x.data) - ref) < 1e-12


def test_adam_rejects_bad_lr_and_missing_grads():
    x = parameter(np.array(0.0), "x")
    with pytest.raises(ValueError):
        Adam([x], lr=0.0)
    opt = Adam([x])
    with pytest.raises(ValueError, match="no gradient"):
        opt.step()
    x.grad = np.array(1.0)
    with pytest.raises(ValueError):
        opt.step(lr=-1.0)


def test_adam_state_round_trip():
    x = parameter(np.array([1.0, 2.0]), "x")
    opt = Adam([x])
    x.grad = np.array([0.5, -0.5])
    opt.step()
    state = {k: v.copy() for k, v in opt.state_arrays().items()}
    assert set(state) == {"x.m1", "x.m2", "adam.step"}
    other = Adam([x])
    other.load_state_arrays(state)
    assert other.step_count == 1 and np.array_equal(other.m2["x"], opt.m2["x"])


# ------------------------------------------------------------ finite-difference helpers


def test_fourth_order_stencil_is_exact_on_quartic_polynomial():
    x = parameter(np.array([0.3, -0.7]), "x")

    def f():
        return float(np.sum(x.data**3))

    g4 = numerical_grad(f, x, h=1e-2, order=4)
    assert np.allclose(g4, 3 * x.data**2, atol=1e-10)


def test_relative_error_floor():
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error(np.array([1.0]), np.array([1.1])) == pytest.approx(0.1 / 1.1)
