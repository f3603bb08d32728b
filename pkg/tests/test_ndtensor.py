"""Tensor ops, backward passes, Adam and the gradient checker."""

import math

import numpy as np
import pytest

from skin.errors import ContractError, DimensionError, EmptyInputError, NonFiniteError
from skin.ndtensor import Adam, AdamState, Tensor, adam_step, allocation_counter, grad_check, ops


def weighted_sum_objective(forward, backward, inputs, rng, out_shape):
    """loss = Σ w·forward(); backward receives w and accumulates into inputs."""
    weights = rng.normal(size=out_shape)

    def f():
        out = forward()
        loss = float((weights * out.data).sum())

        def run_backward():
            for tensor, grad in zip(inputs, backward(weights, out)):
                tensor.accumulate_grad(grad)
        return loss, run_backward
    return f


# =============================================================================
# Products
# =============================================================================

def test_matmul_identity_and_hand_case():
    eye = Tensor(np.eye(2))
    m = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(ops.matmul(eye, m).data, m.data)
    assert ops.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]])).data.tolist() == [[11.0]]


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError) as info:
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    assert "(2, 3)" in str(info.value)


def test_matmul_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    a = Tensor(rng.normal(size=(3, 4)))
    b = Tensor(rng.normal(size=(4, 2)))
    f = weighted_sum_objective(
        lambda: ops.matmul(a, b),
        lambda g, out: ops.matmul_backward(g, a, b),
        [a, b], rng, (3, 2),
    )
    assert grad_check(f, [a, b]) < 1e-6


def test_linear_gradient():
    rng = np.random.default_rng(1)
    x = Tensor(rng.normal(size=(2, 3, 4)))
    w = Tensor(rng.normal(size=(5, 4)))
    b = Tensor(rng.normal(size=(5,)))
    f = weighted_sum_objective(
        lambda: ops.linear(x, w, b),
        lambda g, out: ops.linear_backward(g, x, w),
        [x, w, b], rng, (2, 3, 5),
    )
    assert grad_check(f, [x, w, b]) < 1e-6


# =============================================================================
# Softmax / layer norm
# =============================================================================

def test_row_softmax_examples():
    assert np.allclose(ops.row_softmax(Tensor([[0.0, 0.0]])).data, [[0.5, 0.5]])
    for c in (-3.0, 0.0, 17.5):
        out = ops.row_softmax(Tensor([[c, c + math.log(3.0)]])).data
        assert np.allclose(out, [[0.25, 0.75]], atol=1e-12)
    stable = ops.row_softmax(Tensor([[1000.0, 0.0]])).data
    assert np.all(np.isfinite(stable))
    assert stable[0, 0] == pytest.approx(1.0)
    assert stable[0, 1] == pytest.approx(0.0, abs=1e-300)


def test_row_softmax_rows_sum_to_one_and_shift_invariant():
    rng = np.random.default_rng(2)
    x = rng.uniform(-50, 50, size=(1000, 6))
    y = ops.row_softmax(Tensor(x)).data
    assert np.all(np.abs(y.sum(axis=1) - 1.0) < 1e-9)
    shifted = ops.row_softmax(Tensor(x + rng.normal())).data
    assert np.allclose(y, shifted, atol=1e-12, rtol=0)


def test_row_softmax_keep_mask_zeroes_dropped_entries():
    out = ops.row_softmax(Tensor([[1.0, 2.0, 3.0]]), keep=np.array([[True, False, True]])).data
    assert out[0, 1] == 0.0
    assert out.sum() == pytest.approx(1.0)


def test_row_softmax_gradient():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(4, 5)))
    f = weighted_sum_objective(
        lambda: ops.row_softmax(x),
        lambda g, out: [ops.row_softmax_backward(g, out)],
        [x], rng, (4, 5),
    )
    assert grad_check(f, [x]) < 1e-4


def test_layer_norm_examples():
    gain, bias = Tensor([1.0, 1.0]), Tensor([0.0, 0.0])
    assert np.allclose(ops.layer_norm(Tensor([[1.0, 3.0]]), gain, bias).data, [[-1.0, 1.0]], atol=1e-4)
    flat = ops.layer_norm(Tensor([[5.0, 5.0, 5.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
    assert np.array_equal(flat.data, np.zeros((1, 3)))


def test_layer_norm_gradient():
    rng = np.random.default_rng(4)
    x = Tensor(rng.normal(size=(3, 6)))
    gain = Tensor(rng.normal(size=(6,)))
    bias = Tensor(rng.normal(size=(6,)))
    f = weighted_sum_objective(
        lambda: ops.layer_norm(x, gain, bias),
        lambda g, out: ops.layer_norm_backward(g, x, gain),
        [x, gain, bias], rng, (3, 6),
    )
    assert grad_check(f, [x, gain, bias]) < 1e-4


# =============================================================================
# Pooling and attention
# =============================================================================

def test_mean_pool_examples():
    assert np.array_equal(ops.mean_pool(Tensor([[1.0, 2.0]])).data, [1.0, 2.0])
    assert np.array_equal(ops.mean_pool(Tensor([[1.0, 3.0], [3.0, 5.0]])).data, [2.0, 4.0])
    assert np.allclose(ops.mean_pool(Tensor([[1.0, -2.0], [-1.0, 2.0]])).data, 0.0)


def test_mean_pool_matches_column_means():
    x = np.random.default_rng(5).normal(size=(5, 3))
    assert np.allclose(ops.mean_pool(Tensor(x)).data, x.mean(axis=0), atol=1e-12)


def test_mean_pool_with_keep_mask():
    x = Tensor([[1.0, 1.0], [3.0, 3.0], [100.0, 100.0]])
    out = ops.mean_pool(x, keep=np.array([True, True, False]))
    assert np.array_equal(out.data, [2.0, 2.0])


def test_pooling_empty_input_rejected():
    with pytest.raises(EmptyInputError):
        ops.mean_pool(Tensor(np.zeros((0, 3))))
    with pytest.raises(EmptyInputError):
        ops.max_pool(Tensor(np.ones((2, 3))), keep=np.array([False, False]))


def test_max_pool_matches_column_max():
    x = np.random.default_rng(6).normal(size=(6, 4))
    assert np.array_equal(ops.max_pool(Tensor(x)).data, x.max(axis=0))


def test_pool_gradients():
    rng = np.random.default_rng(7)
    x = Tensor(rng.normal(size=(2, 5, 3)))
    keep = np.array([[True, True, False, True, True], [True, False, True, True, True]])
    f_mean = weighted_sum_objective(
        lambda: ops.mean_pool(x, keep),
        lambda g, out: [ops.mean_pool_backward(g, x, keep)],
        [x], rng, (2, 3),
    )
    assert grad_check(f_mean, [x]) < 1e-6
    f_max = weighted_sum_objective(
        lambda: ops.max_pool(x),
        lambda g, out: [ops.max_pool_backward(g, x)],
        [x], rng, (2, 3),
    )
    assert grad_check(f_max, [x]) < 1e-4


def test_self_attention_examples():
    row = Tensor([[0.3, -1.2, 2.0]])
    assert np.allclose(ops.self_attention(row).data, row.data)

    same = Tensor(np.tile([1.0, 2.0, -0.5], (4, 1)))
    assert np.allclose(ops.self_attention(same).data, same.data)

    out = ops.self_attention(Tensor([[1.0, 0.0], [0.0, 1.0]])).data
    assert out[0] == pytest.approx([0.6698, 0.3302], abs=1e-4)


def test_self_attention_rows_within_input_envelope():
    k = np.random.default_rng(8).normal(size=(7, 4))
    out = ops.self_attention(Tensor(k)).data
    assert np.all(out >= k.min(axis=0) - 1e-12)
    assert np.all(out <= k.max(axis=0) + 1e-12)


def test_self_attention_gradient():
    rng = np.random.default_rng(9)
    k = Tensor(rng.normal(size=(5, 4)))
    f = weighted_sum_objective(
        lambda: ops.self_attention(k),
        lambda g, out: [ops.self_attention_backward(g, k)],
        [k], rng, (5, 4),
    )
    assert grad_check(f, [k]) < 1e-4


# =============================================================================
# Loss
# =============================================================================

def test_cross_entropy_examples():
    assert ops.cross_entropy(Tensor([1.0, 0.0, 0.0]), Tensor([1.0, 0.0, 0.0])) == pytest.approx(0.0, abs=1e-12)
    rest = (1.0 - 1.0 / math.e) / 2.0
    pred = Tensor([1.0 / math.e, rest, rest])
    assert ops.cross_entropy(pred, Tensor([1.0, 0.0, 0.0])) == pytest.approx(1.0)
    uniform = Tensor(np.full(3, 1.0 / 3.0))
    assert ops.cross_entropy(uniform, Tensor([0.8, 0.2, 0.2])) == pytest.approx(1.2 * math.log(3.0))


def test_cross_entropy_contracts():
    with pytest.raises(DimensionError):
        ops.cross_entropy(Tensor([0.5, 0.5]), Tensor([1.0, 0.0, 0.0]))
    with pytest.raises(ContractError):
        ops.cross_entropy(Tensor([0.7, 0.7]), Tensor([1.0, 0.0]))


def test_cross_entropy_batch_is_row_mean():
    pred = Tensor([[0.5, 0.5], [0.25, 0.75]])
    target = Tensor([[1.0, 0.0], [0.0, 1.0]])
    expected = (math.log(2.0) - math.log(0.75)) / 2.0
    assert ops.cross_entropy(pred, target) == pytest.approx(expected)


# =============================================================================
# Tensor, Adam, grad_check
# =============================================================================

def test_tensor_rejects_non_finite_values():
    with pytest.raises(NonFiniteError):
        Tensor([1.0, float("nan")], name="w")


def test_allocation_counter_tracks_peak():
    counter = allocation_counter()
    counter.reset()
    base = counter.live
    t = Tensor(np.zeros(1000))
    assert counter.peak >= base + 1000
    del t
    counter.reset()
    assert counter.peak == counter.live
    assert set(vars(counter)) == {"live", "peak"}


def test_adam_first_step_moves_by_learning_rate():
    param = Tensor([2.0])
    param.grad = np.array([4.0])
    state = AdamState.zeros_like(param)
    adam_step(param, state, lr=0.1, eps=1e-8)
    assert param.data[0] == pytest.approx(1.9, abs=1e-6)
    assert state.t == 1


def test_adam_zero_gradient_keeps_parameter():
    param = Tensor([2.0])
    param.zero_grad()
    state = AdamState.zeros_like(param)
    adam_step(param, state, lr=0.1)
    assert param.data[0] == 2.0
    assert state.t == 1


def test_adam_two_steps_match_hand_unroll():
    lr, b1, b2, eps, g = 0.01, 0.9, 0.99, 1e-8, 0.5
    param = Tensor([1.0])
    state = AdamState.zeros_like(param)
    expected, m, v = 1.0, 0.0, 0.0
    for t in (1, 2):
        param.grad = np.array([g])
        adam_step(param, state, lr, b1, b2, eps)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        expected -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
    assert param.data[0] == pytest.approx(expected, abs=1e-9)


def test_adam_missing_gradient_is_contract_error():
    param = Tensor([1.0], name="w")
    with pytest.raises(ContractError):
        adam_step(param, AdamState.zeros_like(param), lr=0.1)


def test_adam_state_roundtrip():
    params = {"a": Tensor([1.0, 2.0]), "b": Tensor([[3.0]])}
    opt = Adam(params, lr=0.1)
    for p in params.values():
        p.grad = np.ones_like(p.data)
    opt.step()
    other = Adam({k: v.copy() for k, v in params.items()}, lr=0.1)
    other.load_state(opt.state_arrays(), opt.steps())
    assert other.steps() == {"a": 1, "b": 1}
    assert np.array_equal(other.states["a"].m, opt.states["a"].m)


def test_identical_adam_runs_are_bit_identical():
    def run():
        init = np.random.default_rng(12)
        params = {"w": Tensor(init.normal(size=(4, 3))), "b": Tensor(init.normal(size=3))}
        opt = Adam(params, lr=0.05)
        for step in range(25):
            grads = np.random.default_rng([12, step])
            for name in opt.names():
                params[name].grad = grads.normal(size=params[name].shape)
            opt.step()
        return params, opt

    (first, first_opt), (second, second_opt) = run(), run()
    for name in first:
        assert first[name].data.tobytes() == second[name].data.tobytes()
        assert first_opt.states[name].m.tobytes() == second_opt.states[name].m.tobytes()
        assert first_opt.states[name].v.tobytes() == second_opt.states[name].v.tobytes()
    assert first_opt.steps() == second_opt.steps() == {"b": 25, "w": 25}


def test_grad_check_sum_of_squares():
    x = Tensor(np.random.default_rng(10).normal(size=(3, 3)))

    def f():
        return float((x.data ** 2).sum()), lambda: x.accumulate_grad(2.0 * x.data)
    assert grad_check(f, [x]) < 1e-8


def test_grad_check_flags_broken_backward():
    x = Tensor(np.random.default_rng(11).normal(size=(4,)))

    def f():
        return float((x.data ** 2).sum()), lambda: x.accumulate_grad(3.0 * x.data)
    assert grad_check(f, [x]) > 1e-2
