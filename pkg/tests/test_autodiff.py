import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsd.autodiff import (
    Tensor,
    avg_pool1d,
    concat,
    conv1d,
    conv_transpose1d,
    dropout,
    grad_check,
    layer_norm,
    linear,
    max_pool1d,
    relu,
    softmax,
    tape,
)
from tsd.errors import DimensionError, ParameterError, UsageError
from tsd.model.tsd import make_rng

from oracles import conv1d_loops, conv_transpose1d_loops, pool_loops


def T(x, **kw):
    return Tensor(np.asarray(x, dtype=np.float64), **kw)


# -- conv1d -------------------------------------------------------------------


def test_conv1d_difference_kernel():
    out = conv1d(T([[1, 2, 3, 4]]), T([[[1, 0, -1]]]), T([0.0]))
    np.testing.assert_array_equal(out.data, [[-2.0, -2.0]])


def test_conv1d_zero_input_gives_bias():
    rng = np.random.default_rng(0)
    out = conv1d(T(np.zeros((3, 9))), T(rng.normal(size=(2, 3, 3))), T([1.5, -0.5]), 1, 1)
    np.testing.assert_array_equal(out.data, np.array([[1.5] * 9, [-0.5] * 9]))


def test_conv1d_identity_kernel():
    x = np.random.default_rng(1).normal(size=(1, 7))
    np.testing.assert_array_equal(conv1d(T(x), T([[[1.0]]]), T([0.0])).data, x)


def test_conv1d_channel_mismatch_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 5\).*\(1, 3, 3\)"):
        conv1d(T(np.zeros((2, 5))), T(np.zeros((1, 3, 3))), T([0.0]))


@pytest.mark.parametrize("seed", range(10))
def test_conv1d_matches_direct_sum(seed):
    rng = np.random.default_rng(seed)
    c_in, c_out, k = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 5)
    stride, padding = int(rng.integers(1, 3)), int(rng.integers(0, 3))
    length = int(rng.integers(k, 12))
    x, w, b = rng.normal(size=(c_in, length)), rng.normal(size=(c_out, c_in, k)), rng.normal(size=c_out)
    got = conv1d(T(x), T(w), T(b), stride, padding).data
    np.testing.assert_allclose(got, conv1d_loops(x, w, b, stride, padding), atol=1e-12)


def test_conv1d_batched_matches_per_sample():
    rng = np.random.default_rng(3)
    x, w, b = rng.normal(size=(4, 2, 10)), rng.normal(size=(3, 2, 3)), rng.normal(size=3)
    batched = conv1d(T(x), T(w), T(b), 2, 1).data
    for i in range(4):
        np.testing.assert_allclose(batched[i], conv1d(T(x[i]), T(w), T(b), 2, 1).data, atol=1e-14)


# -- conv_transpose1d ---------------------------------------------------------


def test_conv_transpose1d_scatter_example():
    out = conv_transpose1d(T([[1, 2]]), T([[[1, 1]]]), T([0.0]), stride=2)
    np.testing.assert_array_equal(out.data, [[1.0, 1.0, 2.0, 2.0]])


def test_conv_transpose1d_zero_input_is_bias():
    out = conv_transpose1d(T(np.zeros((2, 5))), T(np.ones((2, 3, 3))), T([1.0, 2.0, 3.0]), 2, 1, 1)
    assert out.shape == (3, 10)
    np.testing.assert_array_equal(out.data, np.repeat([[1.0], [2.0], [3.0]], 10, axis=1))


def test_conv_transpose1d_unit_identity():
    x = np.arange(6.0).reshape(1, 6)
    np.testing.assert_array_equal(conv_transpose1d(T(x), T([[[1.0]]]), T([0.0])).data, x)


def test_conv_transpose1d_rejects_large_output_padding():
    with pytest.raises(ParameterError):
        conv_transpose1d(T(np.zeros((1, 4))), T(np.zeros((1, 1, 3))), T([0.0]), stride=2, output_padding=2)


@pytest.mark.parametrize("seed", range(10))
def test_conv_transpose1d_matches_scatter_add(seed):
    rng = np.random.default_rng(100 + seed)
    c_in, c_out, k = rng.integers(1, 4), rng.integers(1, 4), int(rng.integers(1, 5))
    stride = int(rng.integers(1, 4))
    padding = int(rng.integers(0, k))
    op = int(rng.integers(0, stride))
    length = int(rng.integers(2, 9))
    x, w, b = rng.normal(size=(c_in, length)), rng.normal(size=(c_in, c_out, k)), rng.normal(size=c_out)
    if (length - 1) * stride - 2 * padding + k + op < 1:
        pytest.skip("degenerate shape")
    got = conv_transpose1d(T(x), T(w), T(b), stride, padding, op).data
    np.testing.assert_allclose(got, conv_transpose1d_loops(x, w, b, stride, padding, op), atol=1e-12)


@pytest.mark.parametrize("length", range(4, 513))
def test_conv_shape_law_round_trip(length):
    x = T(np.ones((1, length)))
    k, stride, padding = 3, 2, 1
    down = conv1d(x, T(np.ones((1, 1, k))), None, stride, padding)
    base = (down.shape[-1] - 1) * stride - 2 * padding + k
    up = conv_transpose1d(down, T(np.ones((1, 1, k))), None, stride, padding, length - base)
    assert up.shape[-1] == length


@pytest.mark.parametrize("seed", range(5))
def test_conv_adjointness(seed):
    rng = np.random.default_rng(seed)
    c_in, c_out, k, stride, padding = 3, 2, 3, 2, 1
    length = 11
    w = rng.normal(size=(c_out, c_in, k))
    u = rng.normal(size=(c_in, length))
    y = conv1d(T(u), T(w), None, stride, padding)
    v = rng.normal(size=y.shape)
    base = (y.shape[-1] - 1) * stride - 2 * padding + k
    back = conv_transpose1d(T(v), T(w), None, stride, padding, length - base)
    assert abs(np.sum(y.data * v) - np.sum(u * back.data)) < 1e-10


# -- pooling ------------------------------------------------------------------


def test_max_pool_example():
    np.testing.assert_array_equal(max_pool1d(T([[1, 3, 2, 5]]), 3, 2, 1).data, [[3.0, 5.0]])


def test_max_pool_constant():
    np.testing.assert_array_equal(max_pool1d(T(np.full((2, 9), 4.0)), 3, 2, 1).data, np.full((2, 5), 4.0))


def test_max_pool_monotone_picks_window_last():
    x = np.arange(8.0)[None]
    np.testing.assert_array_equal(max_pool1d(T(x), 3, 1, 0).data, x[:, 2:])


def test_max_pool_tie_routes_to_first_index():
    x = T([[2.0, 2.0, 2.0]], requires_grad=True)
    max_pool1d(x, 3, 1, 0).sum().backward()
    np.testing.assert_array_equal(x.grad, [[1.0, 0.0, 0.0]])


def test_pool_rejects_all_padding_window():
    with pytest.raises(ParameterError):
        max_pool1d(T(np.zeros((1, 4))), 3, 1, 2)
    with pytest.raises(ParameterError):
        avg_pool1d(T(np.zeros((1, 1))), 5, 1, 1)


def test_avg_pool_example_and_trivia():
    np.testing.assert_array_equal(avg_pool1d(T([[2, 4, 6]]), 3, 1, 0).data, [[4.0]])
    np.testing.assert_array_equal(avg_pool1d(T(np.full((1, 6), 3.0)), 3, 1, 0).data, np.full((1, 4), 3.0))
    np.testing.assert_array_equal(avg_pool1d(T(np.zeros((2, 6))), 3, 2, 1).data, np.zeros((2, 3)))


def test_avg_pool_backward_is_uniform():
    x = T(np.random.default_rng(0).normal(size=(1, 6)), requires_grad=True)
    avg_pool1d(x, 3, 3, 0).sum().backward()
    np.testing.assert_allclose(x.grad, np.full((1, 6), 1 / 3))


@pytest.mark.parametrize("kind", ["max", "average"])
@pytest.mark.parametrize("seed", range(6))
def test_pool_matches_loops(kind, seed):
    rng = np.random.default_rng(seed)
    kernel = int(rng.integers(1, 5))
    stride = int(rng.integers(1, 4))
    padding = int(rng.integers(0, kernel // 2 + 1))
    x = rng.normal(size=(2, int(rng.integers(kernel, 13))))
    fn = max_pool1d if kind == "max" else avg_pool1d
    np.testing.assert_allclose(fn(T(x), kernel, stride, padding).data, pool_loops(x, kernel, stride, padding, kind), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 40))
def test_max_pool_backward_partitions_gradient(seed, length):
    rng = np.random.default_rng(seed)
    x = T(rng.normal(size=(2, length)), requires_grad=True)
    y = max_pool1d(x, 3, 2, 1)
    g = rng.normal(size=y.shape)
    (y * T(g)).sum().backward()
    assert np.isclose(x.grad.sum(), g.sum(), atol=1e-12)


# -- elementwise, norm, softmax -----------------------------------------------


def test_relu_cases():
    np.testing.assert_array_equal(relu(T([-1, 0, 2])).data, [0, 0, 2])
    np.testing.assert_array_equal(relu(T([-3, -1])).data, [0, 0])
    np.testing.assert_array_equal(relu(T([1, 4])).data, [1, 4])


def test_relu_subgradient_at_zero():
    x = T([0.0, 1.0], requires_grad=True)
    relu(x).sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_dropout_identity_cases():
    x = T(np.random.default_rng(0).normal(size=(5, 5)))
    assert dropout(x, 0.0, True, make_rng(1)) is x
    assert dropout(x, 0.3, False, make_rng(1)) is x


def test_dropout_rejects_rate_one():
    with pytest.raises(ParameterError):
        dropout(T([1.0]), 1.0, True, make_rng(0))


def test_dropout_survivor_statistics():
    out = dropout(T(np.ones(100_000)), 0.5, True, make_rng(7)).data
    survivors = out[out != 0]
    assert abs(survivors.size / out.size - 0.5) < 0.02
    assert np.all(survivors == 2.0)


def test_dropout_seed_reproducible():
    x = T(np.ones((10, 10)))
    a = dropout(x, 0.3, True, make_rng(5)).data
    b = dropout(x, 0.3, True, make_rng(5)).data
    assert a.tobytes() == b.tobytes()


def test_layer_norm_example():
    out = layer_norm(T([1, 2, 3]), T(np.ones(3)), T(np.zeros(3)), eps=1e-12)
    np.testing.assert_allclose(out.data, [-np.sqrt(1.5), 0.0, np.sqrt(1.5)], atol=1e-9)


def test_layer_norm_constant_row_returns_shift():
    out = layer_norm(T(np.full((2, 4), 3.0)), T(np.ones(4)), T(np.full(4, 0.25)))
    np.testing.assert_allclose(out.data, 0.25)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_layer_norm_moments(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(scale=100.0, size=(6, 16))  # variance far above eps
    out = layer_norm(T(x), T(np.ones(16)), T(np.zeros(16))).data
    assert np.all(np.abs(out.mean(axis=-1)) < 1e-10)
    assert np.all(np.abs(out.var(axis=-1) - 1.0) < 1e-6)


def test_linear_cases():
    x = T([1.0, 2.0])
    np.testing.assert_array_equal(linear(x, T(np.eye(2)), T(np.zeros(2))).data, [1, 2])
    np.testing.assert_array_equal(linear(x, T(np.zeros((2, 2))), T([4.0, 5.0])).data, [4, 5])
    np.testing.assert_array_equal(linear(x, T([[1, 1], [1, -1]]), T([0.0, 0.0])).data, [3, -1])
    with pytest.raises(DimensionError):
        linear(T(np.zeros(3)), T(np.zeros((2, 2))), T(np.zeros(2)))


def test_softmax_cases():
    np.testing.assert_array_equal(softmax(T([0.0, 0.0])).data, [0.5, 0.5])
    np.testing.assert_allclose(softmax(T([5.0, 5.0 + 800.0])).data, [0.0, 1.0])
    np.testing.assert_allclose(softmax(T([1.0, 2.0, 3.0])).data, [0.09003, 0.24473, 0.66524], atol=5e-6)
    e = np.exp([1.0, 2.0, 3.0])
    np.testing.assert_allclose(softmax(T([1.0, 2.0, 3.0])).data, e / e.sum(), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_softmax_rows_are_distributions(seed):
    x = np.random.default_rng(seed).normal(scale=30.0, size=(5, 7))
    y = softmax(T(x)).data
    assert np.all(y >= 0)
    assert np.all(np.abs(y.sum(axis=-1) - 1.0) <= 1e-12)


def test_concat_cases():
    np.testing.assert_array_equal(concat([T([[1, 2]]), T([[3, 4]])]).data, [[1, 2], [3, 4]])
    x = T(np.ones((2, 3)))
    np.testing.assert_array_equal(concat([x, T(np.zeros((0, 3)))]).data, x.data)
    assert concat([T(np.zeros((2, 5))), T(np.zeros((3, 5)))]).shape == (5, 5)
    with pytest.raises(DimensionError, match=r"\(1, 4\).*\(1, 5\)"):
        concat([T(np.zeros((1, 4))), T(np.zeros((1, 5)))])


def test_concat_backward_splits():
    a, b = T(np.zeros((1, 2)), requires_grad=True), T(np.zeros((2, 2)), requires_grad=True)
    out = concat([a, b])
    (out * T(np.arange(6.0).reshape(3, 2))).sum().backward()
    np.testing.assert_array_equal(a.grad, [[0, 1]])
    np.testing.assert_array_equal(b.grad, [[2, 3], [4, 5]])


# -- tape and backward --------------------------------------------------------


def test_backward_square():
    x = T(3.0, requires_grad=True)
    (x * x).backward()
    assert x.grad == 6.0


def test_backward_relu_sum():
    x = T([-1.0, 2.0], requires_grad=True)
    relu(x).sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_backward_non_scalar_root():
    x = T([1.0, 2.0], requires_grad=True)
    with pytest.raises(UsageError):
        (x * 2.0).backward()


def test_gradients_accumulate_on_shared_inputs_and_across_calls():
    x = T(2.0, requires_grad=True)
    (x * x + x).backward()
    assert x.grad == 5.0
    (x * x + x).backward()
    assert x.grad == 10.0


def test_requires_grad_false_never_accumulates():
    x = T([1.0, 2.0])
    w = T([3.0, 4.0], requires_grad=True)
    (x * w).sum().backward()
    assert x.grad is None
    np.testing.assert_array_equal(w.grad, [1.0, 2.0])


def test_tape_is_topological():
    x = T(np.ones(3), requires_grad=True)
    y = relu(x * 2.0).sum() + x.sum()
    nodes = tape(y)
    position = {id(n): i for i, n in enumerate(nodes)}
    for n in nodes:
        for inp in n.inputs:
            if inp._node is not None:
                assert position[id(inp._node)] < position[id(n)]


# -- gradient checks ----------------------------------------------------------


def test_grad_check_quadratic():
    assert grad_check(lambda x: (x * x).sum(), np.random.default_rng(0).normal(size=10)) < 1e-8


def test_grad_check_conv_relu():
    rng = np.random.default_rng(1)
    w, b = T(rng.normal(size=(4, 3, 3))), T(rng.normal(size=4))
    err = grad_check(lambda x: relu(conv1d(x, w, b, 1, 1)).sum(), rng.normal(size=(3, 8)))
    assert err < 1e-4


def _random_primitive_case(name, rng):
    """Scalar function of one input tensor plus the evaluation point."""
    proj = None

    def weigh(y):
        nonlocal proj
        if proj is None:
            proj = T(rng.normal(size=y.shape))
        return (y * proj).sum()

    c = int(rng.integers(1, 4))
    length = int(rng.integers(4, 12))
    if name == "conv1d":
        k, s, p = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(0, 2))
        w, b = T(rng.normal(size=(2, c, k))), T(rng.normal(size=2))
        return (lambda x: weigh(conv1d(x, w, b, s, p))), rng.normal(size=(c, length))
    if name == "conv1d_weight":
        x = T(rng.normal(size=(c, length)))
        b = T(rng.normal(size=2))
        return (lambda w: weigh(conv1d(x, w, b, 2, 1))), rng.normal(size=(2, c, 3))
    if name == "conv_transpose1d":
        w, b = T(rng.normal(size=(c, 2, 3))), T(rng.normal(size=2))
        return (lambda x: weigh(conv_transpose1d(x, w, b, 2, 1, 1))), rng.normal(size=(c, length))
    if name == "conv_transpose1d_weight":
        x = T(rng.normal(size=(c, length)))
        return (lambda w: weigh(conv_transpose1d(x, w, None, 2, 1, 0))), rng.normal(size=(c, 3, 3))
    if name == "max_pool1d":
        return (lambda x: weigh(max_pool1d(x, 3, 2, 1))), rng.normal(size=(c, length))
    if name == "avg_pool1d":
        return (lambda x: weigh(avg_pool1d(x, 3, 2, 1))), rng.normal(size=(c, length))
    if name == "relu":
        return (lambda x: weigh(relu(x))), rng.normal(size=(c, length))
    if name == "layer_norm":
        g, s = T(rng.normal(size=length)), T(rng.normal(size=length))
        return (lambda x: weigh(layer_norm(x, g, s))), rng.normal(size=(c, length))
    if name == "layer_norm_gain":
        x = T(rng.normal(size=(c, length)))
        s = T(rng.normal(size=length))
        return (lambda g: weigh(layer_norm(x, g, s))), rng.normal(size=length)
    if name == "linear":
        w, b = T(rng.normal(size=(3, length))), T(rng.normal(size=3))
        return (lambda x: weigh(linear(x, w, b))), rng.normal(size=(c, length))
    if name == "linear_weight":
        x = T(rng.normal(size=(c, length)))
        return (lambda w: weigh(linear(x, w, None))), rng.normal(size=(3, length))
    if name == "softmax":
        return (lambda x: weigh(softmax(x))), rng.normal(size=(c, length))
    if name == "concat":
        other = T(rng.normal(size=(2, length)))
        return (lambda x: weigh(concat([x, other]))), rng.normal(size=(c, length))
    if name == "matmul":
        other = T(rng.normal(size=(length, 3)))
        return (lambda x: weigh(x @ other)), rng.normal(size=(c, length))
    if name == "dropout_eval":
        return (lambda x: weigh(dropout(x, 0.4, False))), rng.normal(size=(c, length))
    if name == "abs":
        return (lambda x: weigh(x.abs())), rng.normal(size=(c, length))
    raise KeyError(name)


PRIMITIVES = [
    "conv1d",
    "conv1d_weight",
    "conv_transpose1d",
    "conv_transpose1d_weight",
    "max_pool1d",
    "avg_pool1d",
    "relu",
    "layer_norm",
    "layer_norm_gain",
    "linear",
    "linear_weight",
    "softmax",
    "concat",
    "matmul",
    "dropout_eval",
    "abs",
]


@pytest.mark.parametrize("name", PRIMITIVES)
def test_primitive_grad_check_on_twenty_shapes(name):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    worst = 0.0
    for _ in range(20):
        fn, point = _random_primitive_case(name, rng)
        worst = max(worst, grad_check(fn, point))
    assert worst < 1e-4, f"{name}: {worst}"


def test_dropout_train_mode_gradient_uses_same_mask():
    x = T(np.ones(50), requires_grad=True)
    y = dropout(x, 0.5, True, make_rng(3))
    y.sum().backward()
    np.testing.assert_array_equal(x.grad, y.data)
