import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abconv.cost_model import ConvSpec, cost_abconv, cost_abconv_exp
from abconv.errors import NonDivisibleGroup, ShapeMismatch
from abconv.tensor_ref import (
    abconv_exp_forward,
    abconv_forward,
    block_diagonal,
    check_equivalence,
    group_conv_pointwise,
    pointwise_conv,
    relative_error,
    reshape_channel_to_spatial,
    reshape_spatial_to_channel,
)
from oracles import naive_pointwise


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def test_reshape_identity(rng):
    x = rng.standard_normal((2, 3, 3, 4))
    assert np.array_equal(reshape_channel_to_spatial(x, 1), x)
    assert np.array_equal(reshape_spatial_to_channel(x, 1), x)


def test_reshape_index_permutation():
    x = np.arange(16.0).reshape(1, 2, 2, 4)
    y = reshape_channel_to_spatial(x, 2)
    assert y.shape == (1, 4, 2, 2)
    for h in range(2):
        for w in range(2):
            for c in range(4):
                j, cc = divmod(c, 2)
                assert y[0, j * 2 + h, w, cc] == x[0, h, w, c]
    assert reshape_spatial_to_channel(y, 2).shape == (1, 2, 2, 4)


@pytest.mark.parametrize("g", [1, 2, 4])
def test_reshape_round_trip(rng, g):
    x = rng.standard_normal((2, 3, 5, 8))
    assert np.array_equal(reshape_spatial_to_channel(reshape_channel_to_spatial(x, g), g), x)
    assert sorted(reshape_channel_to_spatial(x, g).ravel()) == sorted(x.ravel())


def test_reshape_errors(rng):
    with pytest.raises(NonDivisibleGroup):
        reshape_channel_to_spatial(rng.standard_normal((1, 2, 2, 6)), 4)
    with pytest.raises(NonDivisibleGroup):
        reshape_spatial_to_channel(rng.standard_normal((1, 3, 2, 6)), 2)
    with pytest.raises(ShapeMismatch):
        reshape_channel_to_spatial(np.zeros((2, 2, 2)), 1)


def test_pointwise(rng):
    x = rng.standard_normal((1, 3, 3, 8))
    assert np.array_equal(pointwise_conv(x, np.eye(8)), x)
    assert np.all(pointwise_conv(np.ones((1, 1, 1, 4)), np.ones((4, 3))) == 4.0)
    w = rng.standard_normal((8, 5))
    assert relative_error(pointwise_conv(x, w), naive_pointwise(x, w)) <= 1e-6
    with pytest.raises(ShapeMismatch):
        pointwise_conv(x, np.ones((7, 2)))


def test_group_conv(rng):
    x = rng.standard_normal((1, 3, 3, 8))
    w = rng.standard_normal((8, 6))
    assert np.array_equal(group_conv_pointwise(x, [w], 1), pointwise_conv(x, w))
    ws = [rng.standard_normal((2, 3)) for _ in range(4)]
    ref = pointwise_conv(x, block_diagonal(ws))
    assert relative_error(group_conv_pointwise(x, ws, 4), ref) <= 1e-12
    ws[0] = np.zeros((2, 3))
    assert np.all(group_conv_pointwise(x, ws, 4)[..., :3] == 0)
    with pytest.raises(ShapeMismatch):
        group_conv_pointwise(x, ws[:3], 4)
    with pytest.raises(NonDivisibleGroup):
        group_conv_pointwise(x, ws, 3)


def test_abconv_g1(rng):
    x = rng.standard_normal((1, 4, 4, 8))
    w = rng.standard_normal((8, 4))
    assert np.array_equal(abconv_forward(x, w, 1), pointwise_conv(x, w))


@pytest.mark.parametrize("g", [2, 4])
def test_abconv_is_tied_group_conv(rng, g):
    x = rng.standard_normal((1, 4, 4, 16))
    w = rng.standard_normal((16 // g, 8 // g))
    out = abconv_forward(x, w, g)
    assert out.shape == (1, 4, 4, 8)
    assert relative_error(out, group_conv_pointwise(x, [w] * g, g)) <= 1e-6


def test_abconv_exact_on_integers(rng):
    x = rng.integers(-5, 5, size=(1, 4, 4, 16)).astype(float)
    w = rng.integers(-5, 5, size=(4, 4)).astype(float)
    assert np.array_equal(abconv_forward(x, w, 4), group_conv_pointwise(x, [w] * 4, 4))


def test_abconv_weight_count_matches_cost():
    c, c_out, g = 16, 8, 4
    assert (c // g) * (c_out // g) == cost_abconv(ConvSpec(4, 1, c, c_out), g).weight_elems


def test_abconv_exp(rng):
    x = rng.standard_normal((1, 4, 4, 16))
    pw, main = rng.standard_normal((4, 6)), rng.standard_normal((6, 2))
    assert relative_error(abconv_exp_forward(x, pw, main, 4), abconv_forward(x, pw @ main, 4)) <= 1e-6
    ones = abconv_exp_forward(x, np.ones((4, 1)), np.ones((1, 2)), 4)
    sums = x.reshape(1, 4, 4, 4, 4).sum(axis=-1)
    assert np.allclose(ones[..., 0::2], sums) and np.allclose(ones[..., 1::2], sums)
    with pytest.raises(ShapeMismatch):
        abconv_exp_forward(x, pw, np.ones((5, 2)), 4)


def test_abconv_exp_param_count_matches_cost():
    spec = ConvSpec(4, 1, 1024, 1024)
    g, m = 8, 512
    assert (1024 // g) * m + m * (1024 // g) == cost_abconv_exp(spec, g).weight_elems


@settings(max_examples=50, deadline=None)
@given(g=st.sampled_from([1, 2, 4]), h=st.integers(1, 4), w=st.integers(1, 4),
       a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**16))
def test_abconv_linearity(g, h, w, a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 1, h, w, 16))
    k = rng.standard_normal((16 // g, 8 // g))
    lhs = abconv_forward(a * x + b * y, k, g)
    rhs = a * abconv_forward(x, k, g) + b * abconv_forward(y, k, g)
    assert np.allclose(lhs, rhs, rtol=1e-6, atol=1e-9)


def test_check_equivalence():
    assert check_equivalence((1, 4, 4, 16), 4, trials=5) is None
    with pytest.raises(NonDivisibleGroup):
        check_equivalence((1, 4, 4, 16), 3)
