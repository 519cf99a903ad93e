"""Reference NHWC executor for pointwise ABConv and ABConv-exp.

Only 1x1 kernels are supported. Feature maps are ``(n, h, w, c)`` numpy
arrays; pointwise weights are ``(c_in, c_out)`` matrices. The channel to
spatial reshape stacks channel groups along the row (H) axis.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import NonDivisibleGroup, ShapeMismatch


def as_tensor4(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 4:
        raise ShapeMismatch(f"expected a 4-D NHWC tensor, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("tensor contains non-finite values")
    return x


def _as_weights(w) -> np.ndarray:
    w = np.asarray(w)
    if w.ndim != 2 or min(w.shape) < 1:
        raise ShapeMismatch(f"expected a non-empty (c_in, c_out) matrix, got shape {w.shape}")
    return w


def reshape_channel_to_spatial(x, g: int) -> np.ndarray:
    """(n, h, w, c) -> (n, g*h, w, c/g); channel group j lands in rows j*h..(j+1)*h."""
    x = as_tensor4(x)
    n, h, w, c = x.shape
    if g < 1 or c % g:
        raise NonDivisibleGroup(f"g={g} does not divide {c} channels")
    cg = c // g
    return x.reshape(n, h, w, g, cg).transpose(0, 3, 1, 2, 4).reshape(n, g * h, w, cg)


def reshape_spatial_to_channel(x, g: int) -> np.ndarray:
    """Inverse of :func:`reshape_channel_to_spatial`."""
    x = as_tensor4(x)
    n, gh, w, cg = x.shape
    if g < 1 or gh % g:
        raise NonDivisibleGroup(f"g={g} does not divide {gh} rows")
    h = gh // g
    return x.reshape(n, g, h, w, cg).transpose(0, 2, 3, 1, 4).reshape(n, h, w, g * cg)


def pointwise_conv(x, w) -> np.ndarray:
    x = as_tensor4(x)
    w = _as_weights(w)
    if w.shape[0] != x.shape[3]:
        raise ShapeMismatch(f"weights expect {w.shape[0]} input channels, tensor has {x.shape[3]}")
    return x @ w


def group_conv_pointwise(x, per_group_weights: Sequence, g: int) -> np.ndarray:
    x = as_tensor4(x)
    c = x.shape[3]
    if g < 1 or c % g:
        raise NonDivisibleGroup(f"g={g} does not divide {c} channels")
    if len(per_group_weights) != g:
        raise ShapeMismatch(f"expected {g} weight matrices, got {len(per_group_weights)}")
    ws = [_as_weights(w) for w in per_group_weights]
    if len({w.shape for w in ws}) != 1 or ws[0].shape[0] != c // g:
        raise ShapeMismatch("per-group weights must all have shape (c/g, c_out/g)")
    cg = c // g
    outs = [pointwise_conv(x[..., j * cg:(j + 1) * cg], ws[j]) for j in range(g)]
    return np.concatenate(outs, axis=3)


def abconv_forward(x, shared, g: int) -> np.ndarray:
    """Reshape, one shared pointwise kernel over the tall map, reshape back."""
    wide = reshape_channel_to_spatial(x, g)
    return reshape_spatial_to_channel(pointwise_conv(wide, shared), g)


def abconv_exp_forward(x, pw, main, g: int) -> np.ndarray:
    pw, main = _as_weights(pw), _as_weights(main)
    if pw.shape[1] != main.shape[0]:
        raise ShapeMismatch(f"expansion width {pw.shape[1]} != main kernel input {main.shape[0]}")
    wide = reshape_channel_to_spatial(x, g)
    return reshape_spatial_to_channel(pointwise_conv(pointwise_conv(wide, pw), main), g)


def block_diagonal(blocks: Sequence) -> np.ndarray:
    blocks = [_as_weights(b) for b in blocks]
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=np.result_type(*blocks))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def relative_error(actual, expected) -> float:
    actual, expected = np.asarray(actual), np.asarray(expected)
    scale = max(float(np.max(np.abs(expected), initial=0.0)), np.finfo(float).tiny)
    return float(np.max(np.abs(actual - expected), initial=0.0)) / scale


def check_equivalence(shape, g: int, c_out=None, c_mid=None, trials: int = 10, seed: int = 0,
                      rtol: float = 1e-6):
    """Run the executor oracles on seeded random tensors.

    Per trial: reshape round-trip is bit-exact, ABConv matches a grouped
    pointwise conv whose groups all share one matrix, and ABConv-exp matches
    ABConv with the two matrices multiplied together. Returns ``None`` when
    everything passes, else ``(trial, check, error)`` for the first failure.
    """
    n, h, w, c = shape
    c_out = c if c_out is None else c_out
    if g < 1 or c % g or c_out % g:
        raise NonDivisibleGroup(f"g={g} must divide c={c} and c_out={c_out}")
    cg, og = c // g, c_out // g
    c_mid = max(1, cg) if c_mid is None else c_mid
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        x = rng.standard_normal((n, h, w, c))
        shared = rng.standard_normal((cg, og))
        pw = rng.standard_normal((cg, c_mid))
        main = rng.standard_normal((c_mid, og))

        back = reshape_spatial_to_channel(reshape_channel_to_spatial(x, g), g)
        if not np.array_equal(back, x):
            return trial, "round-trip", float(np.max(np.abs(back - x)))

        err = relative_error(abconv_forward(x, shared, g), group_conv_pointwise(x, [shared] * g, g))
        if err > rtol:
            return trial, "tied-group", err

        err = relative_error(abconv_exp_forward(x, pw, main, g), abconv_forward(x, pw @ main, g))
        if err > rtol:
            return trial, "composition", err
    return None
