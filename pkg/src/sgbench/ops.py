"""Tensor operators the solvers are composed of.

conv3x3, mask_mul, avgpool2, bilinear_upsample, matmul, add, sub. All of
them accumulate in float32 and round the result once, per the input's
precision tag. Two-grid ops require matching shapes and precision tags.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sgbench.grids import Grid, Mask, Matrix

F32 = np.float32


@dataclass(frozen=True)
class Kernel3x3:
    """Nine weights, row-major."""

    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.weights) != 9:
            raise ValueError(f"kernel needs 9 weights, got {len(self.weights)}")

    def as_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=F32).reshape(3, 3)


def stencil5_kernel() -> Kernel3x3:
    """Four-neighbor average: 0.25 at the edge-adjacent taps, 0 elsewhere."""
    return Kernel3x3((0.0, 0.25, 0.0,
                      0.25, 0.0, 0.25,
                      0.0, 0.25, 0.0))


def laplacian_kernel() -> Kernel3x3:
    """Negative 5-point Laplacian: 4 at center, -1 at the four neighbors."""
    return Kernel3x3((0.0, -1.0, 0.0,
                      -1.0, 4.0, -1.0,
                      0.0, -1.0, 0.0))


def _finish(g: Grid, data: np.ndarray) -> Grid:
    # one rounding step at store, matching the input's precision
    return Grid(data.shape[0], data.shape[1], g.precision, data)


def conv3x3(g: Grid, k: Kernel3x3) -> Grid:
    """Same-shape 3x3 convolution with zero padding of width 1.

    Taps accumulate in kernel row-major order so the float32 summation
    order is reproducible.
    """
    ka = k.as_array()
    padded = np.pad(g.data, 1)
    out = np.zeros_like(g.data)
    r, c = g.shape
    for a in range(3):
        for b in range(3):
            w = ka[a, b]
            if w != 0.0:
                out = out + w * padded[a:a + r, b:b + c]
    return _finish(g, out)


def mask_mul(g: Grid, m: Mask) -> Grid:
    if g.shape != m.shape:
        raise ValueError(f"shape mismatch: grid {g.shape} vs mask {m.shape}")
    return _finish(g, g.data * m.data)


def avgpool2(g: Grid) -> Grid:
    """2x2 block mean; halves each dimension. Both dims must be even."""
    if g.rows % 2 or g.cols % 2:
        raise ValueError(f"avgpool2 needs even dimensions, got {g.rows}x{g.cols}")
    d = g.data
    out = ((d[0::2, 0::2] + d[0::2, 1::2]) + (d[1::2, 0::2] + d[1::2, 1::2])) * F32(0.25)
    return _finish(g, out)


def bilinear_upsample(g: Grid, out_rows: int, out_cols: int) -> Grid:
    """Resample to (out_rows, out_cols) with half-pixel-center coordinates.

    Source coordinate per axis: s = (d + 0.5) * (in/out) - 0.5, clamped to
    [0, in-1]; output blends the four neighbors of s. Resampling a grid to
    its own shape is the identity.
    """
    if out_rows < 1 or out_cols < 1:
        raise ValueError(f"output dimensions must be positive, got {out_rows}x{out_cols}")
    r, c = g.shape
    ys = np.clip((np.arange(out_rows, dtype=np.float64) + 0.5) * (r / out_rows) - 0.5, 0, r - 1)
    xs = np.clip((np.arange(out_cols, dtype=np.float64) + 0.5) * (c / out_cols) - 0.5, 0, c - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, r - 1)
    x1 = np.minimum(x0 + 1, c - 1)
    wy = (ys - y0).astype(F32)[:, None]
    wx = (xs - x0).astype(F32)[None, :]
    d = g.data
    top = d[y0][:, x0] * (1 - wx) + d[y0][:, x1] * wx
    bot = d[y1][:, x0] * (1 - wx) + d[y1][:, x1] * wx
    out = top * (1 - wy) + bot * wy
    return Grid(out_rows, out_cols, g.precision, out)


def matmul(a: Matrix, b: Matrix, deterministic: bool = False) -> Matrix:
    """Matrix product with float32 accumulation.

    deterministic=True sums the k axis sequentially (the verification
    order); the default path delegates to the BLAS-backed product, which
    must agree with the sequential order within 1e-4 relative.
    """
    if a.cols != b.rows:
        raise ValueError(f"inner dimensions differ: {a.shape} x {b.shape}")
    if a.precision is not b.precision:
        raise ValueError(f"precision mismatch: {a.precision.value} vs {b.precision.value}")
    if deterministic:
        out = np.zeros((a.rows, b.cols), dtype=F32)
        for kk in range(a.cols):
            out += a.data[:, kk:kk + 1] * b.data[kk:kk + 1, :]
    else:
        out = np.matmul(a.data, b.data)
    return Matrix(a.rows, b.cols, a.precision, out)


def _check_pair(a: Grid, b: Grid) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.precision is not b.precision:
        raise ValueError(f"precision mismatch: {a.precision.value} vs {b.precision.value}")


def add(a: Grid, b: Grid) -> Grid:
    _check_pair(a, b)
    return _finish(a, a.data + b.data)


def sub(a: Grid, b: Grid) -> Grid:
    _check_pair(a, b)
    return _finish(a, a.data - b.data)
