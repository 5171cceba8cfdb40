"""Core 2-D field types and precision semantics.

Everything downstream (operators, solvers, the benchmark harness) works on the
three container types defined here: Grid for solver fields, Matrix for GEMM
operands, Mask for the 0/1 boundary indicator. Storage is always a row-major
float32 ndarray; the precision tag decides what *values* are representable:

  FP32          any float32 value
  FP16_STORAGE  every element is exactly representable in IEEE 754 binary16;
                arithmetic still happens in float32, values are rounded back
                to binary16 only when stored

The binary16 rounding used by the package (`round_fp16`) goes through numpy's
float16. An independent bit-level encoder/decoder (`fp16_encode`/`fp16_decode`)
is included so tests can cross-check the two implementations over the entire
16-bit pattern space. NaNs canonicalize to 0x7E00 at the bit level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

FP16_NAN_BITS = 0x7E00
FP16_POS_INF_BITS = 0x7C00
FP16_MAX = 65504.0


class Precision(Enum):
    FP32 = "fp32"
    FP16_STORAGE = "fp16"

    @classmethod
    def parse(cls, text: str) -> "Precision":
        for p in cls:
            if p.value == text:
                return p
        raise ValueError(f"unknown precision {text!r} (expected fp32 or fp16)")

    def itemsize(self) -> int:
        return 2 if self is Precision.FP16_STORAGE else 4


def round_fp16(x: float) -> float:
    """Nearest binary16 value under round-to-nearest-even, as a float.

    Overflow maps to +/-inf, subnormals are preserved, NaN stays NaN.
    """
    with np.errstate(over="ignore"):  # saturating to inf is intended, not a warning
        return float(np.float32(np.float16(np.float64(x))))


def round_array_fp16(a: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return a.astype(np.float16).astype(np.float32)


def fp16_encode(x: float) -> int:
    """IEEE 754 binary16 bit pattern nearest to x (round-to-nearest-even).

    Pure-Python reference path, independent of numpy's float16. NaN maps to
    the canonical quiet NaN 0x7E00.
    """
    if math.isnan(x):
        return FP16_NAN_BITS
    sign = 0x8000 if math.copysign(1.0, x) < 0 else 0
    ax = abs(x)
    if math.isinf(ax):
        return sign | FP16_POS_INF_BITS
    if ax == 0.0:
        return sign
    _, e = math.frexp(ax)  # ax = m * 2**e with m in [0.5, 1)
    exp = e - 1  # unbiased exponent of ax
    if exp < -14:
        # subnormal range: value = q * 2**-24
        q = _round_half_even(math.ldexp(ax, 24))
        if q >= 1024:
            return sign | 0x0400  # rounded up into the smallest normal
        return sign | q
    # normal candidate: significand scaled to 10 fraction bits
    q = _round_half_even(math.ldexp(ax, 10 - exp))
    if q == 2048:  # rounding carried into the next binade
        q = 1024
        exp += 1
    if exp > 15:
        return sign | FP16_POS_INF_BITS
    return sign | ((exp + 15) << 10) | (q - 1024)


def fp16_decode(bits: int) -> float:
    """Exact float value of a binary16 bit pattern."""
    if not 0 <= bits <= 0xFFFF:
        raise ValueError(f"bit pattern out of range: {bits!r}")
    sign = -1.0 if bits & 0x8000 else 1.0
    exp = (bits >> 10) & 0x1F
    frac = bits & 0x3FF
    if exp == 0x1F:
        return sign * math.inf if frac == 0 else math.nan
    if exp == 0:
        return sign * math.ldexp(frac, -24)
    return sign * math.ldexp(1024 + frac, exp - 25)


def _round_half_even(v: float) -> int:
    # v is exact (power-of-two scaling of a float), so round() is exact too
    return int(round(v))


def _store(data: np.ndarray, precision: Precision) -> np.ndarray:
    out = np.ascontiguousarray(data, dtype=np.float32)
    if precision is Precision.FP16_STORAGE:
        out = round_array_fp16(out)
    return out


@dataclass(eq=False)
class Grid:
    """2-D real field with a precision tag; data is row-major float32.

    Use grids_equal for bit-exact comparison; == is identity.
    """

    rows: int
    cols: int
    precision: Precision
    data: np.ndarray = field(repr=False)

    def __init__(self, rows: int, cols: int, precision: Precision, data):
        if rows < 1 or cols < 1:
            raise ValueError(f"grid dimensions must be positive, got {rows}x{cols}")
        arr = np.asarray(data, dtype=np.float32).reshape(rows, cols)
        self.rows = rows
        self.cols = cols
        self.precision = precision
        self.data = _store(arr, precision)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def with_data(self, data: np.ndarray) -> "Grid":
        """Same shape and precision, new values (rounded per precision)."""
        return Grid(self.rows, self.cols, self.precision, data)

    def to_json_obj(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "precision": self.precision.value,
            "data": [float(v) for v in self.data.ravel()],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Grid":
        return cls(int(obj["rows"]), int(obj["cols"]),
                   Precision.parse(obj["precision"]), obj["data"])

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def loads(cls, text: str) -> "Grid":
        return cls.from_json_obj(json.loads(text))


@dataclass(eq=False)
class Matrix:
    """GEMM operand; same storage rules as Grid."""

    rows: int
    cols: int
    precision: Precision
    data: np.ndarray = field(repr=False)

    def __init__(self, rows: int, cols: int, precision: Precision, data):
        if rows < 1 or cols < 1:
            raise ValueError(f"matrix dimensions must be positive, got {rows}x{cols}")
        arr = np.asarray(data, dtype=np.float32).reshape(rows, cols)
        self.rows = rows
        self.cols = cols
        self.precision = precision
        self.data = _store(arr, precision)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def to_json_obj(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "precision": self.precision.value,
            "data": [float(v) for v in self.data.ravel()],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Matrix":
        return cls(int(obj["rows"]), int(obj["cols"]),
                   Precision.parse(obj["precision"]), obj["data"])


@dataclass(eq=False)
class Mask:
    """0/1 indicator grid; 0 marks boundary cells, 1 marks interior."""

    rows: int
    cols: int
    data: np.ndarray = field(repr=False)

    def __init__(self, rows: int, cols: int, data):
        if rows < 1 or cols < 1:
            raise ValueError(f"mask dimensions must be positive, got {rows}x{cols}")
        arr = np.asarray(data, dtype=np.float32).reshape(rows, cols)
        bad = ~((arr == 0.0) | (arr == 1.0))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValueError(f"mask cell ({i},{j}) is {arr[i, j]}, not 0 or 1")
        self.rows = rows
        self.cols = cols
        self.data = np.ascontiguousarray(arr, dtype=np.float32)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def to_json_obj(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "data": [int(v) for v in self.data.ravel()],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Mask":
        return cls(int(obj["rows"]), int(obj["cols"]), obj["data"])


def grid_from_fn(rows: int, cols: int, precision: Precision,
                 f: Callable[[int, int], float]) -> Grid:
    """Grid with element (i, j) = f(i, j), rounded per precision."""
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be positive, got {rows}x{cols}")
    arr = np.empty((rows, cols), dtype=np.float32)
    for i in range(rows):
        for j in range(cols):
            arr[i, j] = f(i, j)
    return Grid(rows, cols, precision, arr)


def max_abs_diff(a: Grid, b: Grid) -> float:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a.data - b.data)))


def grids_equal(a: Grid, b: Grid) -> bool:
    """Bit-exact comparison (NaNs compare equal to NaNs positionally)."""
    return a.shape == b.shape and np.array_equal(a.data, b.data, equal_nan=True)
