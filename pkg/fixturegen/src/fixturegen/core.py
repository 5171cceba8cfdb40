"""Builds golden test vectors by evaluating the grid operators in torch.

Each case freezes: the op name, inputs (grids/matrices in the same JSON
shape the consumer uses), params, the expected output computed at fp32,
and an explicit tolerance. fp16 cases round inputs to binary16 before
evaluating and round the fp32 result the same way; their tolerance is
expressed in binary16 ULPs instead of an absolute bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F

FRAMEWORK = {"name": "torch", "version": torch.__version__}

STENCIL5 = (0.0, 0.25, 0.0, 0.25, 0.0, 0.25, 0.0, 0.25, 0.0)
LAPLACIAN = (0.0, -1.0, 0.0, -1.0, 4.0, -1.0, 0.0, -1.0, 0.0)

FP32_TOLERANCE = 1e-6
FP16_ULP_TOLERANCE = 1


def _round_store(t: torch.Tensor, precision: str) -> torch.Tensor:
    return t.half().float() if precision == "fp16" else t


def _tensor(values, precision: str) -> torch.Tensor:
    return _round_store(torch.as_tensor(values, dtype=torch.float32), precision)


def _grid_obj(t: torch.Tensor, precision: str) -> dict:
    return {
        "rows": t.shape[0],
        "cols": t.shape[1],
        "precision": precision,
        "data": [float(v) for v in t.reshape(-1)],
    }


def _mask_obj(m: torch.Tensor) -> dict:
    return {
        "rows": m.shape[0],
        "cols": m.shape[1],
        "data": [int(v) for v in m.reshape(-1)],
    }


@dataclass
class FixtureCase:
    op: str
    name: str
    precision: str
    inputs: dict
    params: dict
    expected: dict
    tolerance: float
    tolerance_kind: str

    def to_json_obj(self) -> dict:
        return {
            "op": self.op,
            "case": self.name,
            "framework": dict(FRAMEWORK),
            "precision": self.precision,
            "inputs": self.inputs,
            "params": self.params,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "tolerance_kind": self.tolerance_kind,
        }


def _case(op: str, name: str, precision: str, inputs: dict, params: dict,
          result: torch.Tensor) -> FixtureCase:
    expected = _round_store(result, precision)
    if not torch.isfinite(expected).all():
        raise ValueError(f"{op}/{name}: non-finite expected value")
    tol, kind = ((FP16_ULP_TOLERANCE, "ulp16") if precision == "fp16"
                 else (FP32_TOLERANCE, "absolute"))
    return FixtureCase(op, name, precision, inputs, params,
                       _grid_obj(expected, precision), tol, kind)


def conv3x3_case(name: str, values, kernel, precision: str = "fp32") -> FixtureCase:
    g = _tensor(values, precision)
    k = torch.tensor(kernel, dtype=torch.float32).reshape(1, 1, 3, 3)
    out = F.conv2d(g[None, None], k, padding=1)[0, 0]
    return _case("conv3x3", name, precision,
                 {"grid": _grid_obj(g, precision)},
                 {"kernel": [float(w) for w in kernel]}, out)


def avgpool2_case(name: str, values, precision: str = "fp32") -> FixtureCase:
    g = _tensor(values, precision)
    out = F.avg_pool2d(g[None, None], kernel_size=2)[0, 0]
    return _case("avgpool2", name, precision,
                 {"grid": _grid_obj(g, precision)}, {}, out)


def bilinear_case(name: str, values, out_rows: int, out_cols: int,
                  precision: str = "fp32") -> FixtureCase:
    g = _tensor(values, precision)
    out = F.interpolate(g[None, None], size=(out_rows, out_cols),
                        mode="bilinear", align_corners=False)[0, 0]
    return _case("bilinear_upsample", name, precision,
                 {"grid": _grid_obj(g, precision)},
                 {"out_rows": out_rows, "out_cols": out_cols}, out)


def matmul_case(name: str, a_values, b_values, precision: str = "fp32") -> FixtureCase:
    a = _tensor(a_values, precision)
    b = _tensor(b_values, precision)
    out = torch.matmul(a, b)
    return _case("matmul", name, precision,
                 {"a": _grid_obj(a, precision), "b": _grid_obj(b, precision)},
                 {}, out)


def mask_mul_case(name: str, values, mask_values, precision: str = "fp32") -> FixtureCase:
    g = _tensor(values, precision)
    m = torch.tensor(mask_values, dtype=torch.float32)
    out = g * m
    return _case("mask_mul", name, precision,
                 {"grid": _grid_obj(g, precision), "mask": _mask_obj(m)},
                 {}, out)


def _rand(gen: torch.Generator, rows: int, cols: int,
          lo: float = 0.0, hi: float = 1.0) -> torch.Tensor:
    u = torch.rand((rows, cols), generator=gen, dtype=torch.float32)
    return u * (hi - lo) + lo


def build_cases(seed: int) -> list[FixtureCase]:
    gen = torch.Generator().manual_seed(seed)
    cases = []

    # conv3x3: the listed uniform and impulse cases, then seeded inputs
    # under both kernels the solvers use.
    uniform = [[4.0] * 3 for _ in range(3)]
    impulse = [[0.0] * 3 for _ in range(3)]
    impulse[1][1] = 1.0
    cases.append(conv3x3_case("uniform-3x3-stencil5", uniform, STENCIL5))
    cases.append(conv3x3_case("impulse-3x3-stencil5", impulse, STENCIL5))
    cases.append(conv3x3_case("one-cell-stencil5", [[3.0]], STENCIL5))
    cases.append(conv3x3_case("random-5x5-stencil5", _rand(gen, 5, 5), STENCIL5))
    cases.append(conv3x3_case("random-6x4-laplacian",
                              _rand(gen, 6, 4, -1.0, 1.0), LAPLACIAN))
    cases.append(conv3x3_case("random-5x5-laplacian", _rand(gen, 5, 5), LAPLACIAN))
    cases.append(conv3x3_case("random-5x5-stencil5-fp16",
                              _rand(gen, 5, 5), STENCIL5, precision="fp16"))
    cases.append(conv3x3_case("random-4x7-laplacian-fp16",
                              _rand(gen, 4, 7, -2.0, 2.0), LAPLACIAN,
                              precision="fp16"))

    cases.append(avgpool2_case("two-by-two", [[1.0, 2.0], [3.0, 4.0]]))
    cases.append(avgpool2_case("constant-4x4", [[7.25] * 4 for _ in range(4)]))
    checker = [[float((i + j) % 2) for j in range(4)] for i in range(4)]
    cases.append(avgpool2_case("checker-4x4", checker))
    cases.append(avgpool2_case("random-8x8", _rand(gen, 8, 8)))
    cases.append(avgpool2_case("random-6x10", _rand(gen, 6, 10, -1.0, 1.0)))
    cases.append(avgpool2_case("random-8x8-fp16", _rand(gen, 8, 8),
                               precision="fp16"))

    two = [[1.0, 2.0], [3.0, 4.0]]
    cases.append(bilinear_case("two-to-four", two, 4, 4))
    cases.append(bilinear_case("two-to-three", two, 3, 3))
    cases.append(bilinear_case("constant-3x3-to-7x5",
                               [[2.5] * 3 for _ in range(3)], 7, 5))
    identity_in = _rand(gen, 4, 4)
    cases.append(bilinear_case("identity-4x4", identity_in, 4, 4))
    cases.append(bilinear_case("random-4x4-to-9x7", _rand(gen, 4, 4), 9, 7))
    cases.append(bilinear_case("random-3x5-to-6x10", _rand(gen, 3, 5), 6, 10))
    cases.append(bilinear_case("random-6x6-to-3x3", _rand(gen, 6, 6), 3, 3))
    cases.append(bilinear_case("random-4x4-to-8x8-fp16", _rand(gen, 4, 4), 8, 8,
                               precision="fp16"))

    eye3 = [[1.0 if i == j else 0.0 for j in range(3)] for i in range(3)]
    cases.append(matmul_case("identity-3x3", eye3, _rand(gen, 3, 3)))
    cases.append(matmul_case("hand-2x2", [[1.0, 2.0], [3.0, 4.0]],
                             [[5.0, 6.0], [7.0, 8.0]]))
    cases.append(matmul_case("column-times-row", [[1.0], [2.0], [3.0]],
                             [[4.0, 5.0, 6.0]]))
    cases.append(matmul_case("random-4x6x5", _rand(gen, 4, 6), _rand(gen, 6, 5)))
    cases.append(matmul_case("random-8x8x8", _rand(gen, 8, 8, -1.0, 1.0),
                             _rand(gen, 8, 8, -1.0, 1.0)))
    cases.append(matmul_case("random-5x3x7-fp16", _rand(gen, 5, 3),
                             _rand(gen, 3, 7), precision="fp16"))

    ones4 = [[1] * 4 for _ in range(4)]
    zeros4 = [[0] * 4 for _ in range(4)]
    cases.append(mask_mul_case("identity-mask-4x4", _rand(gen, 4, 4), ones4))
    cases.append(mask_mul_case("zero-mask-4x4", _rand(gen, 4, 4), zeros4))
    cases.append(mask_mul_case("hand-2x2", [[1.0, 2.0], [3.0, 4.0]],
                               [[1, 0], [0, 1]]))
    ring5 = [[1 if 0 < i < 4 and 0 < j < 4 else 0 for j in range(5)]
             for i in range(5)]
    cases.append(mask_mul_case("boundary-ring-5x5", _rand(gen, 5, 5), ring5))
    rand_mask = (torch.rand((6, 6), generator=gen) < 0.5).int().tolist()
    cases.append(mask_mul_case("random-6x6", _rand(gen, 6, 6, -1.0, 1.0),
                               rand_mask))
    cases.append(mask_mul_case("random-4x4-fp16", _rand(gen, 4, 4), ones4,
                               precision="fp16"))

    return cases


def generate_fixtures(out_dir, seed: int = 42) -> int:
    """Write every case to out_dir/<op>/<case>.json; returns the count.
    Byte-identical across runs with the same seed and framework version."""
    out = Path(out_dir)
    count = 0
    for case in build_cases(seed):
        op_dir = out / case.op
        op_dir.mkdir(parents=True, exist_ok=True)
        text = json.dumps(case.to_json_obj(), indent=2) + "\n"
        (op_dir / f"{case.name}.json").write_text(text, encoding="utf-8")
        count += 1
    return count
