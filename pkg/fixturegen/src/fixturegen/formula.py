"""Closed-form re-derivation of the pooling and interpolation fixtures.

Guards against framework-version drift: the block-mean and half-pixel
formulas are evaluated directly in float64 and must agree with the frozen
framework output. Disagreement names the offending coordinates.
"""

from __future__ import annotations

import torch


def _round_half(v: float) -> float:
    return float(torch.tensor(v, dtype=torch.float32).half().float())


def _grid_rows(obj: dict) -> list[list[float]]:
    r, c, flat = obj["rows"], obj["cols"], obj["data"]
    return [[float(flat[i * c + j]) for j in range(c)] for i in range(r)]


def block_mean(grid: list[list[float]]) -> list[list[float]]:
    rows, cols = len(grid), len(grid[0])
    out = []
    for i in range(rows // 2):
        row = []
        for j in range(cols // 2):
            block = (grid[2 * i][2 * j] + grid[2 * i][2 * j + 1]
                     + grid[2 * i + 1][2 * j] + grid[2 * i + 1][2 * j + 1])
            row.append(block / 4.0)
        out.append(row)
    return out


def half_pixel(grid: list[list[float]], out_rows: int,
               out_cols: int) -> list[list[float]]:
    in_rows, in_cols = len(grid), len(grid[0])

    def axis(d: int, out_n: int, in_n: int) -> tuple[int, int, float]:
        s = (d + 0.5) * in_n / out_n - 0.5
        s = min(max(s, 0.0), in_n - 1.0)
        lo = int(s)
        hi = min(lo + 1, in_n - 1)
        return lo, hi, s - lo

    out = []
    for i in range(out_rows):
        y0, y1, wy = axis(i, out_rows, in_rows)
        row = []
        for j in range(out_cols):
            x0, x1, wx = axis(j, out_cols, in_cols)
            top = (1.0 - wx) * grid[y0][x0] + wx * grid[y0][x1]
            bot = (1.0 - wx) * grid[y1][x0] + wx * grid[y1][x1]
            row.append((1.0 - wy) * top + wy * bot)
        out.append(row)
    return out


def validate_against_formula(case_obj: dict) -> tuple[bool, str]:
    """Re-derive an avgpool2/bilinear_upsample case's expected output.

    Returns (True, "") on agreement within 1e-6 (fp16 cases are rounded to
    binary16 on both sides first), else (False, detail with coordinates).
    """
    op = case_obj["op"]
    if op not in ("avgpool2", "bilinear_upsample"):
        raise ValueError(f"not a formula-checkable op: {op!r}")
    grid = _grid_rows(case_obj["inputs"]["grid"])
    if op == "avgpool2":
        derived = block_mean(grid)
    else:
        params = case_obj["params"]
        derived = half_pixel(grid, int(params["out_rows"]), int(params["out_cols"]))
    expected = _grid_rows(case_obj["expected"])
    fp16 = case_obj.get("precision") == "fp16"
    for i, row in enumerate(derived):
        for j, v in enumerate(row):
            want = _round_half(v) if fp16 else v
            if abs(want - expected[i][j]) > 1e-6:
                return False, (f"({i},{j}): formula gives {want!r}, "
                               f"fixture holds {expected[i][j]!r}")
    return True, ""
