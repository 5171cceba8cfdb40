"""Self-check suite: golden-fixture comparison, solver oracles, invariants.

Fixture files are JSON, one case per file, laid out fixtures/<op>/<case>.json.
Each carries its own tolerance: fp32 cases compare absolutely, fp16 cases
in units of binary16 ULPs (via the bit-level codec, independent of the
numpy path the operators use).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from sgbench import ops
from sgbench.grids import (Grid, Mask, Matrix, Precision, fp16_decode,
                           fp16_encode, max_abs_diff)
from sgbench.ops import Kernel3x3
from sgbench.solvers import (BoundaryCondition, HeatProblem, JacobiConfig,
                             VCycleConfig, build_dirichlet_mask,
                             default_num_levels, hot_left_problem,
                             jacobi_solve, jacobi_step, multigrid_solve,
                             residual_norm, vcycle)

FIXTURES_ENV = "SGB_FIXTURES"


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def fixtures_root(override: str | None = None) -> Path:
    """Fixture directory precedence: explicit flag, SGB_FIXTURES, packaged."""
    if override:
        return Path(override)
    env = os.environ.get(FIXTURES_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("sgbench") / "fixtures"))


def _ulp16_distance(a: float, b: float) -> int:
    # Signed-magnitude bit patterns map to a monotonic integer line.
    def order(x: float) -> int:
        bits = fp16_encode(x)
        mag = bits & 0x7FFF
        return -mag if bits & 0x8000 else mag

    return abs(order(a) - order(b))


def _compare(expected: np.ndarray, got: np.ndarray, tolerance: float,
             kind: str) -> str:
    """Empty string when arrays agree, else a message naming the worst cell."""
    if expected.shape != got.shape:
        return f"shape {got.shape}, expected {expected.shape}"
    if kind == "absolute":
        diff = np.abs(got.astype(np.float64) - expected.astype(np.float64))
        worst = float(diff.max()) if diff.size else 0.0
        if worst > tolerance:
            i, j = np.unravel_index(int(diff.argmax()), diff.shape)
            return (f"cell ({i},{j}): got {float(got[i, j])!r}, expected "
                    f"{float(expected[i, j])!r}, |diff| {worst:.3e} > {tolerance:.1e}")
        return ""
    if kind == "ulp16":
        worst, where = 0, None
        for i in range(expected.shape[0]):
            for j in range(expected.shape[1]):
                d = _ulp16_distance(float(got[i, j]), float(expected[i, j]))
                if d > worst:
                    worst, where = d, (i, j)
        if worst > tolerance:
            i, j = where
            return (f"cell ({i},{j}): got {float(got[i, j])!r}, expected "
                    f"{float(expected[i, j])!r}, {worst} binary16 ULPs > {tolerance:g}")
        return ""
    return f"unknown tolerance kind {kind!r}"


def run_fixture_case(obj: dict) -> str:
    """Execute one fixture case; empty string on pass, detail on mismatch."""
    op = obj["op"]
    ins = obj["inputs"]
    params = obj.get("params", {})
    if op == "conv3x3":
        got = ops.conv3x3(Grid.from_json_obj(ins["grid"]),
                          Kernel3x3(tuple(float(w) for w in params["kernel"])))
    elif op == "avgpool2":
        got = ops.avgpool2(Grid.from_json_obj(ins["grid"]))
    elif op == "bilinear_upsample":
        got = ops.bilinear_upsample(Grid.from_json_obj(ins["grid"]),
                                    int(params["out_rows"]),
                                    int(params["out_cols"]))
    elif op == "matmul":
        # verification mode runs the fixed-order accumulation path
        got = ops.matmul(Matrix.from_json_obj(ins["a"]),
                         Matrix.from_json_obj(ins["b"]), deterministic=True)
    elif op == "mask_mul":
        got = ops.mask_mul(Grid.from_json_obj(ins["grid"]),
                           Mask.from_json_obj(ins["mask"]))
    else:
        raise ValueError(f"unknown fixture op {op!r}")
    expected = (Matrix if op == "matmul" else Grid).from_json_obj(obj["expected"])
    return _compare(expected.data, got.data, float(obj["tolerance"]),
                    obj.get("tolerance_kind", "absolute"))


def fixture_checks(root: Path) -> list[CheckResult]:
    if not root.is_dir():
        raise FileNotFoundError(f"fixtures directory not found: {root}")
    results = []
    for path in sorted(root.glob("*/*.json")):
        name = f"fixture:{path.parent.name}/{path.stem}"
        try:
            detail = run_fixture_case(json.loads(path.read_text(encoding="utf-8")))
        except Exception as e:  # malformed file is a failure, not a crash
            results.append(CheckResult(name, False, f"unreadable case: {e}"))
            continue
        results.append(CheckResult(name, detail == "", detail))
    return results


# Direct float64 dense solve of the 5-point system on the 9x9 hot-left
# problem (left wall 1, other boundary 0, zero f); interior 7x7 values.
# The center is exactly 0.25 by the symmetry of the harmonic measure.
_DENSE_9X9_INTERIOR = (
    (0.48258695416771946, 0.2693019656691117, 0.1635678516813641, 0.10294117647058826, 0.0643733247892242, 0.037683328448535364, 0.017413045832280566),
    (0.661045851001766, 0.4310530568273633, 0.28202826458575636, 0.18382352941176477, 0.11686879423777313, 0.0689469431726367, 0.03196885488058691),
    (0.7305433930119815, 0.5118361460528191, 0.34966862042253327, 0.23345588235294124, 0.15033137957746678, 0.08926679512365142, 0.04151543051743037),
    (0.7492915749933403, 0.5360795139493988, 0.3713541886986163, 0.25, 0.16173404659550136, 0.09627342722707184, 0.04482607206548314),
    (0.7305433930119816, 0.5118361460528191, 0.3496686204225332, 0.23345588235294124, 0.15033137957746676, 0.0892667951236514, 0.04151543051743036),
    (0.6610458510017659, 0.4310530568273632, 0.28202826458575636, 0.1838235294117647, 0.11686879423777309, 0.06894694317263668, 0.0319688548805869),
    (0.48258695416771946, 0.2693019656691117, 0.16356785168136406, 0.10294117647058823, 0.06437332478922417, 0.03768332844853536, 0.017413045832280566),
)


def manufactured_problem(n: int, amplitude: float = 0.01,
                         precision: Precision = Precision.FP32
                         ) -> tuple[HeatProblem, np.ndarray]:
    """Zero-boundary Poisson problem whose exact discrete solution is known.

    u*(x,y) = amplitude * sin(pi x) sin(pi y) sampled on the n x n grid;
    f = A u* evaluated in float64 so u* is the solution of the discrete
    system, not merely of the continuous PDE. Returns (problem, u*).
    """
    xs = np.linspace(0.0, 1.0, n)
    u_star = amplitude * np.outer(np.sin(np.pi * xs), np.sin(np.pi * xs))
    u_star[0, :] = u_star[-1, :] = 0.0
    u_star[:, 0] = u_star[:, -1] = 0.0
    f = np.zeros((n, n))
    f[1:-1, 1:-1] = (4.0 * u_star[1:-1, 1:-1]
                     - u_star[:-2, 1:-1] - u_star[2:, 1:-1]
                     - u_star[1:-1, :-2] - u_star[1:-1, 2:])
    zero = Grid(n, n, precision, np.zeros((n, n), dtype=np.float32))
    bc = BoundaryCondition(build_dirichlet_mask(n, n), zero)
    p = HeatProblem(initial=zero,
                    rhs=Grid(n, n, precision, f.astype(np.float32)), bc=bc)
    return p, u_star


def oracle_checks() -> list[CheckResult]:
    out = []

    p = hot_left_problem(9, 9, Precision.FP32)
    u, _, _ = jacobi_solve(p, JacobiConfig(iterations=500))
    gap = float(np.abs(u.data[1:-1, 1:-1]
                       - np.array(_DENSE_9X9_INTERIOR, dtype=np.float64)).max())
    out.append(CheckResult(
        "oracle:jacobi-9x9-dense", gap <= 1e-5,
        "" if gap <= 1e-5 else f"max gap to dense solve {gap:.3e} > 1e-5"))

    mp, u_star = manufactured_problem(32)
    cfg = VCycleConfig(num_levels=default_num_levels(32, 32))
    u, cycles, norm = multigrid_solve(mp, cfg, max_cycles=15, tol=1e-6)
    sol_gap = float(np.abs(u.data.astype(np.float64) - u_star).max())
    ok = norm < 1e-6 and cycles <= 15 and sol_gap <= 1e-4
    out.append(CheckResult(
        "oracle:multigrid-manufactured-32x32", ok,
        "" if ok else f"cycles {cycles}, residual {norm:.3e}, "
                      f"solution gap {sol_gap:.3e}"))

    a = Matrix(2, 2, Precision.FP32, [[1, 2], [3, 4]])
    b = Matrix(2, 2, Precision.FP32, [[5, 6], [7, 8]])
    prod = ops.matmul(a, b, deterministic=True)
    ok = np.array_equal(prod.data, np.array([[19, 22], [43, 50]], dtype=np.float32))
    out.append(CheckResult("oracle:matmul-hand-2x2", ok,
                           "" if ok else f"got {prod.data.tolist()}"))
    return out


def invariant_checks() -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(7)

    bad = 0
    first = ""
    for bits in range(0x10000):
        x = fp16_decode(bits)
        back = fp16_encode(x)
        canonical = 0x7E00 if math.isnan(x) else bits
        if back != canonical:
            bad += 1
            if not first:
                first = f"0x{bits:04X} -> {x!r} -> 0x{back:04X}"
    out.append(CheckResult("invariant:fp16-round-trip-exhaustive", bad == 0,
                           "" if bad == 0 else f"{bad} patterns, first {first}"))

    p = hot_left_problem(17, 17, Precision.FP32)
    u = p.initial
    fixed = p.bc.mask.data == 0.0
    ok, detail = True, ""
    for it in range(50):
        u = jacobi_step(u, p)
        if not np.array_equal(u.data[fixed], p.bc.boundary_values.data[fixed]):
            ok, detail = False, f"boundary drifted at iteration {it}"
            break
        interior = u.data[~fixed]
        if interior.min() < 0.0 or interior.max() > 1.0:
            ok, detail = False, f"maximum principle broken at iteration {it}"
            break
    out.append(CheckResult("invariant:jacobi-boundary-and-range", ok, detail))

    g = Grid(8, 8, Precision.FP32, rng.random((8, 8), dtype=np.float32))
    pooled = ops.avgpool2(g)
    gap = abs(float(pooled.data.mean()) - float(g.data.mean()))
    out.append(CheckResult("invariant:avgpool-mean", gap <= 1e-6,
                           "" if gap <= 1e-6 else f"mean moved by {gap:.3e}"))

    g2 = Grid(7, 5, Precision.FP32, rng.random((7, 5), dtype=np.float32))
    same = ops.bilinear_upsample(g2, 7, 5)
    ok = np.array_equal(same.data, g2.data)
    out.append(CheckResult("invariant:bilinear-identity", ok,
                           "" if ok else "same-shape upsample not bit-identical"))

    mp, _ = manufactured_problem(128)
    before = residual_norm(mp.initial, mp, kind="l2")
    after = residual_norm(vcycle(mp, VCycleConfig(num_levels=default_num_levels(128, 128))),
                          mp, kind="l2")
    out.append(CheckResult("invariant:vcycle-residual-decrease", after < before,
                           "" if after < before
                           else f"L2 residual {before:.3e} -> {after:.3e}"))
    return out


def run_all(fixtures_dir: str | None = None,
            name_filter: str | None = None) -> list[CheckResult]:
    results = fixture_checks(fixtures_root(fixtures_dir))
    results.extend(oracle_checks())
    results.extend(invariant_checks())
    if name_filter:
        results = [r for r in results if name_filter in r.name]
    return results
