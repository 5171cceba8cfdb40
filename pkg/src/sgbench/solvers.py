"""Workload solvers: masked Jacobi iteration, multigrid V-cycle, GEMM driver.

The solvers are compositions of the operators in ops.py. A Jacobi update is
conv3x3 with the stencil-5 kernel, a mask multiply, and the boundary-value
add; restriction is avgpool2 of the residual; prolongation is bilinear
upsampling of the coarse correction. Boundary cells hold their prescribed
values bit-exactly through every iterate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from sgbench.grids import Grid, Mask, Matrix, Precision, max_abs_diff
from sgbench.ops import (add, avgpool2, bilinear_upsample, conv3x3,
                         laplacian_kernel, matmul, stencil5_kernel)

F32 = np.float32


@dataclass(frozen=True)
class BoundaryCondition:
    """Dirichlet data: mask is 0 on fixed cells, boundary_values holds them.

    boundary_values must be zero wherever mask is 1, so the two never
    overlap: mask * boundary_values == 0 everywhere.
    """

    mask: Mask
    boundary_values: Grid

    def __post_init__(self):
        if self.mask.shape != self.boundary_values.shape:
            raise ValueError(
                f"mask {self.mask.shape} vs boundary values {self.boundary_values.shape}")
        overlap = self.mask.data * self.boundary_values.data
        if overlap.any():
            i, j = np.argwhere(overlap != 0.0)[0]
            raise ValueError(f"boundary value at interior cell ({i},{j}) must be 0")


@dataclass(frozen=True)
class JacobiConfig:
    iterations: int
    tolerance: float | None = None  # early stop is off by default
    precision: Precision = Precision.FP32

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")


@dataclass(frozen=True)
class VCycleConfig:
    """V-cycle schedule parameters.

    residual_scale compensates the grid-spacing factor the unit-spaced
    5-point operator picks up under plain 2x2 averaging restriction; 4.0
    per level is the value that makes the coarse error equation consistent.
    paper_faithful forces the scale to 1.0 (plain averaged restriction,
    kept for study; converges much more slowly).
    """

    num_levels: int
    pre_smooth: int = 1
    post_smooth: int = 1
    coarse_iters: int = 50
    residual_scale: float = 4.0
    paper_faithful: bool = False
    precision: Precision = Precision.FP32

    def __post_init__(self):
        if self.num_levels < 2:
            raise ValueError(f"num_levels must be >= 2, got {self.num_levels}")
        if self.pre_smooth < 1 or self.post_smooth < 1:
            raise ValueError("smoothing counts must be >= 1")
        if self.coarse_iters < 1:
            raise ValueError(f"coarse_iters must be >= 1, got {self.coarse_iters}")
        if not self.residual_scale > 0:
            raise ValueError(f"residual_scale must be > 0, got {self.residual_scale}")

    def effective_residual_scale(self) -> float:
        return 1.0 if self.paper_faithful else self.residual_scale


@dataclass
class HeatProblem:
    """Discrete Poisson/Laplace problem: initial field u, right-hand side f,
    Dirichlet boundary condition. rhs defaults to the zero grid."""

    initial: Grid
    rhs: Grid | None = None
    bc: BoundaryCondition | None = None  # required; defaulted only for call-site flexibility

    def __post_init__(self):
        if self.bc is None:
            raise ValueError("bc is required")
        if self.rhs is None:
            self.rhs = self.initial.with_data(np.zeros(self.initial.shape, dtype=F32))
        if not (self.initial.shape == self.rhs.shape == self.bc.mask.shape):
            raise ValueError(
                f"shape mismatch: initial {self.initial.shape}, rhs {self.rhs.shape}, "
                f"bc {self.bc.mask.shape}")
        fixed = self.bc.mask.data == 0.0
        bad = fixed & (self.initial.data != self.bc.boundary_values.data)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValueError(
                f"initial({i},{j}) = {self.initial.data[i, j]} does not match the "
                f"boundary value {self.bc.boundary_values.data[i, j]}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.initial.shape


def build_dirichlet_mask(rows: int, cols: int) -> Mask:
    """0 on the outer ring, 1 inside. Needs at least a 3x3 grid."""
    if rows < 3 or cols < 3:
        raise ValueError(f"mask needs dims >= 3, got {rows}x{cols}")
    return Mask(rows, cols, _interior(rows, cols))


def _interior(rows: int, cols: int) -> np.ndarray:
    # tolerant variant for coarse levels: dims < 3 give an all-zero mask
    m = np.zeros((rows, cols), dtype=F32)
    if rows > 2 and cols > 2:
        m[1:-1, 1:-1] = 1.0
    return m


def hot_left_problem(rows: int, cols: int,
                     precision: Precision = Precision.FP32) -> HeatProblem:
    """Left wall fixed at 1.0, remaining boundary and interior at 0, zero rhs."""
    bv = np.zeros((rows, cols), dtype=F32)
    bv[:, 0] = 1.0
    mask = build_dirichlet_mask(rows, cols)
    bvg = Grid(rows, cols, precision, bv)
    return HeatProblem(initial=bvg, bc=BoundaryCondition(mask, bvg))


def _coerce(p: HeatProblem, precision: Precision) -> HeatProblem:
    """Re-tag the problem's grids to the solver's working precision."""
    if (p.initial.precision is precision and p.rhs.precision is precision
            and p.bc.boundary_values.precision is precision):
        return p
    def re(g: Grid) -> Grid:
        return Grid(g.rows, g.cols, precision, g.data)
    return HeatProblem(initial=re(p.initial), rhs=re(p.rhs),
                       bc=BoundaryCondition(p.bc.mask, re(p.bc.boundary_values)))


def jacobi_step(u: Grid, p: HeatProblem) -> Grid:
    """One update: u' = mask * (0.25*f + conv3x3(u, stencil5)) + boundary_values.

    With zero rhs and zero boundary values this is exactly conv-then-mask.
    """
    if u.shape != p.shape:
        raise ValueError(f"u {u.shape} vs problem {p.shape}")
    smoothed = conv3x3(u, stencil5_kernel())
    out = p.bc.mask.data * (F32(0.25) * p.rhs.data + smoothed.data) + p.bc.boundary_values.data
    nxt = u.with_data(out)
    if not np.isfinite(nxt.data).all():
        i, j = np.argwhere(~np.isfinite(nxt.data))[0]
        raise RuntimeError(f"non-finite value at cell ({i},{j})")
    return nxt


def jacobi_solve(p: HeatProblem, cfg: JacobiConfig) -> tuple[Grid, int, float]:
    """Run cfg.iterations Jacobi steps (early stop only if tolerance is set).

    Returns (final grid, iterations actually run, last max-abs step diff).
    """
    wp = _coerce(p, cfg.precision)
    u = wp.initial
    last_diff = 0.0
    steps = 0
    for i in range(1, cfg.iterations + 1):
        nxt = jacobi_step(u, wp)
        last_diff = max_abs_diff(nxt, u)
        if not math.isfinite(last_diff):
            raise RuntimeError(f"non-finite update at iteration {i}")
        u = nxt
        steps = i
        if cfg.tolerance is not None and last_diff < cfg.tolerance:
            break
    return u, steps, last_diff


def residual(u: Grid, p: HeatProblem) -> Grid:
    """r = mask * (f - A u) with A the 5-point Laplacian; zero on boundary cells."""
    if u.shape != p.shape:
        raise ValueError(f"u {u.shape} vs problem {p.shape}")
    au = conv3x3(u, laplacian_kernel())
    return u.with_data(p.bc.mask.data * (p.rhs.data - au.data))


def residual_norm(u: Grid, p: HeatProblem, kind: str = "max") -> float:
    r = residual(u, p).data
    if kind == "max":
        return float(np.max(np.abs(r)))
    if kind == "l2":
        return float(np.sqrt(np.sum(r.astype(np.float64) ** 2)))
    raise ValueError(f"unknown norm kind {kind!r}")


def level_shapes(rows: int, cols: int, num_levels: int) -> list[tuple[int, int]]:
    """Grid shape at each V-cycle level: finest shape halved per level.

    Raises if the finest dims are not divisible by 2^(num_levels-1).
    """
    factor = 2 ** (num_levels - 1)
    if rows % factor or cols % factor:
        raise ValueError(
            f"{rows}x{cols} grid is not divisible by 2^{num_levels - 1} "
            f"for {num_levels} levels")
    return [(rows >> lv, cols >> lv) for lv in range(num_levels)]


def default_num_levels(rows: int, cols: int) -> int:
    """Levels obtained by coarsening until the smaller dimension is <= 16."""
    levels = 1
    r, c = rows, cols
    while min(r, c) > 16 and r % 2 == 0 and c % 2 == 0:
        r //= 2
        c //= 2
        levels += 1
    return levels


def _zero_like(shape: tuple[int, int], precision: Precision) -> Grid:
    return Grid(shape[0], shape[1], precision, np.zeros(shape, dtype=F32))


def _cycle(u: Grid, prob: HeatProblem, cfg: VCycleConfig, levels: int) -> Grid:
    if levels == 1:
        for _ in range(cfg.coarse_iters):
            u = jacobi_step(u, prob)
        return u
    for _ in range(cfg.pre_smooth):
        u = jacobi_step(u, prob)
    r = residual(u, prob)
    rc = avgpool2(r)
    rc = rc.with_data(F32(cfg.effective_residual_scale()) * rc.data)
    cr, cc = rc.shape
    cbc = BoundaryCondition(Mask(cr, cc, _interior(cr, cc)), _zero_like((cr, cc), u.precision))
    cprob = HeatProblem(initial=_zero_like((cr, cc), u.precision), rhs=rc, bc=cbc)
    e = _cycle(cprob.initial, cprob, cfg, levels - 1)
    u = add(u, bilinear_upsample(e, u.rows, u.cols))
    for _ in range(cfg.post_smooth):
        u = jacobi_step(u, prob)
    return u


def vcycle(p: HeatProblem, cfg: VCycleConfig) -> Grid:
    """One V-cycle: smooth, restrict the residual, solve the error equation
    on the coarsest grid, prolong the correction back up, smooth again."""
    level_shapes(p.shape[0], p.shape[1], cfg.num_levels)  # validates before any work
    wp = _coerce(p, cfg.precision)
    return _cycle(wp.initial, wp, cfg, cfg.num_levels)


def multigrid_solve(p: HeatProblem, cfg: VCycleConfig, max_cycles: int,
                    tol: float) -> tuple[Grid, int, float]:
    """Repeat V-cycles until max-abs residual < tol or max_cycles is hit.

    Raises if the residual norm grows past 10x its observed minimum.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if max_cycles < 0:
        raise ValueError(f"max_cycles must be >= 0, got {max_cycles}")
    level_shapes(p.shape[0], p.shape[1], cfg.num_levels)
    wp = _coerce(p, cfg.precision)
    u = wp.initial
    norm = residual_norm(u, wp)
    if norm < tol:
        return u, 0, norm
    best = norm
    for cyc in range(1, max_cycles + 1):
        u = _cycle(u, wp, cfg, cfg.num_levels)
        norm = residual_norm(u, wp)
        if norm < tol:
            return u, cyc, norm
        best = min(best, norm)
        if norm > 10.0 * best:
            raise RuntimeError(
                f"diverging after {cyc} cycles: residual {norm:.3e} is more than "
                f"10x the best seen {best:.3e}")
    return u, max_cycles, norm


def gemm_run(m: int, n: int, k: int, precision: Precision, seed: int,
             deterministic: bool = False) -> Matrix:
    """Seeded uniform-[0,1) A (m x k) and B (k x n), returns their product."""
    rng = np.random.default_rng(seed)
    a = Matrix(m, k, precision, rng.random((m, k), dtype=np.float32))
    b = Matrix(k, n, precision, rng.random((k, n), dtype=np.float32))
    return matmul(a, b, deterministic=deterministic)


def load_problem(obj: dict) -> tuple[HeatProblem, dict]:
    """Build a HeatProblem from its JSON object form.

    Schema: {rows, cols, precision, boundary: "hot-left"|"custom",
    boundary_values?, rhs?, solver: {type, params...}}. The initial field
    starts at the boundary values (zero interior).
    """
    rows, cols = int(obj["rows"]), int(obj["cols"])
    precision = Precision.parse(obj["precision"])
    boundary = obj.get("boundary", "hot-left")
    if boundary == "hot-left":
        p = hot_left_problem(rows, cols, precision)
    elif boundary == "custom":
        if "boundary_values" not in obj:
            raise ValueError("custom boundary requires boundary_values")
        bvg = Grid(rows, cols, precision, obj["boundary_values"])
        p = HeatProblem(initial=bvg, bc=BoundaryCondition(build_dirichlet_mask(rows, cols), bvg))
    else:
        raise ValueError(f"unknown boundary {boundary!r} (expected hot-left or custom)")
    if "rhs" in obj:
        p = HeatProblem(initial=p.initial,
                        rhs=Grid(rows, cols, precision, obj["rhs"]),
                        bc=p.bc)
    solver = obj.get("solver", {"type": "jacobi", "params": {}})
    if solver.get("type") not in ("jacobi", "multigrid"):
        raise ValueError(f"unknown solver type {solver.get('type')!r}")
    return p, solver


def load_problem_file(path: str) -> tuple[HeatProblem, dict]:
    with open(path, "r", encoding="ascii") as fh:
        return load_problem(json.load(fh))
