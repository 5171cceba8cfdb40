"""FLOP-count formulas and derived rate metrics.

The per-point costs are documented model constants, not measurements:
Jacobi 6 flops/point (3 neighbor adds + scale + mask multiply + boundary
add), dense 3x3 conv 17 flops/point (informational), residual/restrict/
prolong 5/4/8 flops/point. GEMM uses the exact 2*m*n*k. Cross-device
comparisons are ratios, so the constants cancel.
"""

from __future__ import annotations

from dataclasses import dataclass

RESIDUAL_FLOPS_PER_POINT = 5
RESTRICT_FLOPS_PER_POINT = 4
PROLONG_FLOPS_PER_POINT = 8


@dataclass(frozen=True)
class FlopModel:
    jacobi_flops_per_point: int = 6
    conv_dense_flops_per_point: int = 17  # informational only

    def __post_init__(self):
        if self.jacobi_flops_per_point <= 0 or self.conv_dense_flops_per_point <= 0:
            raise ValueError("flop counts must be positive")


DEFAULT_MODEL = FlopModel()


def gemm_flops(m: int, n: int, k: int) -> int:
    if m < 1 or n < 1 or k < 1:
        raise ValueError(f"dims must be >= 1, got ({m},{n},{k})")
    return 2 * m * n * k


def jacobi_flops(rows: int, cols: int, iters: int,
                 model: FlopModel = DEFAULT_MODEL) -> int:
    if rows < 1 or cols < 1 or iters < 0:
        raise ValueError(f"bad arguments ({rows},{cols},{iters})")
    return iters * rows * cols * model.jacobi_flops_per_point


def multigrid_flops(finest_rows: int, finest_cols: int, cfg, cycles: int,
                    model: FlopModel = DEFAULT_MODEL) -> int:
    """Work for `cycles` V-cycles under the documented per-point costs.

    cfg needs num_levels / pre_smooth / post_smooth / coarse_iters (any
    object with those attributes works). Each descent level contributes its
    smoothing sweeps plus one residual+restrict+prolong pass; the coarsest
    level contributes its Jacobi sweeps. With num_levels = 1 the formula
    degenerates to jacobi_flops with cycles*coarse_iters iterations.
    """
    if cycles < 0:
        raise ValueError(f"cycles must be >= 0, got {cycles}")
    jfpp = model.jacobi_flops_per_point
    transfer = (RESIDUAL_FLOPS_PER_POINT + RESTRICT_FLOPS_PER_POINT
                + PROLONG_FLOPS_PER_POINT)
    per_cycle = 0
    for lv in range(cfg.num_levels - 1):
        points = (finest_rows >> lv) * (finest_cols >> lv)
        per_cycle += points * ((cfg.pre_smooth + cfg.post_smooth) * jfpp + transfer)
    coarse_points = ((finest_rows >> (cfg.num_levels - 1))
                     * (finest_cols >> (cfg.num_levels - 1)))
    per_cycle += cfg.coarse_iters * coarse_points * jfpp
    return cycles * per_cycle


def gflops(flops: int, seconds: float) -> float:
    if not seconds > 0:
        raise ValueError(f"seconds must be > 0, got {seconds}")
    return flops / seconds / 1e9


def efficiency(rate_gflops: float, watts: float) -> float:
    """GFLOPS per watt."""
    if not watts > 0:
        raise ValueError(f"watts must be > 0, got {watts}")
    return rate_gflops / watts


def speedup(baseline: float, candidate: float, kind: str) -> float:
    """Ratio of candidate to baseline performance.

    kind "time": values are durations, speedup = baseline/candidate.
    kind "rate": values are rates, speedup = candidate/baseline.
    """
    if not baseline > 0 or not candidate > 0:
        raise ValueError(f"values must be > 0, got {baseline} and {candidate}")
    if kind == "time":
        return baseline / candidate
    if kind == "rate":
        return candidate / baseline
    raise ValueError(f"unknown speedup kind {kind!r} (expected time or rate)")
