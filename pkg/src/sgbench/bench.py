"""Benchmark harness: warmup/repetition protocol, power sampling, energy
integration, and the per-tensor capacity gate.

The gate emulates an accelerator's fixed internal buffer: before any tensor
is allocated, every tensor the workload needs is checked against
capacity_bytes at the workload precision; one oversized tensor marks the
whole run capacity_exceeded with no timing and no allocation.

Power samplers produce (t_ms, power_mw) traces. Three are provided: the
null sampler (no energy data), a trace-replay sampler that rebases a
recorded trace onto the measured window, and an external-command sampler
that spawns a process emitting `<epoch_ms> <power_mw>` lines on stdout.
"""

from __future__ import annotations

import shlex
import subprocess
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from sgbench.grids import Precision
from sgbench.perfmodel import (DEFAULT_MODEL, FlopModel, gemm_flops, gflops,
                               jacobi_flops, multigrid_flops)
from sgbench.solvers import (HeatProblem, JacobiConfig, VCycleConfig,
                             default_num_levels, hot_left_problem,
                             jacobi_solve, vcycle)

# incremented on every tensor allocation the harness performs; tests reset
# it to prove the capacity gate trips before anything is allocated
allocation_count = 0


def tensor_bytes(rows: int, cols: int, precision: Precision) -> int:
    if rows < 1 or cols < 1:
        raise ValueError(f"dims must be >= 1, got {rows}x{cols}")
    return rows * cols * precision.itemsize()


@dataclass(frozen=True)
class BenchConfig:
    warmup: int = 2
    reps: int = 10
    sample_period_ms: int = 100
    capacity_bytes: int | None = None
    precision: Precision = Precision.FP32

    def __post_init__(self):
        if self.warmup < 0:
            raise ValueError(f"warmup must be >= 0, got {self.warmup}")
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if self.sample_period_ms < 1:
            raise ValueError(f"sample_period_ms must be >= 1, got {self.sample_period_ms}")
        if self.capacity_bytes is not None and self.capacity_bytes < 1:
            raise ValueError(f"capacity_bytes must be >= 1, got {self.capacity_bytes}")


@dataclass
class PowerTrace:
    """Samples of (t_ms, power_mw); timestamps strictly increasing."""

    samples: list[tuple[float, float]]

    def __post_init__(self):
        prev = None
        for idx, (t, p) in enumerate(self.samples):
            if prev is not None and not t > prev:
                raise ValueError(f"sample {idx}: timestamp {t} not after {prev}")
            if p < 0:
                raise ValueError(f"sample {idx}: negative power {p}")
            prev = t


def parse_trace_lines(lines) -> PowerTrace:
    """One `<epoch_ms> <power_mw>` pair per line, ASCII decimal."""
    samples = []
    for ln, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise ValueError(f"line {ln}: expected '<epoch_ms> <power_mw>', got {text!r}")
        samples.append((float(parts[0]), float(parts[1])))
    return PowerTrace(samples)


def integrate_energy(trace: PowerTrace, t0: float, t1: float) -> tuple[float, float]:
    """Trapezoidal energy over [t0, t1] ms and the window's mean power.

    Power between samples is linear; beyond the first/last sample it holds
    constant, so a single in-window sample integrates as constant power.
    Returns (energy_j, mean_power_w).
    """
    if not t1 > t0:
        raise ValueError(f"empty window: t0={t0}, t1={t1}")
    if not trace.samples:
        raise ValueError("trace has no samples")
    ts = np.array([t for t, _ in trace.samples], dtype=np.float64)
    ps = np.array([p for _, p in trace.samples], dtype=np.float64)
    inner = ts[(ts > t0) & (ts < t1)]
    knots = np.concatenate(([t0], inner, [t1]))
    vals = np.interp(knots, ts, ps)
    mw_ms = np.trapezoid(vals, knots)
    energy_j = float(mw_ms) * 1e-6
    mean_power_w = energy_j / ((t1 - t0) * 1e-3)
    return energy_j, mean_power_w


class NullSampler:
    """No power measurement; energy fields stay absent."""

    def start(self, t0_ms: float) -> None:
        pass

    def stop(self, t1_ms: float) -> PowerTrace | None:
        return None


class TraceReplaySampler:
    """Replays a recorded trace, rebased so it starts at the measured window.

    Useful for reproducing energy numbers from a saved run on any host.
    """

    def __init__(self, trace: PowerTrace):
        if not trace.samples:
            raise ValueError("replay trace has no samples")
        self.trace = trace
        self._t0 = None

    @classmethod
    def from_file(cls, path: str) -> "TraceReplaySampler":
        with open(path, "r", encoding="ascii") as fh:
            return cls(parse_trace_lines(fh))

    def start(self, t0_ms: float) -> None:
        self._t0 = t0_ms

    def stop(self, t1_ms: float) -> PowerTrace | None:
        if self._t0 is None:
            return None
        shift = self._t0 - self.trace.samples[0][0]
        return PowerTrace([(t + shift, p) for t, p in self.trace.samples])


class CommandSampler:
    """Spawns a metering command at window start and reads its stdout.

    The command must print `<epoch_ms> <power_mw>` lines until terminated.
    Any spawn/parse failure degrades to "no trace"; the run itself is never
    failed by the sampler.
    """

    def __init__(self, argv: list[str]):
        if not argv:
            raise ValueError("sampler command is empty")
        self.argv = argv
        self._proc = None
        self.last_error: str | None = None

    @classmethod
    def from_spec(cls, spec: str) -> "CommandSampler":
        return cls(shlex.split(spec))

    def start(self, t0_ms: float) -> None:
        try:
            self._proc = subprocess.Popen(
                self.argv, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
                text=True)
        except OSError as e:
            self.last_error = str(e)
            self._proc = None

    def stop(self, t1_ms: float) -> PowerTrace | None:
        if self._proc is None:
            return None
        proc, self._proc = self._proc, None
        try:
            proc.terminate()
            out, _ = proc.communicate(timeout=10)
        except subprocess.TimeoutExpired:
            proc.kill()
            self.last_error = "sampler did not exit after terminate"
            return None
        try:
            trace = parse_trace_lines(out.splitlines())
        except ValueError as e:
            self.last_error = str(e)
            return None
        if not trace.samples:
            self.last_error = "sampler produced no samples"
            return None
        return trace


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str  # gemm | jacobi | multigrid
    size: int
    iters: int | None = None  # jacobi steps per rep / V-cycles per rep
    levels: int | None = None
    pre_smooth: int = 1
    post_smooth: int = 1
    coarse_iters: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gemm", "jacobi", "multigrid"):
            raise ValueError(f"unknown workload {self.kind!r}")
        if self.size < 1:
            raise ValueError(f"size must be >= 1, got {self.size}")
        if self.iters is not None and self.iters < 1:
            raise ValueError(f"iters must be >= 1, got {self.iters}")


@dataclass
class BenchResult:
    workload: str
    size: int
    precision: str
    times_s: list[float]
    mean_s: float
    std_s: float
    min_s: float
    flops: int
    gflops_mean: float
    energy_j: float | None
    power_w_mean: float | None
    status: str  # ok | capacity_exceeded | error
    message: str | None = None

    def to_json_obj(self) -> dict:
        obj = {
            "workload": self.workload,
            "size": self.size,
            "precision": self.precision,
            "times_s": self.times_s,
            "mean_s": self.mean_s,
            "std_s": self.std_s,
            "min_s": self.min_s,
            "flops": self.flops,
            "gflops_mean": self.gflops_mean,
            "status": self.status,
        }
        if self.energy_j is not None:
            obj["energy_j"] = self.energy_j
            obj["power_w_mean"] = self.power_w_mean
        if self.message is not None:
            obj["message"] = self.message
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BenchResult":
        return cls(workload=obj["workload"], size=int(obj["size"]),
                   precision=obj["precision"],
                   times_s=[float(t) for t in obj["times_s"]],
                   mean_s=float(obj["mean_s"]), std_s=float(obj["std_s"]),
                   min_s=float(obj["min_s"]), flops=int(obj["flops"]),
                   gflops_mean=float(obj["gflops_mean"]),
                   energy_j=obj.get("energy_j"),
                   power_w_mean=obj.get("power_w_mean"),
                   status=obj["status"], message=obj.get("message"))


def _required_tensors(spec: WorkloadSpec) -> list[tuple[int, int]]:
    n = spec.size
    if spec.kind == "gemm":
        return [(n, n), (n, n), (n, n)]  # A, B, product
    # solver grids: field, rhs, mask, boundary values
    return [(n, n)] * 4


def estimated_bytes(spec: WorkloadSpec, precision: Precision) -> int:
    """Total bytes of the tensors a run of this workload would allocate."""
    return sum(tensor_bytes(r, c, precision) for r, c in _required_tensors(spec))


def _workload_flops(spec: WorkloadSpec, model: FlopModel) -> tuple[int, int]:
    """(iters actually used, flops per timed rep)."""
    n = spec.size
    if spec.kind == "gemm":
        return 1, gemm_flops(n, n, n)
    if spec.kind == "jacobi":
        iters = 1000 if spec.iters is None else spec.iters
        return iters, jacobi_flops(n, n, iters, model)
    cycles = 1 if spec.iters is None else spec.iters
    levels = spec.levels if spec.levels is not None else default_num_levels(n, n)
    cfg = VCycleConfig(num_levels=max(2, levels), pre_smooth=spec.pre_smooth,
                       post_smooth=spec.post_smooth, coarse_iters=spec.coarse_iters)
    return cycles, multigrid_flops(n, n, cfg, cycles, model)


def _build_runner(spec: WorkloadSpec, precision: Precision) -> Callable[[], object]:
    """Allocates the workload's tensors and returns the timed closure."""
    global allocation_count
    n = spec.size
    if spec.kind == "gemm":
        rng = np.random.default_rng(spec.seed)
        from sgbench.grids import Matrix
        from sgbench.ops import matmul
        a = Matrix(n, n, precision, rng.random((n, n), dtype=np.float32))
        b = Matrix(n, n, precision, rng.random((n, n), dtype=np.float32))
        allocation_count += 2
        return lambda: matmul(a, b)
    problem = hot_left_problem(n, n, precision)
    allocation_count += 4
    if spec.kind == "jacobi":
        iters = 1000 if spec.iters is None else spec.iters
        jcfg = JacobiConfig(iterations=iters, precision=precision)
        return lambda: jacobi_solve(problem, jcfg)
    cycles = 1 if spec.iters is None else spec.iters
    levels = spec.levels if spec.levels is not None else default_num_levels(n, n)
    vcfg = VCycleConfig(num_levels=max(2, levels), pre_smooth=spec.pre_smooth,
                        post_smooth=spec.post_smooth, coarse_iters=spec.coarse_iters,
                        precision=precision)

    def run_cycles():
        out = None
        for _ in range(cycles):
            out = vcycle(problem, vcfg)
        return out

    return run_cycles


def run_bench(spec: WorkloadSpec, cfg: BenchConfig,
              sampler=None,
              timer: Callable[[], float] | None = None,
              wall_clock_ms: Callable[[], float] | None = None,
              setup_hook: Callable[[], None] | None = None,
              model: FlopModel = DEFAULT_MODEL) -> BenchResult:
    """Warmup runs untimed, then cfg.reps timed runs with the sampler
    active over the whole timed window.

    timer/wall_clock_ms are injectable for testing; they default to
    time.perf_counter and epoch milliseconds.
    """
    if sampler is None:
        sampler = NullSampler()
    if timer is None:
        timer = time.perf_counter
    if wall_clock_ms is None:
        wall_clock_ms = lambda: time.time() * 1000.0

    _, flops = _workload_flops(spec, model)
    base = dict(workload=spec.kind, size=spec.size, precision=cfg.precision.value,
                flops=flops)

    # capacity gate: check every tensor before allocating anything
    if cfg.capacity_bytes is not None:
        for rows, cols in _required_tensors(spec):
            need = tensor_bytes(rows, cols, cfg.precision)
            if need > cfg.capacity_bytes:
                return BenchResult(times_s=[], mean_s=0.0, std_s=0.0, min_s=0.0,
                                   gflops_mean=0.0, energy_j=None, power_w_mean=None,
                                   status="capacity_exceeded",
                                   message=f"tensor {rows}x{cols} needs {need} bytes, "
                                           f"capacity is {cfg.capacity_bytes}",
                                   **base)

    try:
        run = _build_runner(spec, cfg.precision)
        if setup_hook is not None:
            setup_hook()
        for _ in range(cfg.warmup):
            run()
        times = []
        t0_ms = wall_clock_ms()
        sampler.start(t0_ms)
        for _ in range(cfg.reps):
            begin = timer()
            run()
            times.append(timer() - begin)
        t1_ms = wall_clock_ms()
        trace = sampler.stop(t1_ms)
    except Exception as e:
        return BenchResult(times_s=[], mean_s=0.0, std_s=0.0, min_s=0.0,
                           gflops_mean=0.0, energy_j=None, power_w_mean=None,
                           status="error", message=str(e), **base)

    mean_s = float(np.mean(times))
    energy_j = power_w = None
    if trace is not None:
        try:
            energy_j, power_w = integrate_energy(trace, t0_ms, t1_ms)
        except ValueError:
            energy_j = power_w = None  # sampler failure is not a run failure
    return BenchResult(times_s=[float(t) for t in times], mean_s=mean_s,
                       std_s=float(np.std(times)), min_s=float(np.min(times)),
                       gflops_mean=gflops(flops, mean_s) if mean_s > 0 else 0.0,
                       energy_j=energy_j, power_w_mean=power_w,
                       status="ok", **base)
