"""Benchmark harness: timing protocol, energy integration, capacity gate.

Timing tests inject scripted timer/wall-clock callables so every duration
is deterministic; no test here depends on real elapsed time.
"""

import sys

import numpy as np
import pytest

import sgbench.bench as bench_mod
from sgbench.bench import (BenchConfig, BenchResult, CommandSampler,
                           NullSampler, PowerTrace, TraceReplaySampler,
                           WorkloadSpec, estimated_bytes, integrate_energy,
                           parse_trace_lines, run_bench, tensor_bytes)
from sgbench.grids import Precision
from sgbench.perfmodel import gemm_flops, gflops, jacobi_flops

FP32 = Precision.FP32
FP16 = Precision.FP16_STORAGE


def _scripted(values):
    it = iter(values)
    return lambda: next(it)


def _wait_for_exit(sampler, timeout_s=10.0):
    # the interpreter the sampler spawned needs a moment to boot and print;
    # stop() would terminate it mid-startup otherwise
    import time
    deadline = time.monotonic() + timeout_s
    while sampler._proc is not None and sampler._proc.poll() is None:
        if time.monotonic() > deadline:
            raise TimeoutError("sampler child did not exit")
        time.sleep(0.01)


class TestEnergyIntegration:
    def test_constant_power(self):
        trace = PowerTrace([(0.0, 4000.0), (500.0, 4000.0)])
        e, p = integrate_energy(trace, 0.0, 500.0)
        assert e == pytest.approx(2.0, rel=1e-12)  # 4 W for 0.5 s
        assert p == pytest.approx(4.0, rel=1e-12)

    def test_linear_ramp(self):
        trace = PowerTrace([(0.0, 0.0), (500.0, 4000.0)])
        e, p = integrate_energy(trace, 0.0, 500.0)
        assert e == pytest.approx(1.0, rel=1e-12)
        assert p == pytest.approx(2.0, rel=1e-12)

    def test_sawtooth_closed_form(self):
        # 100 ms period, 0 -> 4000 mW ramp with a sharp reset; ten periods.
        # closed form: mean 2000 mW over 1000 ms = 2.0 J
        samples = []
        for k in range(10):
            base = 100.0 * k
            samples.append((base, 0.0))
            samples.append((base + 99.999, 4000.0))
        samples.append((1000.0, 0.0))
        e, p = integrate_energy(PowerTrace(samples), 0.0, 1000.0)
        assert abs(e - 2.0) / 2.0 < 0.01
        assert abs(p - 2.0) / 2.0 < 0.01

    def test_partial_window(self):
        trace = PowerTrace([(0.0, 1000.0), (100.0, 3000.0)])
        e, p = integrate_energy(trace, 25.0, 75.0)
        assert e == pytest.approx(0.1, rel=1e-12)  # mean 2 W over 50 ms
        assert p == pytest.approx(2.0, rel=1e-12)

    def test_additivity(self):
        rng = np.random.default_rng(83)
        ts = np.sort(rng.uniform(0.0, 1000.0, 40))
        ts = np.unique(ts)
        trace = PowerTrace([(float(t), float(v)) for t, v in
                            zip(ts, rng.uniform(100.0, 5000.0, ts.size))])
        for mid in (137.0, 500.0, 804.25):
            whole, _ = integrate_energy(trace, 10.0, 990.0)
            left, _ = integrate_energy(trace, 10.0, mid)
            right, _ = integrate_energy(trace, mid, 990.0)
            assert abs((left + right) - whole) / whole < 1e-9

    def test_single_sample_extends_as_constant(self):
        e, p = integrate_energy(PowerTrace([(50.0, 3000.0)]), 0.0, 100.0)
        assert e == pytest.approx(0.3, rel=1e-12)
        assert p == pytest.approx(3.0, rel=1e-12)

    def test_window_wider_than_trace(self):
        trace = PowerTrace([(400.0, 1000.0), (600.0, 1000.0)])
        e, p = integrate_energy(trace, 0.0, 1000.0)
        assert p == pytest.approx(1.0, rel=1e-12)  # edges hold constant

    def test_errors(self):
        trace = PowerTrace([(0.0, 1.0)])
        with pytest.raises(ValueError):
            integrate_energy(trace, 10.0, 10.0)
        with pytest.raises(ValueError):
            integrate_energy(PowerTrace([]), 0.0, 1.0)


class TestTraceParsing:
    def test_parse_and_blank_lines(self):
        trace = parse_trace_lines(["1000 250", "", "  1100 300  ", "\n"])
        assert trace.samples == [(1000.0, 250.0), (1100.0, 300.0)]

    def test_malformed_line_numbered(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_trace_lines(["1000 250", "1100 300 extra"])

    def test_timestamps_must_increase(self):
        with pytest.raises(ValueError, match="sample 1"):
            PowerTrace([(5.0, 1.0), (5.0, 2.0)])

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            PowerTrace([(0.0, -1.0)])


class TestSamplers:
    def test_null_sampler(self):
        s = NullSampler()
        s.start(0.0)
        assert s.stop(100.0) is None

    def test_replay_rebases_to_window(self):
        recorded = PowerTrace([(5000.0, 100.0), (5100.0, 200.0)])
        s = TraceReplaySampler(recorded)
        s.start(100000.0)
        out = s.stop(100200.0)
        assert out.samples[0] == (100000.0, 100.0)
        assert out.samples[1] == (100100.0, 200.0)

    def test_replay_from_file(self, tmp_path):
        path = tmp_path / "trace.txt"
        path.write_text("10 500\n20 700\n", encoding="ascii")
        s = TraceReplaySampler.from_file(str(path))
        s.start(1000.0)
        assert s.stop(1020.0).samples == [(1000.0, 500.0), (1010.0, 700.0)]

    def test_replay_requires_samples(self):
        with pytest.raises(ValueError):
            TraceReplaySampler(PowerTrace([]))

    def test_command_sampler_collects_lines(self):
        s = CommandSampler([sys.executable, "-c",
                            "print('1000 4000'); print('2000 4000')"])
        s.start(0.0)
        _wait_for_exit(s)
        trace = s.stop(1.0)
        assert trace is not None
        assert trace.samples == [(1000.0, 4000.0), (2000.0, 4000.0)]

    def test_command_sampler_spawn_failure_degrades(self):
        s = CommandSampler(["/nonexistent/power-meter"])
        s.start(0.0)
        assert s.stop(1.0) is None
        assert s.last_error is not None

    def test_command_sampler_garbage_output_degrades(self):
        s = CommandSampler([sys.executable, "-c", "print('not a sample')"])
        s.start(0.0)
        _wait_for_exit(s)
        assert s.stop(1.0) is None
        assert "line 1" in s.last_error

    def test_from_spec_and_validation(self):
        s = CommandSampler.from_spec("powermetrics --samplers cpu_power")
        assert s.argv == ["powermetrics", "--samplers", "cpu_power"]
        with pytest.raises(ValueError):
            CommandSampler([])


class TestCapacityGate:
    def test_tensor_bytes(self):
        assert tensor_bytes(4096, 4096, FP16) == 33_554_432
        assert tensor_bytes(4096, 4096, FP32) == 67_108_864
        assert tensor_bytes(32768, 32768, FP16) == 2_147_483_648
        with pytest.raises(ValueError):
            tensor_bytes(0, 4, FP32)

    def test_estimated_bytes_counts_all_tensors(self):
        assert estimated_bytes(WorkloadSpec("gemm", 128), FP32) == 3 * 128 * 128 * 4
        assert estimated_bytes(WorkloadSpec("jacobi", 128), FP16) == 4 * 128 * 128 * 2

    def test_gate_trips_before_any_allocation(self):
        bench_mod.allocation_count = 0
        spec = WorkloadSpec("gemm", 4096)
        cfg = BenchConfig(capacity_bytes=30_000_000, precision=FP16, reps=1)
        res = run_bench(spec, cfg)
        assert res.status == "capacity_exceeded"
        assert bench_mod.allocation_count == 0
        assert res.times_s == [] and res.energy_j is None
        assert "4096x4096" in res.message
        assert "33554432" in res.message and "30000000" in res.message

    def test_within_capacity_runs(self):
        spec = WorkloadSpec("jacobi", 64, iters=5)
        cfg = BenchConfig(capacity_bytes=30_000_000, precision=FP16,
                          reps=1, warmup=0)
        res = run_bench(spec, cfg)
        assert res.status == "ok"
        assert len(res.times_s) == 1

    def test_gate_checks_workload_precision(self):
        spec = WorkloadSpec("gemm", 2048)
        fp16_need = tensor_bytes(2048, 2048, FP16)  # 8_388_608
        cfg16 = BenchConfig(capacity_bytes=fp16_need, precision=FP16,
                            reps=1, warmup=0)
        assert run_bench(spec, cfg16).status == "ok"
        cfg32 = BenchConfig(capacity_bytes=fp16_need, precision=FP32,
                            reps=1, warmup=0)
        assert run_bench(spec, cfg32).status == "capacity_exceeded"


class TestRunBench:
    def test_scripted_timers(self):
        spec = WorkloadSpec("gemm", 8)
        cfg = BenchConfig(reps=3, warmup=0)
        timer = _scripted([0.0, 1.0, 1.0, 3.0, 3.0, 6.0])
        wall = _scripted([1000.0, 2000.0])
        res = run_bench(spec, cfg, timer=timer, wall_clock_ms=wall)
        assert res.times_s == [1.0, 2.0, 3.0]
        assert res.mean_s == 2.0 and res.min_s == 1.0
        assert res.std_s == pytest.approx(np.std([1.0, 2.0, 3.0]))
        assert res.flops == gemm_flops(8, 8, 8)
        assert res.gflops_mean == gflops(res.flops, 2.0)

    def test_setup_hook_runs_before_timed_window(self):
        events = []
        count = [0]

        def timer():
            events.append("tick")
            count[0] += 1
            return float(count[0])

        res = run_bench(WorkloadSpec("gemm", 8),
                        BenchConfig(reps=2, warmup=3),
                        timer=timer,
                        wall_clock_ms=_scripted([0.0, 1.0]),
                        setup_hook=lambda: events.append("setup"))
        assert res.status == "ok"
        # setup precedes every timer tick; warmup adds no ticks
        assert events == ["setup"] + ["tick"] * 4

    def test_energy_attached_from_replay(self):
        recorded = PowerTrace([(0.0, 4000.0), (1000.0, 4000.0)])
        res = run_bench(WorkloadSpec("gemm", 8),
                        BenchConfig(reps=2, warmup=0),
                        sampler=TraceReplaySampler(recorded),
                        timer=_scripted([0.0, 0.5, 0.5, 1.0]),
                        wall_clock_ms=_scripted([5000.0, 6000.0]))
        assert res.energy_j == pytest.approx(4.0, rel=1e-9)
        assert res.power_w_mean == pytest.approx(4.0, rel=1e-9)

    def test_energy_from_command_sampler(self):
        inner = CommandSampler([sys.executable, "-c",
                                "print('1000 4000'); print('2000 4000')"])

        class Patient:
            # test-only shim: wait for the child to flush before stop()
            def start(self, t):
                inner.start(t)

            def stop(self, t):
                _wait_for_exit(inner)
                return inner.stop(t)

        res = run_bench(WorkloadSpec("gemm", 8),
                        BenchConfig(reps=1, warmup=0),
                        sampler=Patient(),
                        timer=_scripted([0.0, 1.0]),
                        wall_clock_ms=_scripted([1000.0, 2000.0]))
        assert res.status == "ok"
        assert res.energy_j == pytest.approx(4.0, rel=1e-9)

    def test_sampler_failure_never_fails_run(self):
        sampler = CommandSampler(["/nonexistent/power-meter"])
        res = run_bench(WorkloadSpec("gemm", 8),
                        BenchConfig(reps=1, warmup=0), sampler=sampler)
        assert res.status == "ok"
        assert res.energy_j is None and res.power_w_mean is None
        assert sampler.last_error is not None

    def test_jacobi_default_iters(self):
        res = run_bench(WorkloadSpec("jacobi", 32, iters=2),
                        BenchConfig(reps=1, warmup=0))
        assert res.flops == jacobi_flops(32, 32, 2)

    def test_real_timing_sane(self):
        res = run_bench(WorkloadSpec("gemm", 64), BenchConfig(reps=3, warmup=1))
        assert res.status == "ok"
        assert res.min_s <= res.mean_s
        assert res.std_s >= 0.0
        assert res.gflops_mean == gflops(res.flops, res.mean_s)

    def test_runner_exception_becomes_error_status(self):
        def boom():
            raise OSError("induced failure")

        res = run_bench(WorkloadSpec("gemm", 8), BenchConfig(reps=1, warmup=0),
                        setup_hook=boom)
        assert res.status == "error"
        assert "induced failure" in res.message


class TestBenchResultJson:
    def test_field_names_exact(self):
        res = run_bench(WorkloadSpec("gemm", 8), BenchConfig(reps=1, warmup=0),
                        timer=_scripted([0.0, 1.0]),
                        wall_clock_ms=_scripted([0.0, 1.0]))
        obj = res.to_json_obj()
        assert set(obj) == {"workload", "size", "precision", "times_s",
                            "mean_s", "std_s", "min_s", "flops",
                            "gflops_mean", "status"}
        assert obj["workload"] == "gemm" and obj["precision"] == "fp32"

    def test_optional_fields_present_when_set(self):
        recorded = PowerTrace([(0.0, 1000.0), (1000.0, 1000.0)])
        res = run_bench(WorkloadSpec("gemm", 8), BenchConfig(reps=1, warmup=0),
                        sampler=TraceReplaySampler(recorded),
                        timer=_scripted([0.0, 1.0]),
                        wall_clock_ms=_scripted([0.0, 1000.0]))
        obj = res.to_json_obj()
        assert "energy_j" in obj and "power_w_mean" in obj

    def test_round_trip(self):
        res = run_bench(WorkloadSpec("jacobi", 16, iters=3),
                        BenchConfig(reps=2, warmup=0))
        back = BenchResult.from_json_obj(res.to_json_obj())
        assert back == res


class TestSpecValidation:
    def test_workload_spec(self):
        with pytest.raises(ValueError):
            WorkloadSpec("fft", 64)
        with pytest.raises(ValueError):
            WorkloadSpec("gemm", 0)
        with pytest.raises(ValueError):
            WorkloadSpec("jacobi", 64, iters=0)

    def test_bench_config(self):
        with pytest.raises(ValueError):
            BenchConfig(reps=0)
        with pytest.raises(ValueError):
            BenchConfig(warmup=-1)
        with pytest.raises(ValueError):
            BenchConfig(capacity_bytes=0)
