"""Command-line entry point: bench, verify, and report subcommands.

Exit codes are a stable contract: 0 success (capacity-gated runs included),
1 usage error, 2 runtime error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from sgbench import report as report_mod
from sgbench import verify as verify_mod
from sgbench.bench import (BenchConfig, CommandSampler, NullSampler,
                           TraceReplaySampler, WorkloadSpec, estimated_bytes,
                           run_bench)
from sgbench.grids import Precision

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3

# Default size sweeps mirror the benchmark size lists (union over chips).
DEFAULT_SIZES = {
    "gemm": (256, 512, 1024, 2048, 4096, 8192, 12288, 14336, 16384),
    "jacobi": (256, 512, 1024, 2048, 4096, 6144, 8192, 10240, 12288, 16384, 32768),
    "multigrid": (512, 1024, 2048, 4096, 8192, 10240, 12288, 16384, 32768),
}

_FOOTPRINT_WARN_BYTES = 1 << 30  # warn above 1 GiB of working tensors


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="sgb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a workload benchmark")
    b.add_argument("workload", choices=("gemm", "jacobi", "multigrid"))
    b.add_argument("--size", type=int, default=None,
                   help="square problem size N (default: the workload's full sweep)")
    b.add_argument("--dtype", choices=("fp16", "fp32"), default="fp32",
                   help="storage precision (default: fp32)")
    b.add_argument("--iters", type=int, default=None,
                   help="jacobi steps per rep (default 1000) or V-cycles per "
                        "rep (default 1); ignored for gemm")
    b.add_argument("--levels", type=int, default=None,
                   help="multigrid levels (default: halve until min dim <= 16)")
    b.add_argument("--pre", type=int, default=1,
                   help="pre-smoothing steps per level (default: 1)")
    b.add_argument("--post", type=int, default=1,
                   help="post-smoothing steps per level (default: 1)")
    b.add_argument("--coarse-iters", type=int, default=50,
                   help="jacobi steps on the coarsest level (default: 50)")
    b.add_argument("--reps", type=int, default=10,
                   help="timed repetitions (default: 10)")
    b.add_argument("--warmup", type=int, default=2,
                   help="untimed warmup runs (default: 2)")
    b.add_argument("--capacity", type=int, default=None, metavar="BYTES",
                   help="per-tensor byte limit; larger allocations report "
                        "capacity_exceeded (default: no limit)")
    b.add_argument("--sampler", default="null",
                   help="power sampler: null, trace:<path>, or cmd:<argv> "
                        "(default: null)")
    b.add_argument("--seed", type=int, default=0,
                   help="seed for gemm operand generation (default: 0)")
    b.add_argument("--out", default="results.json",
                   help="JSON array to append results to (default: results.json)")
    b.set_defaults(func=_cmd_bench, _sub=b)

    v = sub.add_parser("verify", help="run fixtures, oracles, and invariants")
    v.add_argument("--fixtures", default=None, metavar="DIR",
                   help="fixture directory (default: $SGB_FIXTURES, then the "
                        "packaged set)")
    v.add_argument("--filter", default=None, metavar="NAME",
                   help="run only checks whose name contains NAME (default: all)")
    v.set_defaults(func=_cmd_verify, _sub=v)

    r = sub.add_parser("report", help="emit comparison tables and series")
    r.add_argument("--input", default="paper:embedded",
                   help="results.json, a records CSV, or paper:embedded for "
                        "the shipped dataset (default: paper:embedded)")
    r.add_argument("--kind", choices=("speedup", "efficiency", "raw"),
                   default="speedup", help="artifact to build (default: speedup)")
    r.add_argument("--baseline", default="CPU M1,fp16", metavar="DEV,PREC",
                   help='baseline "device,precision" for speedup tables; the '
                        'precision also selects efficiency/plot rows '
                        '(default: "CPU M1,fp16")')
    r.add_argument("--format", choices=("csv", "json", "markdown", "plot-data"),
                   default="markdown", help="output format (default: markdown)")
    r.add_argument("--out", default="-",
                   help="output file, - for stdout; plot-data treats this as "
                        "a directory (default: -, plot-data: plots)")
    r.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering on the plot-data path")
    r.set_defaults(func=_cmd_report, _sub=r)

    return parser


def _make_sampler(spec: str):
    if spec == "null":
        return NullSampler()
    if spec.startswith("trace:"):
        return TraceReplaySampler.from_file(spec[len("trace:"):])
    if spec.startswith("cmd:"):
        return CommandSampler.from_spec(spec[len("cmd:"):])
    raise ValueError(
        f"unknown sampler {spec!r}; expected null, trace:<path>, or cmd:<argv>")


def _append_result(path: str, result) -> None:
    p = Path(path)
    results = []
    if p.exists() and p.read_text(encoding="utf-8").strip():
        results = json.loads(p.read_text(encoding="utf-8"))
        if not isinstance(results, list):
            raise ValueError(f"{path} does not hold a JSON array")
    results.append(result.to_json_obj())
    p.write_text(json.dumps(results, indent=2) + "\n", encoding="utf-8")


def _cmd_bench(args, parser) -> int:
    precision = Precision.parse(args.dtype)
    try:
        sampler = _make_sampler(args.sampler)
    except ValueError as e:
        parser.error(str(e))
    except OSError as e:
        print(f"sgb: cannot read trace: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    sizes = [args.size] if args.size is not None else list(DEFAULT_SIZES[args.workload])
    cfg = BenchConfig(warmup=args.warmup, reps=args.reps,
                      capacity_bytes=args.capacity, precision=precision)
    failed = False
    for size in sizes:
        try:
            spec = WorkloadSpec(kind=args.workload, size=size, iters=args.iters,
                                levels=args.levels, pre_smooth=args.pre,
                                post_smooth=args.post,
                                coarse_iters=args.coarse_iters, seed=args.seed)
        except ValueError as e:
            parser.error(str(e))
        footprint = estimated_bytes(spec, precision)
        if footprint > _FOOTPRINT_WARN_BYTES:
            print(f"warning: {args.workload} size {size} needs about "
                  f"{footprint / 2**30:.1f} GiB of tensors", file=sys.stderr)
        result = run_bench(spec, cfg, sampler=sampler)
        _append_result(args.out, result)
        if result.status == "ok":
            line = (f"{args.workload} size {size} {args.dtype}: "
                    f"mean {result.mean_s:.6f} s, {result.gflops_mean:.2f} GFLOPS")
            if result.energy_j is not None:
                line += f", {result.energy_j:.3f} J"
        else:
            line = f"{args.workload} size {size} {args.dtype}: {result.status}"
            if result.message:
                line += f" ({result.message})"
            failed = failed or result.status == "error"
        print(line)
    print(f"results appended to {args.out}")
    return EXIT_RUNTIME if failed else EXIT_OK


def _cmd_verify(args, parser) -> int:
    try:
        results = verify_mod.run_all(fixtures_dir=args.fixtures,
                                     name_filter=args.filter)
    except FileNotFoundError as e:
        print(f"sgb: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    for r in results:
        line = f"{'PASS' if r.ok else 'FAIL'} {r.name}"
        if r.detail:
            line += f": {r.detail}"
        print(line)
    failures = sum(1 for r in results if not r.ok)
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return EXIT_VERIFY if failures else EXIT_OK


def _parse_baseline(text: str, parser) -> tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        parser.error(f'--baseline must be "device,precision", got {text!r}')
    return parts[0], parts[1]


def _write_bytes(out: str, data: bytes) -> None:
    if out == "-":
        sys.stdout.write(data.decode("utf-8"))
    else:
        Path(out).write_bytes(data)
        print(f"wrote {out}")


def _cmd_report(args, parser) -> int:
    device, prec = _parse_baseline(args.baseline, parser)
    if args.kind == "speedup" and args.format == "plot-data":
        parser.error("speedup is a table; plot-data applies to raw or efficiency")

    try:
        if args.input == "paper:embedded":
            rs = report_mod.load_embedded()
        else:
            rs = report_mod.load_results(args.input)
    except (OSError, ValueError) as e:
        print(f"sgb: cannot load {args.input}: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    try:
        if args.format == "plot-data":
            if args.kind == "efficiency":
                rs = report_mod.ResultSet(
                    r for r in rs
                    if r.metric == "gflops_per_w" and r.precision == prec)
            out_dir = Path("plots" if args.out == "-" else args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            files = report_mod.emit(rs, "plot-data")
            for name, data in files.items():
                (out_dir / name).write_bytes(data)
            note = f"wrote {len(files)} series files"
            if not args.no_figures:
                from sgbench.figures import render_figures
                note += f" and {len(render_figures(rs, out_dir))} figures"
            print(f"{note} to {out_dir}")
            return EXIT_OK
        if args.kind == "speedup":
            obj = report_mod.speedup_table(rs, device, prec)
        elif args.kind == "efficiency":
            obj = report_mod.efficiency_table(rs, prec)
        else:
            obj = rs
        _write_bytes(args.out, report_mod.emit(obj, args.format))
        return EXIT_OK
    except ValueError as e:
        print(f"sgb: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, args._sub)
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as e:  # anything unplanned is a runtime error, not a crash
        print(f"sgb: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
