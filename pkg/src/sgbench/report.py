"""Measurement record sets and the comparison artifacts built from them.

A record is one measured value keyed by (device, workload, size, precision,
metric). Sets of records load from CSV or JSON (including the JSON arrays
the bench harness writes), turn into speedup or efficiency tables with
devices as columns, and emit as CSV, JSON, markdown, or plot-data series.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from sgbench.bench import BenchResult
from sgbench.perfmodel import speedup

METRICS = ("time_s", "gflops", "gflops_per_w", "energy_j", "power_mw")

# Only these two participate in speedup ratios; the rest are carried for
# plotting and raw dumps.
_RATIO_METRICS = ("time_s", "gflops")

_CSV_FIELDS = ("device", "workload", "size", "precision", "metric", "value")


@dataclass(frozen=True)
class Record:
    """One measurement. size 0 means the workload has no size axis (it
    renders as "-" in tables). source carries the originating figure or
    table caption for audit; empty for locally produced results."""

    device: str
    workload: str
    size: int
    precision: str
    metric: str
    value: float
    source: str = ""

    def __post_init__(self):
        if not self.device or not self.workload:
            raise ValueError("device and workload must be nonempty")
        if self.size < 0:
            raise ValueError(f"size must be >= 0, got {self.size}")
        if self.metric not in METRICS:
            raise ValueError(
                f"unknown metric {self.metric!r}, expected one of {METRICS}")
        if not math.isfinite(self.value):
            raise ValueError(f"value must be finite, got {self.value}")

    @property
    def key(self) -> tuple[str, str, int, str, str]:
        return (self.device, self.workload, self.size, self.precision, self.metric)


class ResultSet:
    """Ordered collection of records with unique keys."""

    def __init__(self, records=()):
        self.records: list[Record] = []
        self._by_key: dict[tuple, Record] = {}
        for r in records:
            self.append(r)

    def append(self, r: Record) -> None:
        if r.key in self._by_key:
            raise ValueError(f"duplicate key {r.key}")
        self._by_key[r.key] = r
        self.records.append(r)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def value(self, device: str, workload: str, size: int, precision: str,
              metric: str) -> float | None:
        r = self._by_key.get((device, workload, size, precision, metric))
        return None if r is None else r.value


def _parse_csv_text(text: str) -> ResultSet:
    rs = ResultSet()
    if not text.strip():
        return rs
    rows = list(csv.reader(io.StringIO(text)))
    header = tuple(rows[0])
    if header not in (_CSV_FIELDS, _CSV_FIELDS + ("source",)):
        raise ValueError(
            f"line 1: expected header {','.join(_CSV_FIELDS)}[,source], "
            f"got {','.join(header)}")
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(
                f"line {ln}: expected {len(header)} fields, got {len(row)}")
        try:
            size = int(row[2])
            value = float(row[5])
        except ValueError as e:
            raise ValueError(f"line {ln}: {e}") from None
        source = row[6] if len(row) == 7 else ""
        try:
            rs.append(Record(row[0], row[1], size, row[3], row[4], value, source))
        except ValueError as e:
            raise ValueError(f"line {ln}: {e}") from None
    return rs


def _records_from_bench(obj: list) -> list[Record]:
    # Bench output carries no device identity; label everything "host".
    # Each result expands to one record per metric it can supply.
    out = []
    for item in obj:
        br = BenchResult.from_json_obj(item)
        if br.status != "ok":
            continue
        base = ("host", br.workload, br.size, br.precision)
        out.append(Record(*base, "time_s", br.mean_s))
        out.append(Record(*base, "gflops", br.gflops_mean))
        if br.energy_j is not None:
            out.append(Record(*base, "energy_j", br.energy_j))
        if br.power_w_mean is not None:
            out.append(Record(*base, "power_mw", br.power_w_mean * 1000.0))
            if br.power_w_mean > 0:
                out.append(Record(*base, "gflops_per_w",
                                  br.gflops_mean / br.power_w_mean))
    return out


def _parse_json_text(text: str) -> ResultSet:
    obj = json.loads(text)
    if isinstance(obj, list):
        return ResultSet(_records_from_bench(obj))
    if isinstance(obj, dict) and "records" in obj:
        rs = ResultSet()
        for i, item in enumerate(obj["records"]):
            try:
                rs.append(Record(item["device"], item["workload"],
                                 int(item["size"]), item["precision"],
                                 item["metric"], float(item["value"]),
                                 item.get("source", "")))
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"record {i}: {e}") from None
        return rs
    raise ValueError(
        "expected a JSON array of bench results or an object with 'records'")


def load_results(path) -> ResultSet:
    """Load a result file; .json files may be either the bench harness's
    output array or an emitted record set, anything else parses as CSV."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix == ".json":
        return _parse_json_text(text)
    return _parse_csv_text(text)


def load_embedded() -> ResultSet:
    """The dataset shipped with the package (every figure coordinate and
    table cell, tagged with its source caption)."""
    text = (resources.files("sgbench") / "data" / "paper_data.csv").read_text(
        encoding="utf-8")
    return _parse_csv_text(text)


@dataclass
class Table:
    """Devices-as-columns table. Each row is (workload, size, cells) with
    one cell per column; None renders as "-". cell_format of None prints
    full float repr (efficiency/raw tables); speedup tables use "%.2f"."""

    title: str
    columns: list[str]
    rows: list[tuple[str, int, list[float | None]]]
    cell_format: str | None = None


def _fmt_cell(v: float | None, pattern: str | None) -> str:
    if v is None:
        return "-"
    return pattern % v if pattern else repr(float(v))


def _fmt_size(size: int) -> str:
    return "-" if size == 0 else str(size)


def speedup_table(rs: ResultSet, baseline_device: str, baseline_precision: str,
                  pairs: list[tuple[str, int]] | None = None) -> Table:
    """Speedup of every device against the baseline, per (workload, size).

    The ratio direction follows the metric the baseline has for that row:
    time_s divides baseline by candidate, gflops the other way around.
    time_s wins when both exist. Candidates are compared only on the same
    metric and precision as the baseline; missing entries render as "-".
    """

    def row_metric(wl: str, size: int) -> str | None:
        for m in _RATIO_METRICS:
            if rs.value(baseline_device, wl, size, baseline_precision, m) is not None:
                return m
        return None

    if pairs is None:
        pairs = []
        seen = set()
        for r in rs:
            p = (r.workload, r.size)
            if p in seen:
                continue
            seen.add(p)
            if row_metric(*p) is not None:
                pairs.append(p)
    else:
        gaps = [p for p in pairs if row_metric(*p) is None]
        if gaps:
            raise ValueError(
                "no baseline measurement for: "
                + ", ".join(f"{wl} size {size}" for wl, size in gaps))

    # Column set: devices with at least one time/rate record at the baseline
    # precision, in first-appearance order, baseline first.
    columns = []
    for r in rs:
        if r.precision != baseline_precision or r.metric not in _RATIO_METRICS:
            continue
        if r.device not in columns:
            columns.append(r.device)
    if baseline_device not in columns:
        raise ValueError(
            f"baseline {baseline_device!r} has no time or rate records at "
            f"precision {baseline_precision!r}")
    columns.remove(baseline_device)
    columns.insert(0, baseline_device)

    rows = []
    for wl, size in pairs:
        m = row_metric(wl, size)
        base = rs.value(baseline_device, wl, size, baseline_precision, m)
        kind = "time" if m == "time_s" else "rate"
        cells = []
        for dev in columns:
            cand = rs.value(dev, wl, size, baseline_precision, m)
            cells.append(None if cand is None else speedup(base, cand, kind))
        rows.append((wl, size, cells))

    title = f"Speedup from {baseline_device} {baseline_precision.upper()}"
    return Table(title=title, columns=columns, rows=rows, cell_format="%.2f")


def efficiency_table(rs: ResultSet, precision: str) -> Table:
    """All GFLOPS/W measurements at one precision, devices as columns."""
    columns: list[str] = []
    index: list[tuple[str, int]] = []
    for r in rs:
        if r.metric != "gflops_per_w" or r.precision != precision:
            continue
        if r.device not in columns:
            columns.append(r.device)
        if (r.workload, r.size) not in index:
            index.append((r.workload, r.size))
    rows = [(wl, size,
             [rs.value(dev, wl, size, precision, "gflops_per_w") for dev in columns])
            for wl, size in index]
    return Table(title=f"Energy efficiency (GFLOPS/W), {precision}",
                 columns=columns, rows=rows, cell_format=None)


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


def series_groups(rs: ResultSet):
    """Records grouped into plottable series.

    Returns an ordered dict: (workload, metric) -> list of
    (device, precision, points) with points sorted by size.
    """
    groups: dict[tuple[str, str], dict[tuple[str, str], list]] = {}
    for r in rs:
        g = groups.setdefault((r.workload, r.metric), {})
        g.setdefault((r.device, r.precision), []).append((r.size, r.value))
    return {
        gk: [(dev, prec, sorted(pts)) for (dev, prec), pts in g.items()]
        for gk, g in groups.items()
    }


def _emit_plot_data(rs: ResultSet) -> dict[str, bytes]:
    files = {}
    for (wl, metric), series in series_groups(rs).items():
        for dev, prec, points in series:
            name = "_".join(_slug(p) for p in (wl, metric, dev, prec)) + ".dat"
            body = "".join(f"{size} {repr(float(v))}\n" for size, v in points)
            files[name] = body.encode("ascii")
    return files


def _emit_table(table: Table, fmt: str) -> bytes:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["workload", "size"] + table.columns)
        for wl, size, cells in table.rows:
            w.writerow([wl, _fmt_size(size)]
                       + [_fmt_cell(c, table.cell_format) for c in cells])
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        obj = {
            "title": table.title,
            "columns": ["workload", "size"] + table.columns,
            "rows": [[wl, size] + list(cells) for wl, size, cells in table.rows],
        }
        return (json.dumps(obj, indent=2) + "\n").encode("utf-8")
    if fmt == "markdown":
        head = ["workload", "size"] + table.columns
        lines = [f"### {table.title}", ""]
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "|".join([" --- "] * len(head)) + "|")
        for wl, size, cells in table.rows:
            rendered = [wl, _fmt_size(size)] + [_fmt_cell(c, table.cell_format)
                                                for c in cells]
            lines.append("| " + " | ".join(rendered) + " |")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError("plot-data output needs a result set, not a table")


def _emit_result_set(rs: ResultSet, fmt: str) -> bytes | dict[str, bytes]:
    if fmt == "csv":
        with_source = any(r.source for r in rs)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(_CSV_FIELDS) + (["source"] if with_source else []))
        for r in rs:
            row = [r.device, r.workload, r.size, r.precision, r.metric, r.value]
            if with_source:
                row.append(r.source)
            w.writerow(row)
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        records = []
        for r in rs:
            obj = {"device": r.device, "workload": r.workload, "size": r.size,
                   "precision": r.precision, "metric": r.metric, "value": r.value}
            if r.source:
                obj["source"] = r.source
            records.append(obj)
        return (json.dumps({"records": records}, indent=2) + "\n").encode("utf-8")
    if fmt == "markdown":
        lines = ["| " + " | ".join(_CSV_FIELDS) + " |",
                 "|" + "|".join([" --- "] * len(_CSV_FIELDS)) + "|"]
        for r in rs:
            lines.append("| " + " | ".join(
                [r.device, r.workload, str(r.size), r.precision, r.metric,
                 repr(float(r.value))]) + " |")
        return ("\n".join(lines) + "\n").encode("utf-8")
    return _emit_plot_data(rs)


def emit(obj, fmt: str) -> bytes | dict[str, bytes]:
    """Serialize a Table or ResultSet. plot-data returns a dict of
    filename -> bytes (one file per series); other formats return bytes.
    Output is deterministic: same input, same bytes."""
    if fmt not in ("csv", "json", "markdown", "plot-data"):
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(obj, Table):
        return _emit_table(obj, fmt)
    if isinstance(obj, ResultSet):
        return _emit_result_set(obj, fmt)
    raise TypeError(f"cannot emit {type(obj).__name__}")
