"""Record sets, comparison tables, and serialization.

The speedup assertions freeze the published numbers the shipped dataset
must reproduce; every frozen cell is checked at 2% so transcription noise
in the underlying measurements cannot mask a broken ratio.
"""

import json

import pytest

from sgbench.report import (METRICS, Record, ResultSet, Table,
                            efficiency_table, emit, load_embedded,
                            load_results, series_groups, speedup_table)

GOOD_CSV = """device,workload,size,precision,metric,value
CPU M1,gemm,256,fp32,time_s,0.5
GPU M1,gemm,256,fp32,time_s,0.1
"""


def _rec(device="CPU M1", workload="gemm", size=256, precision="fp32",
         metric="time_s", value=1.0, source=""):
    return Record(device, workload, size, precision, metric, value, source)


class TestRecord:
    def test_validation(self):
        with pytest.raises(ValueError):
            _rec(device="")
        with pytest.raises(ValueError):
            _rec(size=-1)
        with pytest.raises(ValueError, match="watts"):
            _rec(metric="watts")
        with pytest.raises(ValueError):
            _rec(value=float("nan"))
        with pytest.raises(ValueError):
            _rec(value=float("inf"))

    def test_metrics_tuple(self):
        assert METRICS == ("time_s", "gflops", "gflops_per_w", "energy_j",
                           "power_mw")


class TestResultSet:
    def test_append_and_lookup(self):
        rs = ResultSet([_rec(value=0.5)])
        assert len(rs) == 1
        assert rs.value("CPU M1", "gemm", 256, "fp32", "time_s") == 0.5
        assert rs.value("CPU M1", "gemm", 512, "fp32", "time_s") is None

    def test_duplicate_key_named(self):
        rs = ResultSet([_rec()])
        with pytest.raises(ValueError, match=r"duplicate key .*CPU M1.*gemm"):
            rs.append(_rec(value=2.0))  # same key, different value

    def test_preserves_order(self):
        rs = ResultSet([_rec(size=512), _rec(size=256)])
        assert [r.size for r in rs] == [512, 256]


class TestCsvParsing:
    def test_good_text(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text(GOOD_CSV, encoding="ascii")
        rs = load_results(p)
        assert len(rs) == 2
        assert rs.value("GPU M1", "gemm", 256, "fp32", "time_s") == 0.1

    def test_source_column(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("device,workload,size,precision,metric,value,source\n"
                     "CPU M1,gemm,256,fp32,time_s,0.5,Figure 3\n",
                     encoding="ascii")
        rs = load_results(p)
        assert rs.records[0].source == "Figure 3"

    def test_empty_file(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("", encoding="ascii")
        assert len(load_results(p)) == 0

    def test_bad_header(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("dev,wl,n,prec,metric,value\n", encoding="ascii")
        with pytest.raises(ValueError, match="line 1"):
            load_results(p)

    def test_bad_value_line_numbered(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text(GOOD_CSV + "CPU M1,gemm,512,fp32,time_s,abc\n",
                     encoding="ascii")
        with pytest.raises(ValueError, match="line 4"):
            load_results(p)

    def test_bad_metric_line_numbered(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text(GOOD_CSV + "CPU M1,gemm,512,fp32,watts,1.0\n",
                     encoding="ascii")
        with pytest.raises(ValueError, match="line 4.*watts"):
            load_results(p)

    def test_field_count_line_numbered(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text(GOOD_CSV + "CPU M1,gemm,512\n", encoding="ascii")
        with pytest.raises(ValueError, match="line 4"):
            load_results(p)


class TestJsonParsing:
    def test_records_object(self, tmp_path):
        p = tmp_path / "r.json"
        p.write_text(json.dumps({"records": [
            {"device": "CPU M1", "workload": "gemm", "size": 256,
             "precision": "fp32", "metric": "gflops", "value": 100.0},
        ]}), encoding="ascii")
        rs = load_results(p)
        assert rs.value("CPU M1", "gemm", 256, "fp32", "gflops") == 100.0

    def test_bad_record_indexed(self, tmp_path):
        p = tmp_path / "r.json"
        p.write_text(json.dumps({"records": [
            {"device": "CPU M1", "workload": "gemm", "size": 256,
             "precision": "fp32", "metric": "gflops", "value": 100.0},
            {"device": "CPU M1", "workload": "gemm"},
        ]}), encoding="ascii")
        with pytest.raises(ValueError, match="record 1"):
            load_results(p)

    def test_bench_array_expands_to_host_records(self, tmp_path):
        ok = {"workload": "gemm", "size": 256, "precision": "fp32",
              "times_s": [0.5], "mean_s": 0.5, "std_s": 0.0, "min_s": 0.5,
              "flops": 33554432, "gflops_mean": 0.067108864,
              "energy_j": 2.0, "power_w_mean": 4.0, "status": "ok"}
        gated = {"workload": "gemm", "size": 8192, "precision": "fp16",
                 "times_s": [], "mean_s": 0.0, "std_s": 0.0, "min_s": 0.0,
                 "flops": 1, "gflops_mean": 0.0,
                 "status": "capacity_exceeded", "message": "too big"}
        p = tmp_path / "results.json"
        p.write_text(json.dumps([ok, gated]), encoding="ascii")
        rs = load_results(p)
        assert rs.value("host", "gemm", 256, "fp32", "time_s") == 0.5
        assert rs.value("host", "gemm", 256, "fp32", "gflops") == 0.067108864
        assert rs.value("host", "gemm", 256, "fp32", "energy_j") == 2.0
        assert rs.value("host", "gemm", 256, "fp32", "power_mw") == 4000.0
        assert rs.value("host", "gemm", 256, "fp32", "gflops_per_w") == \
            pytest.approx(0.067108864 / 4.0)
        # the gated run contributes nothing
        assert rs.value("host", "gemm", 8192, "fp16", "time_s") is None

    def test_unrecognized_json_shape(self, tmp_path):
        p = tmp_path / "r.json"
        p.write_text(json.dumps({"data": []}), encoding="ascii")
        with pytest.raises(ValueError, match="records"):
            load_results(p)


class TestEmbeddedData:
    def test_size_and_sources(self):
        rs = load_embedded()
        assert len(rs) == 644  # committed dataset; update if the data changes
        assert all(r.source for r in rs)

    def test_known_cell(self):
        rs = load_embedded()
        assert rs.value("GPU M1", "jacobi", 256, "fp16", "gflops") == 26.21


class TestSpeedupTable:
    def test_published_ratios_reproduced(self):
        t = speedup_table(load_embedded(), "CPU M1", "fp16")
        assert t.title == "Speedup from CPU M1 FP16"
        assert t.columns == ["CPU M1", "GPU M1", "ANE M1", "CPU M4 Pro",
                             "GPU M4 Pro", "ANE M4 Pro"]
        cells = {(wl, size): dict(zip(t.columns, row))
                 for wl, size, row in t.rows}
        published = [
            ("jacobi", 4096, "GPU M1", 8.57),
            ("multigrid", 8192, "GPU M4 Pro", 25.75),
            ("gemm", 4096, "ANE M1", 2.70),
            ("yolov11l", 0, "GPU M1", 5.43),
            ("yolov11l", 0, "ANE M1", 19.37),
            ("yolov11l", 0, "CPU M4 Pro", 6.82),
            ("yolov11l", 0, "GPU M4 Pro", 16.36),
            ("yolov11l", 0, "ANE M4 Pro", 28.96),
        ]
        for wl, size, dev, want in published:
            got = cells[(wl, size)][dev]
            assert abs(got - want) / want < 0.02, (wl, size, dev, got)

    def test_baseline_column_is_exactly_one(self):
        t = speedup_table(load_embedded(), "CPU M1", "fp16")
        for _, _, row in t.rows:
            assert row[0] == 1.0

    def test_gemm_4096_ane_m4_pro_regression(self):
        # frozen value computed from the dataset's own gflops records;
        # kept as a regression anchor for the one cell that cannot be
        # cross-checked against a published ratio
        t = speedup_table(load_embedded(), "CPU M1", "fp16")
        cells = {(wl, size): dict(zip(t.columns, row)) for wl, size, row in t.rows}
        got = cells[("gemm", 4096)]["ANE M4 Pro"]
        rs = load_embedded()
        base = rs.value("CPU M1", "gemm", 4096, "fp16", "gflops")
        cand = rs.value("ANE M4 Pro", "gemm", 4096, "fp16", "gflops")
        assert got == pytest.approx(cand / base, rel=1e-12)
        assert got == pytest.approx(3.9911, abs=1e-3)

    def test_explicit_pairs(self):
        t = speedup_table(load_embedded(), "CPU M1", "fp16",
                          pairs=[("gemm", 4096)])
        assert len(t.rows) == 1
        assert t.rows[0][0] == "gemm" and t.rows[0][1] == 4096

    def test_missing_baseline_pair_rejected(self):
        with pytest.raises(ValueError, match="gemm size 999"):
            speedup_table(load_embedded(), "CPU M1", "fp16",
                          pairs=[("gemm", 999)])

    def test_unknown_baseline_device(self):
        with pytest.raises(ValueError, match="TPU"):
            speedup_table(load_embedded(), "TPU", "fp16")

    def test_time_metric_preferred_over_rate(self):
        rs = ResultSet([
            _rec("CPU M1", "gemm", 64, "fp32", "time_s", 2.0),
            _rec("CPU M1", "gemm", 64, "fp32", "gflops", 10.0),
            _rec("GPU M1", "gemm", 64, "fp32", "time_s", 1.0),
            _rec("GPU M1", "gemm", 64, "fp32", "gflops", 100.0),
        ])
        t = speedup_table(rs, "CPU M1", "fp32")
        cells = dict(zip(t.columns, t.rows[0][2]))
        assert cells["GPU M1"] == 2.0  # from times, not the 10x rate gap

    def test_missing_candidate_is_none(self):
        rs = ResultSet([
            _rec("CPU M1", "gemm", 64, "fp32", "time_s", 2.0),
            _rec("GPU M1", "jacobi", 64, "fp32", "time_s", 1.0),
        ])
        t = speedup_table(rs, "CPU M1", "fp32")
        cells = dict(zip(t.columns, t.rows[0][2]))
        assert cells["GPU M1"] is None


class TestEfficiencyTable:
    def test_frozen_row(self):
        t = efficiency_table(load_embedded(), "fp16")
        assert t.columns[:4] == ["CPU M1", "GPU M1", "ANE M1", "CPU M4 Pro"]
        row = next(r for r in t.rows if r[0] == "gemm" and r[1] == 256)
        assert row[2][:4] == [48.6151, 20.9097, 20.7364, 72.3998]
        assert t.cell_format is None  # full precision cells

    def test_filters_precision(self):
        t16 = efficiency_table(load_embedded(), "fp16")
        t32 = efficiency_table(load_embedded(), "fp32")
        assert t16.rows and t32.rows
        pairs16 = {(wl, size) for wl, size, _ in t16.rows}
        assert ("gemm", 256) in pairs16


class TestEmitTable:
    @staticmethod
    def _tiny():
        return Table(title="Speedup from CPU M1 FP16",
                     columns=["CPU M1", "GPU M1"],
                     rows=[("gemm", 256, [1.0, 2.5]),
                           ("yolov11l", 0, [1.0, None])],
                     cell_format="%.2f")

    def test_markdown_golden(self):
        got = emit(self._tiny(), "markdown").decode()
        assert got == (
            "### Speedup from CPU M1 FP16\n"
            "\n"
            "| workload | size | CPU M1 | GPU M1 |\n"
            "| --- | --- | --- | --- |\n"
            "| gemm | 256 | 1.00 | 2.50 |\n"
            "| yolov11l | - | 1.00 | - |\n")

    def test_csv_golden(self):
        got = emit(self._tiny(), "csv").decode()
        assert got == ("workload,size,CPU M1,GPU M1\n"
                       "gemm,256,1.00,2.50\n"
                       "yolov11l,-,1.00,-\n")

    def test_json_structure(self):
        obj = json.loads(emit(self._tiny(), "json"))
        assert obj["title"] == "Speedup from CPU M1 FP16"
        assert obj["columns"] == ["workload", "size", "CPU M1", "GPU M1"]
        assert obj["rows"] == [["gemm", 256, 1.0, 2.5],
                               ["yolov11l", 0, 1.0, None]]

    def test_plot_data_rejected_for_tables(self):
        with pytest.raises(ValueError, match="result set"):
            emit(self._tiny(), "plot-data")

    def test_unknown_format_and_type(self):
        with pytest.raises(ValueError, match="xml"):
            emit(self._tiny(), "xml")
        with pytest.raises(TypeError):
            emit({"not": "emittable"}, "csv")


class TestEmitResultSet:
    def test_csv_round_trip_is_byte_identical(self, tmp_path):
        first = emit(load_embedded(), "csv")
        p = tmp_path / "round.csv"
        p.write_bytes(first)
        again = emit(load_results(p), "csv")
        assert again == first

    def test_csv_matches_committed_dataset(self):
        from importlib import resources
        committed = (resources.files("sgbench") / "data"
                     / "paper_data.csv").read_bytes()
        assert emit(load_embedded(), "csv") == committed

    def test_json_round_trip(self, tmp_path):
        first = emit(load_embedded(), "json")
        p = tmp_path / "round.json"
        p.write_bytes(first)
        assert emit(load_results(p), "json") == first

    def test_source_column_only_when_present(self):
        rs = ResultSet([_rec()])
        assert emit(rs, "csv").decode().splitlines()[0] == \
            "device,workload,size,precision,metric,value"
        rs2 = ResultSet([_rec(source="Figure 1")])
        assert emit(rs2, "csv").decode().splitlines()[0] == \
            "device,workload,size,precision,metric,value,source"

    def test_markdown_lists_records(self):
        got = emit(ResultSet([_rec(value=0.25)]), "markdown").decode()
        assert "| CPU M1 | gemm | 256 | fp32 | time_s | 0.25 |" in got

    def test_plot_data_series_files(self):
        files = emit(load_embedded(), "plot-data")
        assert len(files) == 178
        body = files["jacobi_gflops_gpu-m1_fp16.dat"].decode()
        assert body.splitlines()[:3] == ["256 26.21", "512 77.1", "1024 92.77"]
        # parenthesized device names slug cleanly
        assert "gemm_gflops_cpu-m1-accelerate-1t_fp32.dat" in files

    def test_plot_data_sorted_by_size(self):
        rs = ResultSet([
            _rec(size=1024, metric="gflops", value=3.0),
            _rec(size=256, metric="gflops", value=1.0),
            _rec(size=512, metric="gflops", value=2.0),
        ])
        files = emit(rs, "plot-data")
        (name, body), = files.items()
        assert name == "gemm_gflops_cpu-m1_fp32.dat"
        assert body.decode() == "256 1.0\n512 2.0\n1024 3.0\n"

    def test_emit_deterministic(self):
        assert emit(load_embedded(), "csv") == emit(load_embedded(), "csv")


class TestSeriesGroups:
    def test_grouping(self):
        rs = ResultSet([
            _rec("GPU M1", "gemm", 512, "fp16", "gflops", 2.0),
            _rec("GPU M1", "gemm", 256, "fp16", "gflops", 1.0),
            _rec("GPU M1", "gemm", 256, "fp16", "time_s", 0.5),
        ])
        groups = series_groups(rs)
        assert set(groups) == {("gemm", "gflops"), ("gemm", "time_s")}
        dev, prec, pts = groups[("gemm", "gflops")][0]
        assert (dev, prec) == ("GPU M1", "fp16")
        assert pts == [(256, 1.0), (512, 2.0)]
