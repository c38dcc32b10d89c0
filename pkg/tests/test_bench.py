import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinfarm import bench
from spinfarm.bench import (CSV_COLUMNS, STAT_KEYS, ExperimentSpec, MetricRow, describe,
                            emit_report, load_imbalance, parallel_cost, read_csv_report,
                            read_json_report, run_experiment)
from spinfarm.errors import ValidationError
from spinfarm.geometry import save_xyzn, synth_cloud


def weak_spec(**kw):
    base = dict(mode="weak", worker_counts=[2, 4], kinds=["ss"],
                cloud={"synth": "uniform_box", "m": 600, "seed": 4},
                images_per_worker_group=20, repetitions=2,
                params={"W": 4, "B": 0.5})
    base.update(kw)
    return ExperimentSpec.from_dict(base)


class TestMetrics:
    @pytest.mark.parametrize("P,t,expected", [(1, 10.0, 10.0), (160, 25.0, 4000.0), (4, 0.0, 0.0)])
    def test_parallel_cost(self, P, t, expected):
        assert parallel_cost(P, t) == expected

    @pytest.mark.parametrize("times,mom,cov", [
        ([5, 5, 5, 5], 1.0, 0.0),
        ([1, 1, 1, 5], 2.5, math.sqrt(3) / 2),
        ([7], 1.0, 0.0),
    ])
    def test_load_imbalance(self, times, mom, cov):
        got = load_imbalance(times)
        assert got["max_over_mean"] == pytest.approx(mom, abs=1e-12)
        assert got["cov"] == pytest.approx(cov, abs=1e-12)

    @pytest.mark.parametrize("times", [[], [1.0, 0.0], [2.0, -1.0]])
    def test_load_imbalance_rejects(self, times):
        with pytest.raises(ValidationError):
            load_imbalance(times)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0.01, 100), min_size=1, max_size=30))
    def test_load_imbalance_bounds(self, times):
        got = load_imbalance(times)
        assert got["max_over_mean"] >= 1 - 1e-12
        assert got["cov"] >= 0
        # population std by hand
        mean = sum(times) / len(times)
        std = math.sqrt(sum((t - mean) ** 2 for t in times) / len(times))
        assert got["cov"] == pytest.approx(std / mean, rel=1e-9, abs=1e-12)

    def test_describe(self):
        d = describe([1, 2, 3, 4, 5])
        assert d == {"min": 1.0, "max": 5.0, "mean": 3.0, "median": 3.0, "q1": 2.0, "q3": 4.0}
        assert describe([1, 2, 3, 4])["q1"] == pytest.approx(1.75)
        assert set(describe([7.0])) == set(STAT_KEYS)


class TestSpec:
    def test_weak_n(self):
        spec = weak_spec(worker_counts=[2, 4, 8], group_size=2, images_per_worker_group=100)
        assert [spec.n_for(P) for P in (2, 4, 8)] == [100, 200, 400]

    def test_strong_n(self):
        spec = weak_spec(mode="strong", total_N=50, images_per_worker_group=None)
        assert spec.n_for(2) == spec.n_for(4) == 50

    def test_slowdown_profile(self):
        spec = weak_spec(slowdown_profile={"1": 4.0})
        assert [w.slowdown for w in spec.workers_for(3)] == [4.0, 1.0, 1.0]

    @pytest.mark.parametrize("change", [
        {"mode": "medium"}, {"worker_counts": []}, {"worker_counts": [4, 2]},
        {"repetitions": 0}, {"kinds": []}, {"kinds": ["lifo"]},
        {"group_size": 3}, {"images_per_worker_group": 0}, {"bogus": 1},
    ])
    def test_invalid(self, change):
        with pytest.raises(ValidationError):
            weak_spec(**change)

    def test_from_file(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"mode": "strong", "worker_counts": [1], "kinds": ["gss"],
                                    "cloud": {"synth": "sphere", "m": 10}, "total_N": 5}))
        spec = ExperimentSpec.from_file(path)
        assert spec.total_N == 5 and spec.params.W == 5
        path.write_text("{not json")
        with pytest.raises(ValidationError, match="invalid JSON"):
            ExperimentSpec.from_file(path)

    def test_cloud_too_small(self):
        with pytest.raises(ValidationError, match="M=600"):
            run_experiment(weak_spec(images_per_worker_group=400))


class TestRun:
    def test_rows_and_stats(self):
        spec = weak_spec(kinds=["ss", "gss"])
        seen = []
        rows, stats = run_experiment(spec, on_run=lambda row, report: seen.append(report))
        assert len(rows) == 2 * 2 * 2 == len(seen)
        for row in rows:
            assert row.N == 20 * row.P
            assert row.cost == row.P * row.t_par_s
        assert len(stats) == 4
        assert all(set(s["stats"]) == set(STAT_KEYS) for s in stats)

    def test_static_imbalance_exceeds_ss(self):
        spec = weak_spec(kinds=["static", "ss"], worker_counts=[4], images_per_worker_group=40,
                         slowdown_profile={"1": 4.0}, image_cost_s=0.002, repetitions=3)
        rows, _ = run_experiment(spec)
        by = {(r.kind, r.rep): r for r in rows}
        for rep in range(3):
            assert by[("STATIC", rep)].cov > by[("SS", rep)].cov


class TestReports:
    def row(self, **kw):
        base = dict(kind="SS", P=2, rep=0, N=10, t_par_s=0.5, cost=1.0, max_over_mean=1.1, cov=0.05)
        base.update(kw)
        return MetricRow(**base)

    def test_csv_single_row(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_report([self.row()], [], "csv", path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert read_csv_report(path) == [self.row()]

    def test_json_round_trip(self, tmp_path):
        rows = [self.row(), self.row(rep=1, t_par_s=0.25, cost=0.5)]
        stats = bench.summarize(rows)
        path = tmp_path / "r.json"
        emit_report(rows, stats, "json", path)
        back_rows, back_stats = read_json_report(path)
        assert back_rows == rows
        assert back_stats == stats
        assert set(back_stats[0]["stats"]) == set(STAT_KEYS)
        assert back_stats[0]["stats"]["median"] == pytest.approx(np.median([0.5, 0.25]))

    def test_rejects(self, tmp_path):
        with pytest.raises(ValidationError):
            emit_report([], [], "csv", tmp_path / "x")
        with pytest.raises(ValidationError):
            emit_report([self.row()], [], "xml", tmp_path / "x")


def test_build_cloud_from_path(tmp_path):
    cloud = synth_cloud("sphere", 30, 2)
    save_xyzn(cloud, tmp_path / "c.xyzn")
    assert bench.build_cloud({"path": str(tmp_path / "c.xyzn")}) == cloud
    with pytest.raises(ValidationError):
        bench.build_cloud({})
