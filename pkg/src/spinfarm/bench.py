"""Weak/strong scaling experiments and their reports.

An experiment spec is a JSON object, for example::

    {
      "mode": "weak",
      "worker_counts": [2, 4],
      "images_per_worker_group": 100,
      "group_size": 1,
      "kinds": ["static", "ss", "gss", "fac"],
      "slowdown_profile": {"1": 4.0},
      "repetitions": 5,
      "cloud": {"synth": "torus", "m": 4000, "seed": 1},
      "params": {"W": 5, "B": 0.1, "S": 6.283185307179586},
      "image_cost_s": 0.002,
      "cost_variance": 0.0,
      "seed": 0,
      "verify_cap": 10000
    }

Strong mode replaces ``images_per_worker_group`` with ``total_N``. The
cloud may instead be ``{"path": "bunny.off", "format": "off"}``.
"""

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import SpinfarmError, ValidationError
from .geometry import load_point_cloud, synth_cloud
from .runtime import CostModel, WorkerConfig, run_local
from .scheduling import SchedulerKind
from .spinimage import SpinImageParams, generate_all_sequential

log = logging.getLogger(__name__)

CSV_COLUMNS = ("kind", "P", "rep", "N", "t_par_s", "cost", "max_over_mean", "cov")
STAT_KEYS = ("min", "max", "mean", "median", "q1", "q3")


def parallel_cost(P, t_par):
    return P * t_par


def load_imbalance(finishing_times):
    """Max-over-mean ratio and coefficient of variation of finishing times."""
    times = np.asarray(finishing_times, dtype=np.float64)
    if times.size == 0:
        raise ValidationError("finishing_times must be non-empty")
    if (times <= 0).any():
        raise ValidationError("finishing times must be positive")
    mean = times.mean()
    return {"max_over_mean": float(times.max() / mean), "cov": float(times.std() / mean)}


def describe(values):
    """min/max/mean/median and inclusive linear-interpolation quartiles."""
    v = np.asarray(values, dtype=np.float64)
    q1, median, q3 = np.percentile(v, [25, 50, 75], method="linear")
    return {"min": float(v.min()), "max": float(v.max()), "mean": float(v.mean()),
            "median": float(median), "q1": float(q1), "q3": float(q3)}


@dataclass
class ExperimentSpec:
    mode: str
    worker_counts: list
    kinds: list
    cloud: dict
    images_per_worker_group: int = None
    total_N: int = None
    group_size: int = 1
    slowdown_profile: dict = field(default_factory=dict)
    repetitions: int = 5
    params: SpinImageParams = field(default_factory=SpinImageParams)
    image_cost_s: float = None
    cost_variance: float = 0.0
    seed: int = 0
    verify_cap: int = 10_000
    dispatch_threads: int = 2

    def __post_init__(self):
        if self.mode not in ("weak", "strong"):
            raise ValidationError(f"mode must be 'weak' or 'strong', got {self.mode!r}")
        if not self.worker_counts:
            raise ValidationError("worker_counts must be non-empty")
        if any(p < 1 for p in self.worker_counts) or any(
                b <= a for a, b in zip(self.worker_counts, self.worker_counts[1:])):
            raise ValidationError("worker_counts must be positive and strictly increasing")
        if self.repetitions < 1:
            raise ValidationError("repetitions must be at least 1")
        if not self.kinds:
            raise ValidationError("kinds must be non-empty")
        self.kinds = [SchedulerKind.parse(k) for k in self.kinds]
        if self.mode == "weak":
            if not self.images_per_worker_group or self.images_per_worker_group < 1:
                raise ValidationError("weak mode needs a positive images_per_worker_group")
            if self.group_size < 1 or any(p % self.group_size for p in self.worker_counts):
                raise ValidationError("every worker count must be a multiple of group_size")
        elif self.total_N is None or self.total_N < 1:
            raise ValidationError("strong mode needs a positive total_N")
        self.slowdown_profile = {int(k): float(v) for k, v in self.slowdown_profile.items()}
        if isinstance(self.params, dict):
            self.params = SpinImageParams(**self.params)

    def n_for(self, P):
        if self.mode == "weak":
            return self.images_per_worker_group * (P // self.group_size)
        return self.total_N

    def workers_for(self, P):
        return [WorkerConfig(k, self.slowdown_profile.get(k, 1.0)) for k in range(1, P + 1)]

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown experiment keys: {sorted(unknown)}")
        missing = {"mode", "worker_counts", "kinds", "cloud"} - set(data)
        if missing:
            raise ValidationError(f"missing experiment keys: {sorted(missing)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data)


@dataclass
class MetricRow:
    kind: str
    P: int
    rep: int
    N: int
    t_par_s: float
    cost: float
    max_over_mean: float
    cov: float

    def as_dict(self):
        return asdict(self)


def build_cloud(cloud_spec):
    if "synth" in cloud_spec:
        return synth_cloud(cloud_spec["synth"], int(cloud_spec["m"]), int(cloud_spec.get("seed", 0)))
    if "path" in cloud_spec:
        return load_point_cloud(cloud_spec["path"], cloud_spec.get("format", "xyzn"))
    raise ValidationError("cloud spec needs either 'synth' or 'path'")


def run_experiment(spec, cloud=None, on_run=None):
    """Run every (kind, P, repetition) combination sequentially.

    Returns:
        ``(rows, stats)`` where ``stats`` holds one entry per (kind, P) with
        descriptive statistics of the parallel time.
    """
    cloud = cloud if cloud is not None else build_cloud(spec.cloud)
    max_n = max(spec.n_for(P) for P in spec.worker_counts)
    if max_n > cloud.M:
        raise ValidationError(f"experiment needs N={max_n} images but the cloud has M={cloud.M}")

    costs = None
    if spec.image_cost_s is not None:
        costs = CostModel(spec.image_cost_s, spec.cost_variance, spec.seed).costs(cloud.M)

    oracle = {}
    rows = []
    for kind in spec.kinds:
        for P in spec.worker_counts:
            N = spec.n_for(P)
            for rep in range(spec.repetitions):
                images, report = run_local(cloud, N, spec.params, kind, spec.workers_for(P),
                                           costs=costs, dispatch_threads=spec.dispatch_threads)
                if N <= spec.verify_cap:
                    if N not in oracle:
                        oracle[N] = generate_all_sequential(cloud, N, spec.params)
                    if images != oracle[N]:
                        raise SpinfarmError(f"{kind.name} P={P} rep={rep}: output differs from the sequential oracle")
                imbalance = load_imbalance(report.finishing_times)
                row = MetricRow(kind=kind.name, P=P, rep=rep, N=N, t_par_s=report.t_par_s,
                                cost=parallel_cost(P, report.t_par_s), **imbalance)
                log.info("%s P=%d rep=%d N=%d t_par=%.4fs cov=%.3f",
                         row.kind, P, rep, N, row.t_par_s, row.cov)
                rows.append(row)
                if on_run is not None:
                    on_run(row, report)
    return rows, summarize(rows)


def summarize(rows):
    groups = {}
    for row in rows:
        groups.setdefault((row.kind, row.P), []).append(row.t_par_s)
    return [{"kind": kind, "P": P, "stats": describe(times)}
            for (kind, P), times in groups.items()]


def emit_report(rows, stats, format, path):
    if not rows:
        raise ValidationError("no rows to report")
    path = Path(path)
    if format == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                d = row.as_dict()
                writer.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    elif format == "json":
        doc = {"columns": list(CSV_COLUMNS),
               "rows": [row.as_dict() for row in rows],
               "stats": stats}
        path.write_text(json.dumps(doc, indent=2) + "\n")
    else:
        raise ValidationError(f"unknown report format {format!r}")


def _fmt(value):
    return repr(value) if isinstance(value, float) else str(value)


def read_json_report(path):
    doc = json.loads(Path(path).read_text())
    return [MetricRow(**r) for r in doc["rows"]], doc["stats"]


def read_csv_report(path):
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for r in reader:
            rows.append(MetricRow(kind=r["kind"], P=int(r["P"]), rep=int(r["rep"]), N=int(r["N"]),
                                  t_par_s=float(r["t_par_s"]), cost=float(r["cost"]),
                                  max_over_mean=float(r["max_over_mean"]), cov=float(r["cov"])))
    return rows
