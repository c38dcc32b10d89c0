"""Transport-independent master logic, run reports and protocol checks."""

import re
import threading
import time
from dataclasses import dataclass, field

from ..errors import ProtocolError, RunAborted, ValidationError
from ..scheduling import SchedulerKind, SchedulerState
from .messages import TAG_NAMES, Assign, Results, Terminate, WorkRequest


@dataclass(frozen=True)
class WorkerConfig:
    id: int
    slowdown: float = 1.0

    def __post_init__(self):
        if not self.slowdown >= 1.0:
            raise ValidationError(f"worker {self.id}: slowdown must be >= 1.0, got {self.slowdown}")


def validate_workers(configs):
    configs = list(configs)
    if not configs:
        raise ValidationError("at least one worker is required")
    ids = [c.id for c in configs]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"worker ids must be unique, got {ids}")
    return configs


def workers_from_slowdowns(slowdowns):
    """Worker configs with ids 1..k in listing order."""
    return [WorkerConfig(k, float(s)) for k, s in enumerate(slowdowns, start=1)]


@dataclass(frozen=True)
class LogEntry:
    seq: int
    t: float
    worker: int
    direction: str  # "recv" at the master, or "send" from it
    message: str
    start: int = None
    end: int = None
    count: int = None


@dataclass
class WorkerReport:
    id: int
    finishing_time_s: float = None
    chunks: list = field(default_factory=list)
    images_computed: int = 0
    compute_s: float = None


@dataclass
class RunReport:
    kind: str
    N: int
    WO: int
    t_par_s: float
    workers: list
    log: list = field(default_factory=list, repr=False)

    @property
    def finishing_times(self):
        return [w.finishing_time_s for w in self.workers]

    @property
    def assign_count(self):
        return sum(1 for e in self.log if e.message == "Assign")

    @property
    def terminate_count(self):
        return sum(1 for e in self.log if e.message == "Terminate")


class Master:
    """Answers worker messages following the request/assign/terminate cycle.

    ``handle`` is thread-safe and linearizes chunk issuance; every reply is
    logged before ``handle`` returns it.
    """

    def __init__(self, N, kind, worker_ids, W, clock=time.perf_counter):
        self.worker_ids = list(worker_ids)
        self.scheduler = SchedulerState(kind, N, len(self.worker_ids))
        self.W = W
        self._static = self.scheduler.kind is SchedulerKind.STATIC
        self.clock = clock
        self.log = []
        self.assignments = {w: [] for w in self.worker_ids}
        self.assign_order = []
        self.terminated = set()
        self.finished = {}
        self.images = {}
        self.t0 = None
        self.t_end = None
        self._lock = threading.Lock()

    @property
    def N(self):
        return self.scheduler.N

    def start(self):
        self.t0 = self.clock()

    @property
    def done(self):
        return len(self.finished) == len(self.worker_ids)

    def _log(self, worker, direction, msg):
        entry = LogEntry(len(self.log), self.clock() - self.t0, worker, direction,
                         TAG_NAMES[msg.tag])
        if isinstance(msg, Assign):
            entry = LogEntry(entry.seq, entry.t, worker, direction, entry.message,
                             msg.start, msg.end)
        elif isinstance(msg, Results):
            entry = LogEntry(entry.seq, entry.t, worker, direction, entry.message,
                             count=len(msg.images))
        self.log.append(entry)

    def handle(self, worker, msg):
        with self._lock:
            if worker not in self.assignments:
                raise ProtocolError(f"message from unknown worker {worker}")
            self._log(worker, "recv", msg)
            if worker in self.finished:
                raise ProtocolError(f"worker {worker} sent {TAG_NAMES[msg.tag]} after its results")
            if isinstance(msg, WorkRequest):
                if worker in self.terminated:
                    raise ProtocolError(f"worker {worker} requested work after termination")
                if self._static and self.assignments[worker]:
                    # a static partition gives each worker exactly one block
                    chunk = None
                else:
                    chunk = self.scheduler.next_chunk()
                if chunk is None:
                    reply = Terminate()
                    self.terminated.add(worker)
                else:
                    reply = Assign(*chunk)
                    self.assignments[worker].append(chunk)
                    self.assign_order.append((worker, chunk))
                self._log(worker, "send", reply)
                return reply
            if isinstance(msg, Results):
                if worker not in self.terminated:
                    raise ProtocolError(f"worker {worker} sent results before termination")
                self._accept_results(worker, msg.images)
                self.finished[worker] = self.clock() - self.t0
                if self.done:
                    self.t_end = self.clock()
                return None
            raise ProtocolError(f"worker {worker} sent unexpected {TAG_NAMES[msg.tag]}")

    def _accept_results(self, worker, images):
        expected = [i for s, e in self.assignments[worker] for i in range(s, e)]
        got = sorted(img.origin_index for img in images)
        if got != sorted(expected):
            raise ProtocolError(
                f"worker {worker} returned images {_summarize(got)}, "
                f"expected {_summarize(sorted(expected))}")
        for img in images:
            if img.width != self.W:
                raise ProtocolError(
                    f"worker {worker} returned image {img.origin_index} of width {img.width}, "
                    f"expected {self.W}")
            self.images[img.origin_index] = img

    def abort(self, worker, reason=""):
        """Build the diagnostic for a worker lost before its results arrived."""
        with self._lock:
            return RunAborted(worker, list(self.assignments.get(worker, [])), reason)

    def collected_images(self):
        missing = [i for i in range(self.N) if i not in self.images]
        if missing:
            raise ProtocolError(f"images missing after run: {_summarize(missing)}")
        return [self.images[i] for i in range(self.N)]

    def report(self, compute_times=None):
        compute_times = compute_times or {}
        workers = []
        for w in self.worker_ids:
            chunks = list(self.assignments[w])
            workers.append(WorkerReport(
                id=w,
                finishing_time_s=self.finished.get(w),
                chunks=chunks,
                images_computed=sum(e - s for s, e in chunks),
                compute_s=compute_times.get(w),
            ))
        t_end = self.t_end if self.t_end is not None else self.clock()
        return RunReport(
            kind=self.scheduler.kind.value.upper(),
            N=self.N,
            WO=len(self.worker_ids),
            t_par_s=t_end - self.t0,
            workers=workers,
            log=list(self.log),
        )


def _summarize(indices, limit=8):
    if len(indices) <= limit:
        return str(list(indices))
    return f"[{', '.join(map(str, indices[:limit]))}, ...] ({len(indices)} total)"


_SYMBOLS = {("recv", "WorkRequest"): "R", ("send", "Assign"): "A",
            ("send", "Terminate"): "T", ("recv", "Results"): "S"}
_CONFORMING = re.compile(r"(RA)*RTS")


def protocol_violations(log, N):
    """List every way a master log departs from the expected exchange.

    Each worker must follow ``(WorkRequest Assign)* WorkRequest Terminate
    Results``, every Assign must answer a preceding WorkRequest, and the
    assigned ranges must partition ``[0, N)``. An empty list means the log
    conforms.
    """
    problems = []
    per_worker = {}
    for entry in sorted(log, key=lambda e: e.seq):
        symbol = _SYMBOLS.get((entry.direction, entry.message))
        if symbol is None:
            problems.append(f"seq {entry.seq}: unexpected {entry.direction} {entry.message}")
            continue
        per_worker.setdefault(entry.worker, []).append(symbol)

    for worker, symbols in sorted(per_worker.items()):
        seq = "".join(symbols)
        if not _CONFORMING.fullmatch(seq):
            problems.append(f"worker {worker}: sequence {seq} does not match (RA)*RTS")
        if "S" in seq and "T" not in seq[:seq.index("S")]:
            problems.append(f"worker {worker}: results before terminate")

    ranges = sorted((e.start, e.end) for e in log if e.message == "Assign")
    cursor = 0
    for start, end in ranges:
        if start != cursor or end <= start:
            problems.append(f"assigned range [{start},{end}) breaks the partition at {cursor}")
        cursor = max(cursor, end)
    if cursor != N:
        problems.append(f"assigned ranges cover [0,{cursor}), expected [0,{N})")
    return problems
