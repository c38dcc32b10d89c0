from .local import run_local
from .master import (LogEntry, Master, RunReport, WorkerConfig, WorkerReport,
                     protocol_violations, workers_from_slowdowns)
from .messages import (Assign, CloudTransfer, Results, Terminate, WorkRequest, decode,
                       encode)
from .pacing import CostModel, Pacer
from .tcp import listen, parse_address, run_distributed, run_master
from .worker import run_worker, serve_worker

__all__ = [
    "Assign", "CloudTransfer", "CostModel", "LogEntry", "Master", "Pacer", "Results",
    "RunReport", "Terminate", "WorkRequest", "WorkerConfig", "WorkerReport", "decode",
    "encode", "listen", "parse_address", "protocol_violations", "run_distributed",
    "run_local", "run_master", "run_worker", "serve_worker", "workers_from_slowdowns",
]
