"""In-process transport: worker threads talking to the master over queues."""

import queue
import threading

from ..errors import ProtocolError, SpinfarmError, UsageError
from .master import Master, validate_workers
from .worker import serve_worker

_STOP = object()


class _Lost:
    def __init__(self, reason):
        self.reason = reason


class LocalChannel:
    """Queue-backed channel for one worker.

    The first send waits for ``after`` and then sets ``ready``; chaining
    these events makes first requests arrive in worker listing order.
    """

    def __init__(self, worker_id, inbox, after=None, ready=None):
        self.worker_id = worker_id
        self.inbox = inbox
        self.outbox = queue.Queue()
        self._after = after
        self._ready = ready

    def send(self, msg):
        if self._after is not None:
            self._after.wait()
            self._after = None
        self.inbox.put((self.worker_id, msg))
        if self._ready is not None:
            self._ready.set()
            self._ready = None

    def recv(self):
        msg = self.outbox.get()
        if msg is _STOP:
            raise ConnectionError("run aborted by master")
        return msg


def run_local(cloud, N, params, kind, worker_configs, *, costs=None, cost_model=None,
              dispatch_threads=2, ordered_start=True, timeout=None):
    """Generate ``N`` spin images with one thread per worker plus a master.

    Args:
        cloud: the replicated point cloud.
        N: number of images (origins are points ``0..N-1``).
        params: spin-image parameters.
        kind: scheduler kind.
        worker_configs: ``WorkerConfig`` list; listing order is request order
            when ``ordered_start`` is set.
        costs / cost_model: optional modelled per-image cost (see ``pacing``).
        dispatch_threads: master threads serving requests.
        timeout: seconds before the run is abandoned.

    Returns:
        ``(images, RunReport)`` with images in origin-index order.
    """
    configs = validate_workers(worker_configs)
    if not 0 <= N <= cloud.M:
        raise UsageError(f"N must satisfy 0 <= N <= M={cloud.M}, got {N}")
    if dispatch_threads < 1:
        raise UsageError("dispatch_threads must be at least 1")
    if costs is None and cost_model is not None:
        costs = cost_model.costs(cloud.M)

    master = Master(N, kind, [c.id for c in configs], params.W)
    inbox = queue.Queue()
    gates = [threading.Event() for _ in configs] if ordered_start else [None] * len(configs)
    channels = {}
    for pos, cfg in enumerate(configs):
        after = gates[pos - 1] if ordered_start and pos > 0 else None
        channels[cfg.id] = LocalChannel(cfg.id, inbox, after=after, ready=gates[pos])

    stats = {}
    finished = threading.Event()
    failure = []
    dispatch_lock = threading.Lock()

    def fail(exc):
        if not failure:
            failure.append(exc)
        finished.set()

    def worker_main(cfg):
        try:
            stats[cfg.id] = serve_worker(channels[cfg.id], cloud, params, cfg, costs)
        except BaseException as exc:  # noqa: BLE001 - reported through the master
            inbox.put((cfg.id, _Lost(f"{type(exc).__name__}: {exc}")))

    def dispatcher():
        while True:
            # take and handle under one lock so replies follow arrival order
            with dispatch_lock:
                item = inbox.get()
                if item is _STOP:
                    return
                worker, msg = item
                if isinstance(msg, _Lost):
                    if worker not in master.finished:
                        fail(master.abort(worker, msg.reason))
                    continue
                try:
                    reply = master.handle(worker, msg)
                except ProtocolError as exc:
                    fail(exc)
                    continue
            if reply is not None:
                channels[worker].outbox.put(reply)
            if master.done:
                finished.set()

    master.start()
    threads = [threading.Thread(target=worker_main, args=(cfg,), daemon=True,
                                name=f"worker-{cfg.id}") for cfg in configs]
    dispatchers = [threading.Thread(target=dispatcher, daemon=True, name=f"master-{i}")
                   for i in range(dispatch_threads)]
    for t in dispatchers + threads:
        t.start()

    completed = finished.wait(timeout)
    for _ in dispatchers:
        inbox.put(_STOP)
    if failure or not completed:
        for ch in channels.values():
            ch.outbox.put(_STOP)
        if failure:
            raise failure[0]
        raise SpinfarmError(f"run did not finish within {timeout} s")
    for t in threads:
        t.join()
    for t in dispatchers:
        t.join()

    images = master.collected_images()
    report = master.report({w: s.compute_s for w, s in stats.items()})
    return images, report
