"""Socket transport: a listening master serving remote workers."""

import logging
import socket
import threading
import time

from ..errors import ProtocolError, StartupError, UsageError
from .master import Master
from .messages import CloudTransfer, encode, read_message, write_message

log = logging.getLogger(__name__)


def parse_address(text, default_host="127.0.0.1"):
    """``"host:port"`` or ``"port"`` -> ``(host, port)``."""
    host, _, port = str(text).rpartition(":")
    try:
        return (host or default_host, int(port))
    except ValueError:
        raise UsageError(f"invalid address {text!r}; expected host:port") from None


def listen(address, backlog=64):
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind(address)
    sock.listen(backlog)
    return sock


def _accept_workers(listener, expected, timeout):
    conns = []
    deadline = time.monotonic() + timeout
    while len(conns) < expected:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            for c in conns:
                c.close()
            raise StartupError(f"only {len(conns)} of {expected} workers connected within {timeout} s")
        listener.settimeout(remaining)
        try:
            conn, peer = listener.accept()
        except socket.timeout:
            continue
        conn.settimeout(None)
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        log.debug("worker %d connected from %s", len(conns) + 1, peer)
        conns.append(conn)
    return conns


def run_master(listener, cloud, N, params, kind, expected_workers, *,
               accept_timeout=30.0, timeout=None):
    """Serve one distributed run on an already-listening socket.

    Workers get ids 1..k in connection order. The cloud is sent to every
    worker before the scheduling clock starts.

    Returns:
        ``(images, RunReport)``.
    """
    if expected_workers < 1:
        raise UsageError("at least one worker is required")
    if not 0 <= N <= cloud.M:
        raise UsageError(f"N must satisfy 0 <= N <= M={cloud.M}, got {N}")
    conns = _accept_workers(listener, expected_workers, accept_timeout)
    ids = list(range(1, len(conns) + 1))
    master = Master(N, kind, ids, params.W)

    try:
        frame = encode(CloudTransfer(cloud))
        for conn in conns:
            conn.sendall(frame)
    except OSError as exc:
        for c in conns:
            c.close()
        raise StartupError(f"cloud replication failed: {exc}") from exc

    finished = threading.Event()
    failure = []
    lock = threading.Lock()

    def fail(exc):
        with lock:
            if not failure:
                failure.append(exc)
        finished.set()

    def session(worker, conn):
        try:
            while True:
                try:
                    msg = read_message(conn)
                except ProtocolError as exc:
                    raise ProtocolError(f"worker {worker}: {exc}") from exc
                except OSError as exc:
                    if finished.is_set():
                        return
                    fail(master.abort(worker, str(exc)))
                    return
                if msg is None:
                    if worker not in master.finished and not finished.is_set():
                        fail(master.abort(worker, "connection closed"))
                    return
                reply = master.handle(worker, msg)
                if reply is not None:
                    write_message(conn, reply)
                if master.done:
                    finished.set()
        except ProtocolError as exc:
            fail(exc)
        except OSError as exc:
            if not finished.is_set():
                fail(master.abort(worker, str(exc)))

    master.start()
    threads = [threading.Thread(target=session, args=(w, c), daemon=True, name=f"session-{w}")
               for w, c in zip(ids, conns)]
    for t in threads:
        t.start()
    finished.wait(timeout)

    if not failure:
        # workers close right after their results; give sessions a moment to
        # observe EOF so late duplicate frames are still caught
        for t in threads:
            t.join(1.0)
    for conn in conns:
        try:
            conn.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        conn.close()
    for t in threads:
        t.join(1.0)
    if failure:
        raise failure[0]
    if not master.done:
        raise StartupError(f"run did not finish within {timeout} s")
    return master.collected_images(), master.report()


def run_distributed(cloud, N, params, kind, address, expected_workers, *,
                    accept_timeout=30.0, timeout=None, on_listening=None):
    """Bind ``address``, wait for workers and run.

    ``on_listening`` is called with the bound ``(host, port)`` once the
    socket accepts connections, which helps when binding port 0.
    """
    listener = listen(address)
    try:
        if on_listening is not None:
            on_listening(listener.getsockname())
        return run_master(listener, cloud, N, params, kind, expected_workers,
                          accept_timeout=accept_timeout, timeout=timeout)
    finally:
        listener.close()
