"""Worker side of the protocol, independent of transport."""

import logging
import socket
import time
from dataclasses import dataclass, field

from ..errors import ProtocolError, StartupError
from ..spinimage import generate_spin_image
from .messages import Assign, CloudTransfer, Results, Terminate, WorkRequest, read_message, write_message
from .pacing import Pacer

log = logging.getLogger(__name__)


@dataclass
class WorkerStats:
    id: int
    chunks: list = field(default_factory=list)
    compute_s: float = 0.0


def serve_worker(channel, cloud, params, config, costs=None):
    """Request, compute and report until the master says stop.

    ``channel`` needs ``send(msg)`` and ``recv() -> msg``. Images stay on
    the worker until ``Terminate`` arrives, then go back in one ``Results``.
    """
    stats = WorkerStats(config.id)
    pacer = Pacer(config.slowdown, costs)
    images = []
    channel.send(WorkRequest())
    while True:
        msg = channel.recv()
        if isinstance(msg, Assign):
            if not 0 <= msg.start < msg.end <= cloud.M:
                raise ProtocolError(f"assigned range [{msg.start},{msg.end}) outside cloud of {cloud.M}")
            t0 = time.perf_counter()
            pacer.begin()
            for i in range(msg.start, msg.end):
                images.append(generate_spin_image(cloud, i, params))
                pacer.image_done(i)
            pacer.end()
            stats.compute_s += time.perf_counter() - t0
            stats.chunks.append((msg.start, msg.end))
            channel.send(WorkRequest())
        elif isinstance(msg, Terminate):
            channel.send(Results(images))
            return stats
        else:
            raise ProtocolError(f"worker {config.id} received unexpected {type(msg).__name__}")


class SocketChannel:
    def __init__(self, sock):
        self.sock = sock

    def send(self, msg):
        write_message(self.sock, msg)

    def recv(self):
        msg = read_message(self.sock)
        if msg is None:
            raise ConnectionError("master closed the connection")
        return msg


def connect(address, timeout=30.0):
    """Connect to ``(host, port)``, retrying until ``timeout`` elapses."""
    deadline = time.monotonic() + timeout
    while True:
        try:
            return socket.create_connection(address, timeout=max(0.1, deadline - time.monotonic()))
        except OSError as exc:
            if time.monotonic() >= deadline:
                raise StartupError(f"could not reach master at {address[0]}:{address[1]}: {exc}") from exc
            time.sleep(0.05)


def run_worker(address, params, config, costs=None, cost_model=None, connect_timeout=30.0):
    """Join a distributed run as one worker.

    The cloud arrives from the master before the first request. Spin-image
    parameters are the worker's own and must match the master's.
    """
    sock = connect(address, connect_timeout)
    sock.settimeout(None)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    try:
        channel = SocketChannel(sock)
        first = channel.recv()
        if not isinstance(first, CloudTransfer):
            raise ProtocolError(f"expected CloudTransfer first, got {type(first).__name__}")
        cloud = first.cloud
        if costs is None and cost_model is not None:
            costs = cost_model.costs(cloud.M)
        log.debug("worker %s received cloud of %d points", config.id, cloud.M)
        return serve_worker(channel, cloud, params, config, costs)
    finally:
        sock.close()
