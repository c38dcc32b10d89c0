"""Master-worker messages and their binary framing.

Every frame is a 4-byte big-endian length (counting the tag byte and the
payload), one tag byte, then the payload. All integers are big-endian
unsigned; doubles are big-endian IEEE-754.

    0x01 WorkRequest    empty
    0x02 Assign         u64 start, u64 end
    0x03 Terminate      empty
    0x04 Results        u64 count, then per image: u64 origin, u32 W, W*W u32 bins
    0x05 CloudTransfer  u64 M, then per point 6 f64 (x y z nx ny nz)
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ProtocolError
from ..geometry import PointCloud
from ..spinimage import SpinImage

TAG_WORK_REQUEST = 0x01
TAG_ASSIGN = 0x02
TAG_TERMINATE = 0x03
TAG_RESULTS = 0x04
TAG_CLOUD = 0x05

MAX_FRAME = 0xFFFFFFFF

_LEN = struct.Struct(">I")
_U64 = struct.Struct(">Q")
_ASSIGN = struct.Struct(">QQ")
_IMAGE_HEADER = struct.Struct(">QI")


@dataclass(frozen=True)
class WorkRequest:
    tag = TAG_WORK_REQUEST


@dataclass(frozen=True)
class Assign:
    start: int
    end: int
    tag = TAG_ASSIGN


@dataclass(frozen=True)
class Terminate:
    tag = TAG_TERMINATE


@dataclass(frozen=True, eq=False)
class Results:
    images: list = field(default_factory=list)
    tag = TAG_RESULTS

    def __eq__(self, other):
        if not isinstance(other, Results):
            return NotImplemented
        return len(self.images) == len(other.images) and all(
            a == b for a, b in zip(self.images, other.images))


@dataclass(frozen=True, eq=False)
class CloudTransfer:
    cloud: PointCloud
    tag = TAG_CLOUD

    def __eq__(self, other):
        if not isinstance(other, CloudTransfer):
            return NotImplemented
        return self.cloud == other.cloud


TAG_NAMES = {
    TAG_WORK_REQUEST: "WorkRequest",
    TAG_ASSIGN: "Assign",
    TAG_TERMINATE: "Terminate",
    TAG_RESULTS: "Results",
    TAG_CLOUD: "CloudTransfer",
}


def encode_payload(msg):
    if isinstance(msg, (WorkRequest, Terminate)):
        return b""
    if isinstance(msg, Assign):
        return _ASSIGN.pack(msg.start, msg.end)
    if isinstance(msg, Results):
        parts = [_U64.pack(len(msg.images))]
        for img in msg.images:
            parts.append(_IMAGE_HEADER.pack(img.origin_index, img.width))
            if img.bins.size and img.bins.max() > 0xFFFFFFFF:
                raise ProtocolError(f"bin count in image {img.origin_index} exceeds 32 bits")
            parts.append(img.bins.astype(">u4").tobytes())
        return b"".join(parts)
    if isinstance(msg, CloudTransfer):
        cloud = msg.cloud
        table = np.hstack((cloud.positions, cloud.normals)).astype(">f8")
        return _U64.pack(cloud.M) + table.tobytes()
    raise TypeError(f"not a protocol message: {msg!r}")


def encode(msg):
    """Full frame bytes for ``msg``, length prefix included."""
    body = bytes([msg.tag]) + encode_payload(msg)
    if len(body) > MAX_FRAME:
        raise ProtocolError(f"frame of {len(body)} bytes exceeds the 32-bit length field")
    return _LEN.pack(len(body)) + body


def decode_body(body):
    """Decode a frame body (tag byte plus payload)."""
    if not body:
        raise ProtocolError("empty frame")
    tag, payload = body[0], memoryview(body)[1:]
    if tag in (TAG_WORK_REQUEST, TAG_TERMINATE):
        if payload:
            raise ProtocolError(f"{TAG_NAMES[tag]} carries an unexpected payload")
        return WorkRequest() if tag == TAG_WORK_REQUEST else Terminate()
    if tag == TAG_ASSIGN:
        if len(payload) != _ASSIGN.size:
            raise ProtocolError(f"Assign payload must be 16 bytes, got {len(payload)}")
        start, end = _ASSIGN.unpack(payload)
        if start >= end:
            raise ProtocolError(f"Assign range [{start},{end}) is empty or inverted")
        return Assign(start, end)
    if tag == TAG_RESULTS:
        return Results(_decode_images(payload))
    if tag == TAG_CLOUD:
        return CloudTransfer(_decode_cloud(payload))
    raise ProtocolError(f"unknown message tag 0x{tag:02x}")


def decode(frame):
    """Decode a complete frame, length prefix included."""
    if len(frame) < _LEN.size:
        raise ProtocolError("frame shorter than its length prefix")
    (length,) = _LEN.unpack_from(frame)
    if length != len(frame) - _LEN.size:
        raise ProtocolError(
            f"length prefix says {length} bytes, frame holds {len(frame) - _LEN.size}")
    return decode_body(bytes(frame[_LEN.size:]))


def _decode_images(payload):
    if len(payload) < _U64.size:
        raise ProtocolError("Results payload truncated")
    (count,) = _U64.unpack_from(payload)
    pos = _U64.size
    images = []
    for _ in range(count):
        if pos + _IMAGE_HEADER.size > len(payload):
            raise ProtocolError("Results payload truncated in image header")
        origin, W = _IMAGE_HEADER.unpack_from(payload, pos)
        pos += _IMAGE_HEADER.size
        nbytes = 4 * W * W
        if W == 0 or pos + nbytes > len(payload):
            raise ProtocolError(f"Results payload truncated in image {origin}")
        bins = np.frombuffer(payload[pos:pos + nbytes], dtype=">u4").reshape(W, W)
        images.append(SpinImage(origin, bins.astype(np.int64)))
        pos += nbytes
    if pos != len(payload):
        raise ProtocolError(f"{len(payload) - pos} trailing bytes after Results images")
    return images


def _decode_cloud(payload):
    if len(payload) < _U64.size:
        raise ProtocolError("CloudTransfer payload truncated")
    (M,) = _U64.unpack_from(payload)
    expected = _U64.size + 48 * M
    if len(payload) != expected:
        raise ProtocolError(f"CloudTransfer of {M} points needs {expected} bytes, got {len(payload)}")
    table = np.frombuffer(payload[_U64.size:], dtype=">f8").reshape(M, 6).astype(np.float64)
    return PointCloud(table[:, :3], table[:, 3:])


# -- stream helpers ----------------------------------------------------------

def _recv_exact(sock, n):
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            if buf:
                raise ConnectionError("connection closed mid-frame")
            return None
        buf += chunk
    return bytes(buf)


def read_message(sock):
    """Read one message; ``None`` on clean EOF at a frame boundary."""
    header = _recv_exact(sock, _LEN.size)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    body = _recv_exact(sock, length)
    if body is None:
        raise ConnectionError("connection closed mid-frame")
    return decode_body(body)


def write_message(sock, msg):
    sock.sendall(encode(msg))
