"""Length-delimited binary framing for the detector wire protocol.

Frame layout: magic b"ADET" | version u16 LE (=1) | message type u8 |
payload length u32 LE | payload.
"""

import struct

import numpy as np

from .errors import ProtocolViolationError

MAGIC = b"ADET"
VERSION = 1

MSG_HELLO = 0x01
MSG_HELLO_ACK = 0x02
MSG_SCORE_REQ = 0x10
MSG_SCORE_RESP = 0x11
MSG_ERROR = 0x7F

_HEADER = struct.Struct("<4sHBI")
HEADER_SIZE = _HEADER.size

MAX_PAYLOAD = 256 * 1024 * 1024  # refuse absurd frames


def pack_frame(msg_type, payload=b""):
    return _HEADER.pack(MAGIC, VERSION, msg_type, len(payload)) + payload


def parse_header(buf):
    """Returns (msg_type, payload_length); raises on malformed headers."""
    magic, version, msg_type, length = _HEADER.unpack(buf)
    if magic != MAGIC:
        raise ProtocolViolationError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolViolationError(f"unsupported protocol version {version}")
    if length > MAX_PAYLOAD:
        raise ProtocolViolationError(f"payload length {length} exceeds limit")
    return msg_type, length


def read_exact(read, n):
    """Read exactly n bytes via read(k) callable; raises EOFError on short read."""
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = read(remaining)
        if not chunk:
            raise EOFError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(read):
    msg_type, length = parse_header(read_exact(read, HEADER_SIZE))
    payload = read_exact(read, length) if length else b""
    return msg_type, payload


def encode_score_req(img):
    img = np.ascontiguousarray(img, dtype=np.float32)
    h, w, c = img.shape
    return struct.pack("<III", h, w, c) + img.tobytes()


def decode_score_req(payload):
    if len(payload) < 12:
        raise ProtocolViolationError("SCORE_REQ payload too short")
    h, w, c = struct.unpack_from("<III", payload)
    expected = 12 + h * w * c * 4
    if c != 3:
        raise ProtocolViolationError(f"SCORE_REQ channel count {c} != 3")
    if h == 0 or w == 0 or len(payload) != expected:
        raise ProtocolViolationError("SCORE_REQ payload size mismatch")
    img = np.frombuffer(payload, dtype="<f4", offset=12).reshape(h, w, c)
    return img


def encode_score_resp(anomaly_map):
    m = np.ascontiguousarray(anomaly_map, dtype=np.float32)
    h, w = m.shape
    return struct.pack("<II", h, w) + m.tobytes()


def decode_score_resp(payload):
    if len(payload) < 8:
        raise ProtocolViolationError("SCORE_RESP payload too short")
    h, w = struct.unpack_from("<II", payload)
    if h == 0 or w == 0 or len(payload) != 8 + h * w * 4:
        raise ProtocolViolationError("SCORE_RESP payload size mismatch")
    return np.frombuffer(payload, dtype="<f4", offset=8).reshape(h, w)


def encode_hello_ack(native_resolution=0, flags=0):
    return struct.pack("<IB", native_resolution, flags)


def decode_hello_ack(payload):
    if len(payload) != 5:
        raise ProtocolViolationError("HELLO_ACK payload must be 5 bytes")
    native_resolution, flags = struct.unpack("<IB", payload)
    return native_resolution, flags
