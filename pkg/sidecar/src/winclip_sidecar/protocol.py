"""Wire protocol framing, implemented independently of any client library.

Frame layout: magic b"ADET" | version u16 LE (=1) | message type u8 |
payload length u32 LE | payload.

SCORE_REQ payload: u32 H, u32 W, u32 C=3, then H*W*C float32 LE row-major RGB
in [0, 1]. SCORE_RESP payload: u32 H', u32 W', then H'*W' float32 LE map in
[0, 1]. HELLO_ACK payload: u32 native_resolution (0 = any), u8 flags. ERROR
payload: UTF-8 message.
"""

import struct

import numpy as np

MAGIC = b"ADET"
VERSION = 1

MSG_HELLO = 0x01
MSG_HELLO_ACK = 0x02
MSG_SCORE_REQ = 0x10
MSG_SCORE_RESP = 0x11
MSG_ERROR = 0x7F

HEADER = struct.Struct("<4sHBI")
HEADER_SIZE = HEADER.size

MAX_PAYLOAD = 256 * 1024 * 1024


class FrameError(Exception):
    """Malformed frame or payload; the connection survives these."""


def pack_frame(msg_type, payload=b""):
    return HEADER.pack(MAGIC, VERSION, msg_type, len(payload)) + payload


def pack_error(message):
    return pack_frame(MSG_ERROR, message.encode("utf-8"))


def pack_hello_ack(native_resolution=0, flags=0):
    return pack_frame(MSG_HELLO_ACK, struct.pack("<IB", native_resolution, flags))


def parse_header(buf):
    """Returns (msg_type, payload_length); raises FrameError when malformed."""
    magic, version, msg_type, length = HEADER.unpack(buf)
    if magic != MAGIC:
        raise FrameError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FrameError(f"unsupported protocol version {version}")
    if length > MAX_PAYLOAD:
        raise FrameError(f"payload length {length} exceeds limit")
    return msg_type, length


def decode_score_req(payload):
    """Returns the request image as a float32 (H, W, 3) array."""
    if len(payload) < 12:
        raise FrameError("SCORE_REQ payload too short")
    h, w, c = struct.unpack_from("<III", payload)
    if c != 3:
        raise FrameError(f"SCORE_REQ channel count {c} != 3")
    if h == 0 or w == 0 or len(payload) != 12 + h * w * c * 4:
        raise FrameError("SCORE_REQ payload size mismatch")
    return np.frombuffer(payload, dtype="<f4", offset=12).reshape(h, w, c)


def encode_score_resp(anomaly_map):
    m = np.ascontiguousarray(anomaly_map, dtype="<f4")
    if m.ndim != 2 or m.size == 0:
        raise FrameError(f"anomaly map must be a nonempty 2-D array, got {m.shape}")
    h, w = m.shape
    return pack_frame(MSG_SCORE_RESP, struct.pack("<II", h, w) + m.tobytes())
