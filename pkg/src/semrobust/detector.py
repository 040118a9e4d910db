"""Uniform interface to anomaly detectors: a differentiable toy detector for
desk-scale verification and a client for external detectors over the wire
protocol."""

import shlex
import socket
import subprocess

import numpy as np
from scipy.ndimage import gaussian_filter

from . import protocol
from .errors import ProtocolViolationError, TransportError
from .imageops import bilinear_resize

_TOY_NORM = 0.5  # affine normalization constant of the toy detector


def score(d, x):
    """Score an image and return the anomaly map at input resolution
    (bilinear upsampling when the detector returns a coarser map)."""
    m = np.asarray(d.score(x), dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ProtocolViolationError(f"detector {d.name} returned non-finite scores")
    if m.shape != x.shape[:2]:
        m = bilinear_resize(m, x.shape[:2])
    return m


def _blur(a, sigma):
    # 'reflect' keeps the operator self-adjoint for the analytic VJP and
    # preserves constant images
    return gaussian_filter(a, sigma, mode="reflect")


class ToyDetector:
    """High-frequency-energy detector: channel-mean of |x - blur(x, sigma=2)|,
    blurred again (sigma=1), divided by 0.5 and clipped to [0, 1].

    Pure, deterministic, and fully differentiable; serves as the analytic-VJP
    oracle detector for desk-scale runs.
    """

    name = "toy"
    provides_analytic_vjp = True
    native_resolution = None

    def _parts(self, x):
        x = np.asarray(x, dtype=np.float64)
        low = _blur(x, sigma=(2.0, 2.0, 0.0))
        diff = x - low
        energy = np.abs(diff).mean(axis=2)
        raw = _blur(energy, sigma=1.0) / _TOY_NORM
        return diff, raw

    def score(self, x):
        _, raw = self._parts(x)
        return np.clip(raw, 0.0, 1.0)

    def score_jvp(self, x, dx):
        """Forward tangent of score at x in direction dx."""
        diff, raw = self._parts(x)
        ddiff = dx - _blur(np.asarray(dx, dtype=np.float64), sigma=(2.0, 2.0, 0.0))
        denergy = (np.sign(diff) * ddiff).mean(axis=2)
        draw = _blur(denergy, sigma=1.0) / _TOY_NORM
        active = (raw > 0.0) & (raw < 1.0)
        return draw * active

    def score_vjp(self, x, upstream):
        """Gradient of <upstream, score(x)> with respect to x."""
        diff, raw = self._parts(x)
        active = (raw > 0.0) & (raw < 1.0)
        u = _blur(upstream * active, sigma=1.0) / _TOY_NORM
        g = np.sign(diff) * (u / 3.0)[:, :, None]
        return g - _blur(g, sigma=(2.0, 2.0, 0.0))


class _SocketTransport:
    def __init__(self, host, port, timeout):
        self._addr = (host, port)
        self._timeout = timeout
        self._sock = None

    def open(self):
        self._sock = socket.create_connection(self._addr, timeout=self._timeout)

    def close(self):
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def send(self, data):
        self._sock.sendall(data)

    def read(self, n):
        return self._sock.recv(n)


class _StdioTransport:
    def __init__(self, command):
        self._command = command
        self._proc = None

    def open(self):
        self._proc = subprocess.Popen(
            shlex.split(self._command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )

    def close(self):
        if self._proc is not None:
            try:
                self._proc.stdin.close()
                self._proc.terminate()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
            finally:
                self._proc = None

    def send(self, data):
        self._proc.stdin.write(data)
        self._proc.stdin.flush()

    def read(self, n):
        return self._proc.stdout.read(n)


class RemoteDetector:
    """Client for a detector process speaking the wire protocol.

    ``spec`` is either ``host:port`` or ``stdio:<command>``. A handle owns one
    connection and serves one in-flight request at a time.
    """

    provides_analytic_vjp = False

    def __init__(self, spec, retries=2, timeout=60.0):
        self.name = f"remote:{spec}"
        self._retries = retries
        if spec.startswith("stdio:"):
            self._transport = _StdioTransport(spec[len("stdio:"):])
        else:
            host, _, port = spec.rpartition(":")
            try:
                port = int(port)
            except ValueError:
                raise TransportError(f"bad remote spec {spec!r}") from None
            self._transport = _SocketTransport(host or "127.0.0.1", port, timeout)
        self.native_resolution = None
        self._connected = False

    def connect(self):
        self._transport.open()
        self._transport.send(protocol.pack_frame(protocol.MSG_HELLO))
        msg_type, payload = protocol.read_frame(self._transport.read)
        if msg_type != protocol.MSG_HELLO_ACK:
            raise ProtocolViolationError(f"expected HELLO_ACK, got 0x{msg_type:02x}")
        native, _flags = protocol.decode_hello_ack(payload)
        self.native_resolution = native or None
        self._connected = True

    def close(self):
        self._transport.close()
        self._connected = False

    def _score_once(self, x):
        if not self._connected:
            self.connect()
        req = protocol.encode_score_req(x)
        self._transport.send(protocol.pack_frame(protocol.MSG_SCORE_REQ, req))
        msg_type, payload = protocol.read_frame(self._transport.read)
        if msg_type == protocol.MSG_ERROR:
            raise ProtocolViolationError(
                f"detector error: {payload.decode('utf-8', 'replace')}"
            )
        if msg_type != protocol.MSG_SCORE_RESP:
            raise ProtocolViolationError(f"expected SCORE_RESP, got 0x{msg_type:02x}")
        return protocol.decode_score_resp(payload).astype(np.float64)

    def score(self, x):
        last = None
        for attempt in range(self._retries + 1):
            try:
                return self._score_once(x)
            except (OSError, EOFError) as exc:
                last = exc
                self.close()
        raise TransportError(
            f"{self.name}: transport failed after {self._retries + 1} attempts: {last}",
            retries=self._retries,
        )


def make_detector(spec):
    """Build a detector handle from a CLI-style spec: ``toy`` or
    ``remote:<host:port | stdio:command>``."""
    if spec == "toy":
        return ToyDetector()
    if spec.startswith("remote:"):
        return RemoteDetector(spec[len("remote:"):])
    raise ValueError(f"unknown detector spec {spec!r}")
