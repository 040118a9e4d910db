"""Connection handling: frame reading with resynchronization, request
dispatch, and the stdio/socket server loops.

Malformed input never terminates a connection; the server answers with an
ERROR frame and scans forward to the next frame boundary. Every well-formed
request receives exactly one response frame.
"""

import socket
import socketserver
import sys
import threading

from . import protocol
from .protocol import (
    HEADER_SIZE,
    MAGIC,
    MSG_HELLO,
    MSG_SCORE_REQ,
    FrameError,
    pack_error,
    pack_hello_ack,
)


class FrameReader:
    """Buffered frame reader over a read(n) callable.

    ``next_frame`` raises FrameError on a malformed header after discarding
    input up to the next candidate frame boundary, and EOFError once the
    stream is exhausted.
    """

    def __init__(self, read):
        self._read = read
        self._buf = b""

    def _fill(self, n):
        while len(self._buf) < n:
            chunk = self._read(n - len(self._buf))
            if not chunk:
                raise EOFError("connection closed")
            self._buf += chunk

    def _resync(self):
        # Drop the bad byte, then keep everything from the next magic
        # candidate onward (a partial magic suffix may still complete).
        buf = self._buf[1:]
        idx = buf.find(MAGIC)
        if idx >= 0:
            self._buf = buf[idx:]
            return
        keep = 0
        for k in range(min(len(MAGIC) - 1, len(buf)), 0, -1):
            if buf.endswith(MAGIC[:k]):
                keep = k
                break
        self._buf = buf[-keep:] if keep else b""

    def next_frame(self):
        self._fill(HEADER_SIZE)
        try:
            msg_type, length = protocol.parse_header(self._buf[:HEADER_SIZE])
        except FrameError:
            self._resync()
            raise
        self._fill(HEADER_SIZE + length)
        payload = self._buf[HEADER_SIZE : HEADER_SIZE + length]
        self._buf = self._buf[HEADER_SIZE + length :]
        return msg_type, payload


def dispatch(msg_type, payload, backend, lock):
    """Map one well-framed request to exactly one response frame."""
    if msg_type == MSG_HELLO:
        return pack_hello_ack(backend.native_resolution)
    if msg_type == MSG_SCORE_REQ:
        img = protocol.decode_score_req(payload)
        with lock:
            anomaly_map = backend.score(img)
        return protocol.encode_score_resp(anomaly_map)
    return pack_error(f"unexpected message type 0x{msg_type:02x}")


def serve_connection(read, write, backend, lock):
    reader = FrameReader(read)
    while True:
        try:
            msg_type, payload = reader.next_frame()
        except EOFError:
            return
        except FrameError as exc:
            response = pack_error(str(exc))
        else:
            try:
                response = dispatch(msg_type, payload, backend, lock)
            except FrameError as exc:
                response = pack_error(str(exc))
            except Exception as exc:  # model failures must not kill the server
                response = pack_error(f"{type(exc).__name__}: {exc}")
        try:
            write(response)
        except (OSError, ValueError):
            return


def serve_stdio(backend):
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer

    def write(data):
        stdout.write(data)
        stdout.flush()

    serve_connection(stdin.read, write, backend, threading.Lock())


def serve_socket(backend, host, port, ready_callback=None):
    """Threaded TCP server; connections share one model behind a lock."""
    lock = threading.Lock()

    class Handler(socketserver.BaseRequestHandler):
        def handle(self):
            sock = self.request

            def read(n):
                try:
                    return sock.recv(n)
                except OSError:
                    return b""

            serve_connection(read, sock.sendall, backend, lock)

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server((host, port), Handler) as server:
        if ready_callback is not None:
            ready_callback(server.server_address[1])
        server.serve_forever()
