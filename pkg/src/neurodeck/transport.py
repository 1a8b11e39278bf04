"""Length-prefixed message framing and control opcodes for device links.

Every message is ``length (4 bytes LE) | opcode (1 byte) | payload``, where
length counts the opcode plus payload. Control payloads are UTF-8 JSON,
data payloads are packed sample frames. Documented byte-exact in
docs/wire-protocol.md.
"""

from __future__ import annotations

import json
import socket
import struct

# client -> device
OP_DISCOVER = 0x01
OP_CONFIGURE = 0x02
OP_START = 0x03
OP_STOP = 0x04
# device -> client
OP_DATA = 0x10
OP_ERROR = 0x7F
OP_PROFILE = 0x81
OP_CONFIG_ACK = 0x82
OP_STARTED = 0x83
OP_STOPPED = 0x84

_MAX_MESSAGE = 16 * 1024 * 1024


class TransportError(Exception):
    """Framing violation or unexpected peer behaviour."""


class TransportClosed(TransportError):
    """Peer closed the connection."""


def send_message(sock: socket.socket, opcode: int, payload: bytes = b"") -> None:
    body = bytes([opcode]) + payload
    sock.sendall(struct.pack("<I", len(body)) + body)


def send_json(sock: socket.socket, opcode: int, obj) -> None:
    send_message(sock, opcode, json.dumps(obj).encode("utf-8"))


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = bytearray()
    while len(chunks) < n:
        piece = sock.recv(n - len(chunks))
        if not piece:
            raise TransportClosed("connection closed mid-message")
        chunks += piece
    return bytes(chunks)


def recv_message(sock: socket.socket) -> tuple[int, bytes]:
    """Read one framed message; raises :class:`TransportClosed` on EOF."""
    header = sock.recv(4)
    if not header:
        raise TransportClosed("connection closed")
    if len(header) < 4:
        header += _recv_exact(sock, 4 - len(header))
    (length,) = struct.unpack("<I", header)
    if not 1 <= length <= _MAX_MESSAGE:
        raise TransportError(f"message length {length} out of bounds")
    body = _recv_exact(sock, length)
    return body[0], body[1:]


def parse_json(payload: bytes) -> dict:
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TransportError(f"malformed JSON payload: {exc}") from exc
