"""Message and transcript fabric with byte-exact payload codecs.

Every inter-party byte is recorded as a Message. Payload formats are
fixed so traffic totals admit closed-form predictions:

  vector        u32 count, then count little-endian float64
  matrix        u32 rows, u32 cols, then rows*cols little-endian float64
  quantized     u32 count, then count zigzag-LEB128 varints of round(v/step)
  accept bit    one byte, 0 or 1
  id set        u32 count, then per id: u16 byte length + UTF-8 bytes
  reply batch   u32 count, then per entry: u16 id length + id + u32 k + k float64
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .core import ProtocolParams
from .errors import UnknownParty

KIND_SHARE = "share"
KIND_MATRIX = "matrix"
KIND_REPLY = "reply"
KIND_ACCEPT = "accept-bit"
KIND_ACCEPTED_SET = "accepted-set"
KIND_PARTIAL_SUM = "partial-sum"
MESSAGE_KINDS = (
    KIND_SHARE, KIND_MATRIX, KIND_REPLY, KIND_ACCEPT,
    KIND_ACCEPTED_SET, KIND_PARTIAL_SUM,
)


def client_party(client_id: str) -> str:
    return f"client:{client_id}"


def verifier_party(index: int) -> str:
    return f"verifier:{index}"


# ---------------------------------------------------------------------------
# payload codecs

def encode_vector(v: np.ndarray) -> bytes:
    v = np.asarray(v, dtype="<f8")
    return struct.pack("<I", v.shape[0]) + v.tobytes()


def decode_vector(data: bytes) -> np.ndarray:
    (count,) = struct.unpack_from("<I", data, 0)
    return np.frombuffer(data, dtype="<f8", count=count, offset=4).copy()


def encode_matrix(entries: np.ndarray) -> bytes:
    entries = np.asarray(entries, dtype="<f8")
    k, d = entries.shape
    return struct.pack("<II", k, d) + entries.tobytes()


def decode_matrix(data: bytes) -> np.ndarray:
    k, d = struct.unpack_from("<II", data, 0)
    return np.frombuffer(data, dtype="<f8", count=k * d, offset=8).reshape(k, d).copy()


def _zigzag(n: int) -> int:
    return (n << 1) if n >= 0 else ((-n << 1) - 1)


def _unzigzag(z: int) -> int:
    return (z >> 1) if (z & 1) == 0 else -((z + 1) >> 1)


def _write_varint(out: bytearray, z: int) -> None:
    while True:
        byte = z & 0x7F
        z >>= 7
        if z:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def encode_quantized(v: np.ndarray, step: float) -> bytes:
    """Variable-width integer encoding of a grid-valued vector."""
    v = np.asarray(v, dtype=np.float64)
    out = bytearray(struct.pack("<I", v.shape[0]))
    for q in np.round(v / step).astype(np.int64):
        _write_varint(out, _zigzag(int(q)))
    return bytes(out)


def decode_quantized(data: bytes, step: float) -> np.ndarray:
    (count,) = struct.unpack_from("<I", data, 0)
    values = np.empty(count, dtype=np.float64)
    pos = 4
    for i in range(count):
        z = 0
        shift = 0
        while True:
            byte = data[pos]
            pos += 1
            z |= (byte & 0x7F) << shift
            if not byte & 0x80:
                break
            shift += 7
        values[i] = _unzigzag(z) * step
    return values


def encode_accept(accept: bool) -> bytes:
    return b"\x01" if accept else b"\x00"


def decode_accept(data: bytes) -> bool:
    return data[0] == 1


def encode_id_set(ids) -> bytes:
    out = bytearray()
    ids = sorted(ids)
    out += struct.pack("<I", len(ids))
    for cid in ids:
        raw = cid.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
    return bytes(out)


def decode_id_set(data: bytes) -> list[str]:
    (count,) = struct.unpack_from("<I", data, 0)
    pos = 4
    ids = []
    for _ in range(count):
        (length,) = struct.unpack_from("<H", data, pos)
        pos += 2
        ids.append(data[pos:pos + length].decode("utf-8"))
        pos += length
    return ids


def encode_reply_batch(entries: list[tuple[str, np.ndarray]]) -> bytes:
    out = bytearray(struct.pack("<I", len(entries)))
    for cid, y in entries:
        raw = cid.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw + encode_vector(y)
    return bytes(out)


def decode_reply_batch(data: bytes) -> list[tuple[str, np.ndarray]]:
    (count,) = struct.unpack_from("<I", data, 0)
    pos = 4
    entries = []
    for _ in range(count):
        (length,) = struct.unpack_from("<H", data, pos)
        pos += 2
        cid = data[pos:pos + length].decode("utf-8")
        pos += length
        (k,) = struct.unpack_from("<I", data, pos)
        y = np.frombuffer(data, dtype="<f8", count=k, offset=pos + 4).copy()
        pos += 4 + 8 * k
        entries.append((cid, y))
    return entries


def vector_bytes(d: int) -> int:
    return 4 + 8 * d


def matrix_bytes(k: int, d: int) -> int:
    return 8 + 8 * k * d


def id_set_bytes(ids) -> int:
    return 4 + sum(2 + len(cid.encode("utf-8")) for cid in ids)


def reply_batch_bytes(ids, k: int) -> int:
    return 4 + sum(2 + len(cid.encode("utf-8")) + vector_bytes(k) for cid in ids)


# ---------------------------------------------------------------------------
# messages and transcripts

@dataclass(frozen=True)
class Message:
    sender: str
    receiver: str
    round: int
    kind: str
    payload: bytes
    seq: int

    @property
    def byte_size(self) -> int:
        return len(self.payload)


class MessageBus:
    """Collects messages in delivery order; the orchestrator enforces rounds."""

    def __init__(self):
        self._messages: list[Message] = []

    def send(self, sender: str, receiver: str, round: int, kind: str,
             payload: bytes) -> Message:
        if kind not in MESSAGE_KINDS:
            raise ValueError(f"unknown message kind {kind!r}")
        msg = Message(sender=sender, receiver=receiver, round=round, kind=kind,
                      payload=payload, seq=len(self._messages))
        self._messages.append(msg)
        return msg

    def received_by(self, receiver: str, kind: str | None = None) -> list[Message]:
        return [m for m in self._messages
                if m.receiver == receiver and (kind is None or m.kind == kind)]

    @property
    def messages(self) -> tuple[Message, ...]:
        return tuple(self._messages)


@dataclass(frozen=True, eq=False)
class Transcript:
    """Ordered record of every inter-party message in one protocol run."""

    messages: tuple[Message, ...]
    master_seed: int
    params: ProtocolParams | None = None

    def parties(self) -> set[str]:
        out = set()
        for m in self.messages:
            out.add(m.sender)
            out.add(m.receiver)
        return out

    def sha256(self) -> str:
        h = hashlib.sha256()
        for m in self.messages:
            h.update(f"{m.seq}|{m.sender}|{m.receiver}|{m.round}|{m.kind}|".encode())
            h.update(m.payload)
            h.update(b"\n")
        return h.hexdigest()

    def to_jsonl(self, include_payload: bool = False) -> str:
        lines = []
        for m in self.messages:
            record = {
                "sender": m.sender,
                "receiver": m.receiver,
                "round": m.round,
                "kind": m.kind,
                "byte_size": m.byte_size,
                "payload_sha256": hashlib.sha256(m.payload).hexdigest(),
            }
            if include_payload:
                record["payload_hex"] = m.payload.hex()
            lines.append(json.dumps(record, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")


def view_of(transcript: Transcript, T) -> list[Message]:
    """Order-preserving restriction to the messages received by parties in T."""
    T = set(T)
    unknown = T - transcript.parties()
    if unknown:
        raise UnknownParty(f"parties not in transcript: {sorted(unknown)}")
    return [m for m in transcript.messages if m.receiver in T]
