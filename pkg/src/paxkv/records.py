"""Core domain types: LSNs, write operations, log records, and their binary codecs.

The on-disk log record layout is fixed (header: cohort id 4B, LSN 8B, body
length 4B, checksum 4B, then the body) so traces and disk images are
comparable across runs. Corrupt or torn trailing bytes are treated as
end-of-stream by the decoder.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum

EPOCH_BITS = 16
SEQ_BITS = 48
MAX_EPOCH = (1 << EPOCH_BITS) - 1
MAX_SEQ = (1 << SEQ_BITS) - 1


@dataclass(frozen=True, order=True)
class Lsn:
    """Two-part log sequence number: lexicographic order on (epoch, seq)."""

    epoch: int
    seq: int

    def encode(self) -> int:
        """Pack into a single 64-bit integer, epoch in the high bits."""
        if not (0 <= self.epoch <= MAX_EPOCH and 0 <= self.seq <= MAX_SEQ):
            raise ValueError(f"lsn out of range: {self}")
        return (self.epoch << SEQ_BITS) | self.seq

    @staticmethod
    def decode(value: int) -> "Lsn":
        return Lsn(value >> SEQ_BITS, value & MAX_SEQ)

    def next(self) -> "Lsn":
        return Lsn(self.epoch, self.seq + 1)

    def __str__(self) -> str:
        return f"{self.epoch}.{self.seq}"


LSN_ZERO = Lsn(0, 0)


class OpKind(IntEnum):
    PUT = 1
    DELETE = 2
    CONDITIONAL_PUT = 3
    CONDITIONAL_DELETE = 4


_CONDITIONAL = (OpKind.CONDITIONAL_PUT, OpKind.CONDITIONAL_DELETE)
_DELETES = (OpKind.DELETE, OpKind.CONDITIONAL_DELETE)


@dataclass(frozen=True)
class ColumnWrite:
    """One column touched by a write; value None means delete (tombstone)."""

    column: bytes
    value: bytes | None = None
    expected_version: int | None = None


@dataclass(frozen=True)
class WriteOp:
    kind: OpKind
    key: bytes
    columns: tuple[ColumnWrite, ...]

    def __post_init__(self) -> None:
        if not self.columns:
            raise ValueError("write op touches no columns")
        for col in self.columns:
            if self.kind in _CONDITIONAL and col.expected_version is None:
                raise ValueError("conditional op requires expected_version per column")
            if self.kind not in _CONDITIONAL and col.expected_version is not None:
                raise ValueError("unconditional op carries expected_version")
            if self.kind in _DELETES and col.value is not None:
                raise ValueError("delete carries a value")
            if self.kind in (OpKind.PUT, OpKind.CONDITIONAL_PUT) and col.value is None:
                raise ValueError("put without a value")

    @property
    def is_conditional(self) -> bool:
        return self.kind in _CONDITIONAL


@dataclass(frozen=True)
class Write:
    """Log record body: a replicated write operation."""

    op: WriteOp


@dataclass(frozen=True)
class CommitMarker:
    """Log record body: non-forced note of the last committed LSN."""

    last_committed: Lsn


@dataclass(frozen=True)
class LogRecord:
    cohort: int
    lsn: Lsn
    body: Write | CommitMarker


def put(key: bytes, column: bytes, value: bytes) -> WriteOp:
    return WriteOp(OpKind.PUT, key, (ColumnWrite(column, value),))


def delete(key: bytes, column: bytes) -> WriteOp:
    return WriteOp(OpKind.DELETE, key, (ColumnWrite(column),))


def conditional_put(key: bytes, column: bytes, value: bytes, expected: int) -> WriteOp:
    return WriteOp(
        OpKind.CONDITIONAL_PUT, key, (ColumnWrite(column, value, expected),)
    )


def conditional_delete(key: bytes, column: bytes, expected: int) -> WriteOp:
    return WriteOp(
        OpKind.CONDITIONAL_DELETE, key, (ColumnWrite(column, None, expected),)
    )


# ---------------------------------------------------------------------------
# Binary codecs.

_HEADER = struct.Struct(">IQII")  # cohort, lsn, body_len, crc32(body)
HEADER_LEN = _HEADER.size

_BODY_WRITE = 1
_BODY_MARKER = 2

_COL_HAS_VALUE = 0x01
_COL_HAS_EXPECTED = 0x02


def encode_op(op: WriteOp) -> bytes:
    parts = [
        struct.pack(">BH", op.kind, len(op.key)),
        op.key,
        struct.pack(">H", len(op.columns)),
    ]
    for col in op.columns:
        flags = 0
        if col.value is not None:
            flags |= _COL_HAS_VALUE
        if col.expected_version is not None:
            flags |= _COL_HAS_EXPECTED
        parts.append(struct.pack(">H", len(col.column)))
        parts.append(col.column)
        parts.append(struct.pack(">B", flags))
        if col.value is not None:
            parts.append(struct.pack(">I", len(col.value)))
            parts.append(col.value)
        if col.expected_version is not None:
            parts.append(struct.pack(">Q", col.expected_version))
    return b"".join(parts)


def decode_op(buf: bytes, off: int = 0) -> tuple[WriteOp, int]:
    kind, klen = struct.unpack_from(">BH", buf, off)
    off += 3
    key = bytes(buf[off : off + klen])
    off += klen
    (ncols,) = struct.unpack_from(">H", buf, off)
    off += 2
    cols = []
    for _ in range(ncols):
        (clen,) = struct.unpack_from(">H", buf, off)
        off += 2
        column = bytes(buf[off : off + clen])
        off += clen
        (flags,) = struct.unpack_from(">B", buf, off)
        off += 1
        value = None
        expected = None
        if flags & _COL_HAS_VALUE:
            (vlen,) = struct.unpack_from(">I", buf, off)
            off += 4
            value = bytes(buf[off : off + vlen])
            off += vlen
        if flags & _COL_HAS_EXPECTED:
            (expected,) = struct.unpack_from(">Q", buf, off)
            off += 8
        cols.append(ColumnWrite(column, value, expected))
    return WriteOp(OpKind(kind), key, tuple(cols)), off


def encode_record(record: LogRecord) -> bytes:
    if isinstance(record.body, Write):
        body = bytes([_BODY_WRITE]) + encode_op(record.body.op)
    else:
        body = bytes([_BODY_MARKER]) + struct.pack(
            ">Q", record.body.last_committed.encode()
        )
    header = _HEADER.pack(
        record.cohort, record.lsn.encode(), len(body), zlib.crc32(body)
    )
    return header + body


def decode_records(buf: bytes | bytearray) -> tuple[list[LogRecord], bool]:
    """Decode consecutive records; stop at the first torn or corrupt one.

    Returns (records, clean) where clean is False when trailing bytes were
    discarded (standard torn-write handling during recovery).
    """
    records: list[LogRecord] = []
    off = 0
    total = len(buf)
    while off + HEADER_LEN <= total:
        cohort, lsn64, body_len, crc = _HEADER.unpack_from(buf, off)
        end = off + HEADER_LEN + body_len
        if end > total:
            return records, False
        body = bytes(buf[off + HEADER_LEN : end])
        if zlib.crc32(body) != crc or body_len < 1:
            return records, False
        try:
            if body[0] == _BODY_WRITE:
                op, _ = decode_op(body, 1)
                rec = LogRecord(cohort, Lsn.decode(lsn64), Write(op))
            elif body[0] == _BODY_MARKER:
                (marked,) = struct.unpack(">Q", body[1:9])
                rec = LogRecord(
                    cohort, Lsn.decode(lsn64), CommitMarker(Lsn.decode(marked))
                )
            else:
                return records, False
        except (struct.error, ValueError, IndexError):
            return records, False
        records.append(rec)
        off = end
    return records, off == total
