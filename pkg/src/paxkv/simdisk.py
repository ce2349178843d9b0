"""Simulated per-node disk: segmented log bytes, skipped-LSN sidecar, SSTables.

Durability model: appends land in a volatile tail buffer; a force makes all
buffered bytes up to the requested point durable after force_base +
force_per_record * covered_records ticks. Concurrent force requests coalesce
(group commit): the number of physical forces never exceeds the number of
requests. Crash discards the volatile tail; wipe destroys everything.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .simcore import Future, Simulation


class DiskFailed(Exception):
    """The node's disk is wiped or in a failed state."""


@dataclass
class Segment:
    index: int
    base: int  # byte offset of this segment's start in the whole log
    data: bytearray = field(default_factory=bytearray)

    @property
    def end(self) -> int:
        return self.base + len(self.data)


@dataclass
class SSTableBlob:
    table_id: str
    meta: Any
    cells: Any


class SimDisk:
    def __init__(self, sim: Simulation, node_id: str):
        self.sim = sim
        self.node_id = node_id
        self.failed = False
        self.segments: list[Segment] = [Segment(0, 0)]
        self.durable_pos = 0  # log bytes below this survived a crash
        self.append_pos = 0
        self.sidecar: dict[int, set[int]] = {}  # cohort -> encoded skipped LSNs
        self.meta: dict[str, Any] = {}  # small durable metadata (retention marks)
        self.sstables: dict[str, SSTableBlob] = {}
        self.force_count = 0
        # force engine state
        self._force_target = 0
        self._force_records = 0
        self._forcing = False
        self._force_scheduled = False
        self._waiters: list[tuple[int, Future]] = []
        self._generation = 0

    def _check(self) -> None:
        if self.failed:
            raise DiskFailed(self.node_id)

    # -- log ------------------------------------------------------------

    def append_log(self, data: bytes, segment_size: int) -> int:
        """Buffer bytes at the log tail; returns the end position."""
        self._check()
        seg = self.segments[-1]
        if len(seg.data) and len(seg.data) + len(data) > segment_size:
            seg = Segment(seg.index + 1, seg.end)
            self.segments.append(seg)
        seg.data.extend(data)
        self.append_pos = seg.end
        return self.append_pos

    def force_log(self, up_to: int, records: int) -> Future:
        """Request durability up to a byte position; coalesces with peers."""
        self._check()
        fut = Future(self.sim)
        if up_to <= self.durable_pos:
            fut.resolve(DurableToken(self.durable_pos, self.force_count))
            return fut
        self._waiters.append((up_to, fut))
        self._force_target = max(self._force_target, up_to)
        self._force_records += records
        if not self._forcing and not self._force_scheduled:
            self._force_scheduled = True
            self.sim.schedule(
                self.sim.config.group_commit_window, self._start_force, self._generation
            )
        return fut

    def _start_force(self, generation: int) -> None:
        if generation != self._generation or self.failed:
            return
        self._force_scheduled = False
        if self._force_target <= self.durable_pos:
            return
        self._forcing = True
        covered = min(self._force_target, self.append_pos)
        nrec = self._force_records
        self._force_records = 0
        duration = (
            self.sim.config.force_base + self.sim.config.force_per_record * nrec
        )
        self.sim.schedule(duration, self._finish_force, generation, covered, duration)

    def _finish_force(self, generation: int, covered: int, duration: int) -> None:
        if generation != self._generation or self.failed:
            return
        self._forcing = False
        self.durable_pos = max(self.durable_pos, covered)
        self.force_count += 1
        self.sim.trace.emit(
            self.sim.now, self.node_id, "log_force", pos=covered, dur=duration
        )
        token = DurableToken(self.durable_pos, self.force_count)
        remaining = []
        for pos, fut in self._waiters:
            if pos <= self.durable_pos:
                fut.resolve(token)
            else:
                remaining.append((pos, fut))
        self._waiters = remaining
        if self._force_target > self.durable_pos:
            self._start_force(generation)

    def durable_log_bytes(self) -> bytes:
        """The log contents a restart would observe."""
        out = bytearray()
        for seg in self.segments:
            if seg.base >= self.durable_pos:
                break
            out.extend(seg.data[: max(0, self.durable_pos - seg.base)])
        return bytes(out)

    def drop_segments(self, count: int) -> None:
        del self.segments[:count]
        if not self.segments:
            self.segments = [Segment(0, self.append_pos)]

    # -- sidecar + metadata ----------------------------------------------

    def write_sidecar(self, cohort: int, lsns: set[int]) -> Future:
        """Durably extend a cohort's skipped-LSN list (takes one disk write)."""
        self._check()
        fut = Future(self.sim)
        generation = self._generation

        def land(_=None):
            if generation != self._generation or self.failed:
                return
            self.sidecar.setdefault(cohort, set()).update(lsns)
            fut.resolve(None)

        self.sim.schedule(self.sim.config.force_base, land)
        return fut

    def gc_sidecar(self, cohort: int, up_to: int) -> None:
        kept = {x for x in self.sidecar.get(cohort, set()) if x > up_to}
        if kept:
            self.sidecar[cohort] = kept
        else:
            self.sidecar.pop(cohort, None)

    def put_meta(self, key: str, value: Any) -> None:
        self._check()
        self.meta[key] = value

    # -- sstables ---------------------------------------------------------

    def put_sstable(self, blob: SSTableBlob) -> None:
        self._check()
        self.sstables[blob.table_id] = blob

    def delete_sstables(self, table_ids: list[str]) -> None:
        self._check()
        for tid in table_ids:
            self.sstables.pop(tid, None)

    # -- faults -----------------------------------------------------------

    def crash(self) -> None:
        """Lose the volatile tail and abort in-flight forces."""
        self._generation += 1
        self._forcing = False
        self._force_scheduled = False
        self._force_target = 0
        self._force_records = 0
        self._waiters.clear()
        kept: list[Segment] = []
        for seg in self.segments:
            if seg.base >= self.durable_pos:
                break
            if seg.end > self.durable_pos:
                seg.data = seg.data[: self.durable_pos - seg.base]
            kept.append(seg)
        self.segments = kept or [Segment(0, 0)]
        self.append_pos = self.durable_pos

    def wipe(self) -> None:
        self.crash()
        self.segments = [Segment(0, 0)]
        self.durable_pos = 0
        self.append_pos = 0
        self.sidecar = {}
        self.meta = {}
        self.sstables = {}

    def fail(self) -> None:
        self.failed = True

    def repair(self) -> None:
        self.failed = False


@dataclass(frozen=True)
class DurableToken:
    """Proof of durability: the log watermark and physical force ordinal."""

    durable_pos: int
    force_ordinal: int
