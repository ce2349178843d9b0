"""Deterministic discrete-event kernel.

Events run in (tick, insertion-order) order off a single heap; all randomness
flows through one seeded RNG, so identical (script, seed) pairs replay
bit-identically. Multi-step protocol sequences (elections, takeover,
catch-up) are written as generator processes that yield Futures.

One tick models one simulated millisecond.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Generator, Iterator


@dataclass
class SimConfig:
    """Tunables for the simulated cluster; all durations in ticks."""

    delay_min: int = 1
    delay_max: int = 5
    force_base: int = 10  # fixed cost of a physical log force
    force_per_record: int = 1  # bandwidth term per record covered
    group_commit_window: int = 1
    segment_size: int = 4 * 1024 * 1024
    commit_period: int = 1000
    session_timeout: int = 2000
    heartbeat_interval: int = 500
    candidacy_delay: int = 3  # non-base nodes wait this long before registering
    election_retry: int = 200
    catchup_chunk: int = 64
    fence_timeout: int = 1500
    client_timeout: int = 4000
    client_retry_backoff: int = 100
    piggyback_commits: bool = False
    takeover_delta_only: bool = False

    def draw_delay(self, rng: random.Random) -> int:
        if self.delay_min >= self.delay_max:
            return self.delay_min
        return rng.randint(self.delay_min, self.delay_max)


class Trace:
    """Append-only event log; sufficient to recompute acceptance metrics."""

    SCHEMA = "paxkv-trace-1"

    def __init__(self) -> None:
        self.records: list[tuple[int, str, str, dict]] = []

    def emit(self, tick: int, component: str, kind: str, **fields: Any) -> None:
        self.records.append((tick, component, kind, fields))

    def by_kind(self, *kinds: str) -> Iterator[tuple[int, str, str, dict]]:
        wanted = set(kinds)
        return (r for r in self.records if r[2] in wanted)


class _Event:
    __slots__ = ("fn", "args", "cancelled")

    def __init__(self, fn: Callable, args: tuple):
        self.fn = fn
        self.args = args
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class Future:
    """Single-assignment result; callbacks run as fresh events (same tick)."""

    __slots__ = ("sim", "done", "value", "_callbacks")

    def __init__(self, sim: "Simulation"):
        self.sim = sim
        self.done = False
        self.value: Any = None
        self._callbacks: list[Callable[[Any], None]] = []

    def resolve(self, value: Any = None) -> None:
        if self.done:
            raise RuntimeError("future resolved twice")
        self.done = True
        self.value = value
        for cb in self._callbacks:
            self.sim.schedule(0, cb, value)
        self._callbacks.clear()

    def add_callback(self, cb: Callable[[Any], None]) -> None:
        if self.done:
            self.sim.schedule(0, cb, self.value)
        else:
            self._callbacks.append(cb)


Process = Generator[Future, Any, Any]


class Simulation:
    def __init__(self, seed: int = 0, config: SimConfig | None = None):
        self.now = 0
        self.rng = random.Random(seed)
        self.seed = seed
        self.config = config or SimConfig()
        self.trace = Trace()
        self._heap: list[tuple[int, int, _Event]] = []
        self._seq = 0

    def schedule(self, delay: int, fn: Callable, *args: Any) -> _Event:
        if delay < 0:
            raise ValueError("negative delay")
        ev = _Event(fn, args)
        self._seq += 1
        heapq.heappush(self._heap, (self.now + delay, self._seq, ev))
        return ev

    def run_until(self, tick: int) -> None:
        """Execute all events with time <= tick, then advance the clock."""
        while self._heap and self._heap[0][0] <= tick:
            t, _, ev = heapq.heappop(self._heap)
            self.now = t
            if not ev.cancelled:
                ev.fn(*ev.args)
        self.now = max(self.now, tick)

    def run_all(self, limit: int = 10_000_000) -> None:
        steps = 0
        while self._heap:
            t, _, ev = heapq.heappop(self._heap)
            self.now = t
            if not ev.cancelled:
                ev.fn(*ev.args)
            steps += 1
            if steps > limit:
                raise RuntimeError("event budget exhausted")

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)

    # -- processes ----------------------------------------------------------

    def spawn(self, gen: Process) -> Future:
        """Run a generator process; it yields Futures and may return a value."""
        done = Future(self)
        self.schedule(0, self._step, gen, None, done)
        return done

    def _step(self, gen: Process, send_value: Any, done: Future) -> None:
        try:
            fut = gen.send(send_value)
        except StopIteration as stop:
            done.resolve(stop.value)
            return
        fut.add_callback(lambda v: self._step(gen, v, done))

    def sleep(self, ticks: int) -> Future:
        fut = Future(self)
        self.schedule(ticks, fut.resolve, None)
        return fut

    def resolved(self, value: Any = None) -> Future:
        fut = Future(self)
        fut.done = True
        fut.value = value
        return fut
