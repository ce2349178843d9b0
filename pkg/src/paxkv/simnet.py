"""Session-based message layer: reliable, in-order, exactly-once per pair.

Models TCP as the protocol assumes it: per ordered (src, dst) pair messages
arrive in send order after a seeded delay. A crash on either side tears the
session and drops everything in flight; a restarted node starts clean.
Links can be paused (delivery held, order preserved) to model stalls.
"""

from __future__ import annotations

from typing import Any, Callable

from .simcore import Simulation


class SimNet:
    def __init__(self, sim: Simulation):
        self.sim = sim
        self._endpoints: dict[str, Callable[[str, Any], None]] = {}
        self._boot: dict[str, int] = {}
        self._last_delivery: dict[tuple[str, str], int] = {}
        self._paused: set[tuple[str, str]] = set()
        self._held: dict[tuple[str, str], list[tuple[str, str, Any, int, int]]] = {}

    def register(self, name: str, deliver: Callable[[str, Any], None]) -> int:
        """(Re)attach an endpoint; returns its boot id (bumps on each boot)."""
        self._endpoints[name] = deliver
        self._boot[name] = self._boot.get(name, 0) + 1
        return self._boot[name]

    def detach(self, name: str) -> None:
        """Node crash: tear sessions; in-flight messages to/from it drop."""
        self._endpoints.pop(name, None)
        self._boot[name] = self._boot.get(name, 0) + 1

    def alive(self, name: str) -> bool:
        return name in self._endpoints

    def pause(self, a: str, b: str) -> None:
        self._paused.add((a, b))
        self._paused.add((b, a))

    def resume(self, a: str, b: str) -> None:
        for pair in ((a, b), (b, a)):
            self._paused.discard(pair)
            held = self._held.pop(pair, [])
            for i, env in enumerate(held):
                self.sim.schedule(1 + i, self._deliver, *env)

    def send(self, src: str, dst: str, payload: Any, category: str = "proto") -> None:
        sim = self.sim
        if src not in self._endpoints or dst not in self._endpoints:
            sim.trace.emit(sim.now, src, "msg_drop", dst=dst, category=category)
            return
        delay = sim.config.draw_delay(sim.rng)
        pair = (src, dst)
        at = max(sim.now + delay, self._last_delivery.get(pair, 0))
        self._last_delivery[pair] = at
        sim.trace.emit(
            sim.now,
            src,
            "msg_send",
            dst=dst,
            category=category,
            deliver_at=at,
            **_summary(payload),
        )
        env = (src, dst, payload, self._boot[src], self._boot[dst])
        sim.schedule(at - sim.now, self._deliver, *env)

    def _deliver(
        self, src: str, dst: str, payload: Any, src_boot: int, dst_boot: int
    ) -> None:
        sim = self.sim
        if (
            self._boot.get(src) != src_boot
            or self._boot.get(dst) != dst_boot
            or dst not in self._endpoints
        ):
            sim.trace.emit(sim.now, dst, "msg_lost", src=src)
            return
        pair = (src, dst)
        if pair in self._paused:
            self._held.setdefault(pair, []).append(
                (src, dst, payload, src_boot, dst_boot)
            )
            return
        sim.trace.emit(sim.now, dst, "msg_recv", src=src, **_summary(payload))
        self._endpoints[dst](src, payload)


def _summary(payload: Any) -> dict:
    fields = getattr(payload, "trace_fields", None)
    if callable(fields):
        return fields()
    return {}
