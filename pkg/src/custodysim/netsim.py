"""Deterministic discrete-event engine: virtual clock, links, broadcast.

Time is purely simulated. Given the same configuration and seed, every
run produces the same event trace, byte for byte.
"""
from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Callable, Optional


class SchedulingInPast(Exception):
    pass


class UnknownNode(Exception):
    pass


@dataclass(frozen=True)
class LinkModel:
    """Point-to-point link: fixed bandwidth plus a constant base delay."""

    bandwidth: float  # bytes/second
    base_delay: float = 0.0

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.base_delay < 0:
            raise ValueError("base delay cannot be negative")

    def transmission_delay(self, size: int) -> float:
        if size < 0:
            raise ValueError("size cannot be negative")
        return self.base_delay + size / self.bandwidth


@dataclass(order=True)
class _Event:
    fire_time: float
    sequence: int
    action: Callable[[], None] = field(compare=False)
    tag: str = field(compare=False, default="")


class Scheduler:
    """Event queue ordered by (fire time, insertion sequence)."""

    def __init__(self, trace: bool = False):
        self.now = 0.0
        self._seq = 0
        self._heap: list[_Event] = []
        self.trace: Optional[list] = [] if trace else None

    def schedule_at(self, fire_time: float, action: Callable[[], None],
                    tag: str = "") -> None:
        if fire_time < self.now:
            raise SchedulingInPast(f"{fire_time} < now {self.now}")
        heapq.heappush(self._heap, _Event(fire_time, self._seq, action, tag))
        self._seq += 1

    def schedule(self, delay: float, action: Callable[[], None],
                 tag: str = "") -> None:
        self.schedule_at(self.now + delay, action, tag)

    def run_until(self, t: float) -> None:
        """Fire every event due at or before t, then advance the clock to t."""
        if t < self.now:
            raise SchedulingInPast(f"cannot run backwards to {t}")
        while self._heap and self._heap[0].fire_time <= t:
            event = heapq.heappop(self._heap)
            self.now = event.fire_time
            if self.trace is not None:
                self.trace.append((self.now, event.tag))
            event.action()
        self.now = t

    def run_until_idle(self, max_time: float = float("inf")) -> None:
        while self._heap and self._heap[0].fire_time <= max_time:
            event = heapq.heappop(self._heap)
            self.now = event.fire_time
            if self.trace is not None:
                self.trace.append((self.now, event.tag))
            event.action()

    def pending(self) -> int:
        return len(self._heap)


class Network:
    """Broadcast fabric over point-to-point links.

    Per-pair links override the default; the default models the slowest
    channel. Self-delivery is immediate. Muted nodes (silent fault model)
    produce zero deliveries.
    """

    def __init__(self, scheduler: Scheduler, default_link: LinkModel,
                 links: Optional[dict] = None, jitter: float = 0.0,
                 rng: Optional[random.Random] = None):
        self.scheduler = scheduler
        self.default_link = default_link
        self.links = dict(links or {})
        self.jitter = jitter
        self.rng = rng or random.Random(0)
        self._nodes: dict[int, Callable] = {}
        self._muted: set[int] = set()

    def add_node(self, node_id: int, deliver: Callable) -> None:
        self._nodes[node_id] = deliver

    def mute(self, node_id: int) -> None:
        self._muted.add(node_id)

    def node_ids(self):
        return list(self._nodes)

    def link(self, sender: int, recipient: int) -> LinkModel:
        return self.links.get((sender, recipient), self.default_link)

    def send(self, sender: int, recipient: int, message, wire_size: int) -> None:
        if recipient not in self._nodes:
            raise UnknownNode(str(recipient))
        if sender in self._muted:
            return
        if sender == recipient:
            delay = 0.0
        else:
            delay = self.link(sender, recipient).transmission_delay(wire_size)
            if self.jitter > 0:
                delay += self.rng.uniform(0.0, self.jitter)
        deliver = self._nodes[recipient]
        self.scheduler.schedule(delay, lambda: deliver(message),
                                tag=f"deliver:{sender}->{recipient}")

    def broadcast(self, sender: int, message, wire_size: int) -> None:
        if sender not in self._nodes and sender >= 0:
            raise UnknownNode(str(sender))
        for recipient in self._nodes:
            self.send(sender, recipient, message, wire_size)

    def inject(self, message, wire_size: int) -> None:
        """Deliver a message from outside the validator set (e.g. a client)."""
        for recipient in self._nodes:
            delay = self.default_link.transmission_delay(wire_size)
            if self.jitter > 0:
                delay += self.rng.uniform(0.0, self.jitter)
            deliver = self._nodes[recipient]
            self.scheduler.schedule(delay, lambda d=deliver: d(message),
                                    tag=f"deliver:client->{recipient}")
