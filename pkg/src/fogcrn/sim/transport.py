"""Lossy, fixed-latency message transport between simulation actors."""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

from ..errors import InvalidArgumentError


@dataclass(frozen=True)
class Envelope:
    src: str
    dst: str
    payload: bytes
    sent_tick: int
    deliver_tick: int


class Transport:
    """Messages travel as bytes (by value) and arrive ``latency`` ticks later.

    Each message is dropped independently with ``drop_prob`` at send time;
    survivors are delivered exactly once. Delivery order is send order, so
    every (src, dst) pair is FIFO.
    """

    def __init__(self, latency: int, drop_prob: float, rng):
        if latency < 0:
            raise InvalidArgumentError("latency must be >= 0")
        if not 0.0 <= drop_prob < 1.0:
            raise InvalidArgumentError("drop_prob must lie in [0, 1)")
        self.latency = int(latency)
        self.drop_prob = float(drop_prob)
        self.rng = rng
        self._queue = []
        self._seq = itertools.count()
        self.sent = self.delivered = self.dropped = 0
        self.bytes_sent = 0

    def send(self, src: str, dst: str, payload: bytes, tick: int) -> bool:
        """Queue ``payload``; returns False if the message was lost."""
        self.sent += 1
        self.bytes_sent += len(payload)
        # always draw so the stream position depends only on the message count
        lost = self.rng.random() < self.drop_prob
        if lost:
            self.dropped += 1
            return False
        env = Envelope(src, dst, bytes(payload), tick, tick + self.latency)
        heapq.heappush(self._queue, (env.deliver_tick, next(self._seq), env))
        return True

    def deliver(self, tick: int) -> list:
        """Pop every envelope due at or before ``tick``, oldest first."""
        out = []
        while self._queue and self._queue[0][0] <= tick:
            out.append(heapq.heappop(self._queue)[2])
        self.delivered += len(out)
        return out

    @property
    def in_flight(self) -> int:
        return len(self._queue)

    def conserved(self) -> bool:
        return self.delivered + self.dropped + self.in_flight == self.sent
