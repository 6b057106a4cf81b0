"""URLLC traffic generation and the base-station FIFO queue."""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .config import ConfigError


def sample_arrivals(rng: np.random.Generator, lam: float, size=None):
    """Number of URLLC packets generated in a mini-slot, Poisson(lam).

    numpy's Poisson sampler is exact for small means (no normal approximation).
    """
    if not (isinstance(lam, (int, float, np.floating)) and math.isfinite(lam) and lam >= 0):
        raise ConfigError(f"arrival rate must be finite and >= 0, got {lam!r}")
    if lam == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    out = rng.poisson(lam, size=size)
    return int(out) if size is None else out.astype(np.int64)


class UrllcQueue:
    """FIFO of pending URLLC packets, each one sub-band by one mini-slot.

    Packets are stored as their arrival mini-slot index. Same-index arrivals are
    kept in arrival order, so removal order always equals arrival order.
    """

    def __init__(self, timestamps=()):
        self._pending: deque[int] = deque()
        for ts in timestamps:
            self._push(int(ts))

    def _push(self, ts: int) -> None:
        if self._pending and ts < self._pending[-1]:
            raise ValueError(f"timestamp {ts} older than queue tail {self._pending[-1]}")
        self._pending.append(ts)

    def __len__(self) -> int:
        return len(self._pending)

    @property
    def length(self) -> int:
        return len(self._pending)

    @property
    def pending(self) -> tuple[int, ...]:
        return tuple(self._pending)

    def copy(self) -> "UrllcQueue":
        q = UrllcQueue()
        q._pending = deque(self._pending)
        return q

    def dequeue_best_effort(self, n_s: int, tau: int) -> tuple[int, list[int]]:
        """Serve ``min(L, n_s)`` oldest packets at mini-slot ``tau``.

        Returns the number served and each served packet's queueing delay in
        mini-slots, in removal order.
        """
        d = min(len(self._pending), n_s)
        popleft = self._pending.popleft
        waits = [tau - popleft() for _ in range(d)]
        return d, waits

    def step(self, g: int, tau: int) -> "UrllcQueue":
        """Append ``g`` packets generated during mini-slot ``tau``."""
        if g < 0:
            raise ValueError(f"arrival count must be >= 0, got {g}")
        if g:
            if self._pending and tau < self._pending[-1]:
                raise ValueError(f"timestamp {tau} older than queue tail {self._pending[-1]}")
            self._pending.extend([tau] * g)
        return self


def next_queue_length(length: int, g: int, n_s: int) -> int:
    """Best-effort queue recursion ``L' = max(L - n_s, 0) + G``."""
    return max(length - n_s, 0) + g
