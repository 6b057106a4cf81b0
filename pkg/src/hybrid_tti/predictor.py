"""Exact finite-horizon analysis of the best-effort URLLC queue chain.

Given the queue length observed at a slot boundary, these routines give the
distribution of the queue length and of the number of packets served in each
mini-slot of the slot, and of how many mini-slots each metric rank (or set of
ranks) gets preempted. The chain is

    L' = max(L - n_s, 0) + G,   D = min(L, n_s),   G ~ Poisson(lam).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

NORM_TOL = 1e-9


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on 0..support_max."""

    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.ndim != 1 or len(mass) == 0:
            raise ValueError("pmf mass must be a non-empty vector")
        if np.any(mass < 0):
            raise ValueError("pmf mass must be non-negative")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @property
    def support_max(self) -> int:
        return len(self.mass) - 1

    def __getitem__(self, n: int) -> float:
        return float(self.mass[n]) if 0 <= n < len(self.mass) else 0.0

    def total(self) -> float:
        return float(self.mass.sum())

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.mass)), self.mass))

    def tail(self) -> np.ndarray:
        """``tail()[y] = P(X > y)``, summed from the top for accuracy."""
        rev = np.cumsum(self.mass[::-1])[::-1]
        return np.append(rev[1:], 0.0)

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(max(length, len(self.mass)))
        out[: len(self.mass)] = self.mass
        return out

    @classmethod
    def point(cls, n: int) -> "Pmf":
        if n < 0:
            raise ValueError("point mass location must be >= 0")
        mass = np.zeros(n + 1)
        mass[n] = 1.0
        return cls(mass)


def _normalized(mass) -> Pmf:
    mass = np.asarray(mass, dtype=float)
    return Pmf(mass / mass.sum())


@lru_cache(maxsize=256)
def _poisson_cached(lam: float, tail_eps: float) -> Pmf:
    if lam == 0:
        return Pmf.point(0)
    n_max = int(np.ceil(lam))
    while stats.poisson.sf(n_max, lam) >= tail_eps:
        n_max += 1
    return _normalized(stats.poisson.pmf(np.arange(n_max + 1), lam))


def poisson_pmf(lam: float, tail_eps: float = 1e-12) -> Pmf:
    """Poisson(lam) truncated at the first N with P(G > N) < tail_eps, renormalized."""
    if not lam >= 0 or not np.isfinite(lam):
        raise ValueError(f"arrival rate must be finite and >= 0, got {lam!r}")
    if not 0 < tail_eps <= 1e-6:
        raise ValueError(f"tail_eps must lie in (0, 1e-6], got {tail_eps!r}")
    return _poisson_cached(float(lam), float(tail_eps))


def init_pmf_known(l0: int) -> Pmf:
    """Queue length observed at the slot boundary."""
    return Pmf.point(int(l0))


def advance_queue_pmf(p: Pmf, a: Pmf, n_s: int) -> Pmf:
    """One mini-slot of the chain: distribution of max(L - n_s, 0) + G."""
    mass = p.mass
    residual = np.zeros(max(len(mass) - n_s, 1))
    residual[0] = mass[: n_s + 1].sum()
    residual[1:] = mass[n_s + 1:]
    return Pmf(np.convolve(residual, a.mass))


def departure_pmf(p: Pmf, n_s: int) -> Pmf:
    """Distribution of packets served, D = min(L, n_s), on 0..n_s."""
    q = np.zeros(n_s + 1)
    head = p.mass[:n_s]
    q[: len(head)] = head
    q[n_s] = p.mass[n_s:].sum()
    return Pmf(q)


def queue_pmfs(l0: int, lam: float, n_s: int, m: int, tail_eps: float = 1e-12) -> list[Pmf]:
    """Queue-length pmfs for the m mini-slots of a slot starting at length l0."""
    a = poisson_pmf(lam, tail_eps)
    p = init_pmf_known(l0)
    out = [p]
    for _ in range(m - 1):
        p = advance_queue_pmf(p, a, n_s)
        out.append(p)
    return out


def departure_pmfs(l0: int, lam: float, n_s: int, m: int, tail_eps: float = 1e-12) -> list[Pmf]:
    return [departure_pmf(p, n_s) for p in queue_pmfs(l0, lam, n_s, m, tail_eps)]


def rankset_preemption_pmf(l0: int, lam: float, n_s: int, m: int, ranks,
                           tail_eps: float = 1e-12) -> Pmf:
    """Pmf of the total preemption count of a set of metric ranks over one slot.

    Each mini-slot serves D packets on ranks 0..D-1, so the set collects
    ``|{k in ranks : k < D}|`` preempted units. Forward DP over the joint
    (queue length, accumulated count) state, starting from the observed l0.
    For a single rank this is the number of mini-slots that rank is preempted.
    """
    ranks = tuple(sorted({int(k) for k in ranks}))
    if not ranks:
        raise ValueError("rank set must be non-empty")
    if ranks[0] < 0 or ranks[-1] >= n_s:
        raise ValueError(f"ranks must lie in 0..{n_s - 1}")
    if m < 1:
        raise ValueError("m must be >= 1")
    return _rankset_cached(int(l0), float(lam), int(n_s), int(m), ranks, float(tail_eps))


@lru_cache(maxsize=4096)
def _rankset_cached(l0, lam, n_s, m, ranks, tail_eps) -> Pmf:
    a = poisson_pmf(lam, tail_eps).mass
    n_max = len(a) - 1
    l_max = l0 + m * n_max
    n_count = m * len(ranks) + 1

    lengths = np.arange(l_max + 1)
    served = np.minimum(lengths, n_s)
    gained = np.searchsorted(np.asarray(ranks), served, side="left")
    left = np.maximum(lengths - n_s, 0)

    joint = np.zeros((l_max + 1, n_count))
    joint[l0, 0] = 1.0
    for step in range(m):
        # serve this mini-slot: move count by the ranks hit, shrink queue
        after = np.zeros_like(joint)
        for length in np.flatnonzero(joint.any(axis=1)):
            g = gained[length]
            after[left[length], g:] += joint[length, : n_count - g]
        if step == m - 1:
            joint = after
            break
        # arrivals of this mini-slot join the queue for the next one
        joint = np.zeros_like(after)
        rows = l_max + 1
        for n, a_n in enumerate(a):
            if n >= rows:
                break
            joint[n:] += a_n * after[: rows - n]
    return _normalized(joint.sum(axis=0))


def rank_preemption_pmfs(l0: int, lam: float, n_s: int, m: int,
                         tail_eps: float = 1e-12) -> np.ndarray:
    """Per-rank preemption-count pmfs as an ``(n_s, m + 1)`` array."""
    return np.vstack([
        rankset_preemption_pmf(l0, lam, n_s, m, (k,), tail_eps).mass for k in range(n_s)
    ])


def expected_preemptions_by_recursion(l0: int, lam: float, n_s: int, m: int,
                                      tail_eps: float = 1e-12) -> np.ndarray:
    """E[Y_k] = sum over mini-slots of P(D > k), via the queue-length recursion."""
    out = np.zeros(n_s)
    for q in departure_pmfs(l0, lam, n_s, m, tail_eps):
        out += q.tail()[:n_s]
    return out
