"""Comparison schedulers: static separate bands and known-arrival pre-puncturing."""

from __future__ import annotations

import math

import numpy as np

from .urllc_queue import UrllcQueue


def separate_bands_reserve(lam: float, n_s: int) -> int:
    """Sub-bands reserved so that per-mini-slot service covers the mean demand."""
    if lam < 0:
        raise ValueError(f"arrival rate must be >= 0, got {lam!r}")
    return min(int(math.ceil(lam)), n_s)


def reserved_bands(n_s: int, n_r: int) -> np.ndarray:
    """Fixed URLLC band set: the top n_r sub-band indices."""
    return np.arange(n_s - n_r, n_s)


def split_service(d: int, n_r: int) -> tuple[int, int, int]:
    """Split d served packets into (on reserved bands, overflow onto eMBB, idle reserved)."""
    on_reserved = min(d, n_r)
    return on_reserved, d - on_reserved, n_r - on_reserved


def known_departures(queue: UrllcQueue, arrivals, n_s: int) -> np.ndarray:
    """Replay best-effort service over a slot with the arrivals known in advance."""
    length = len(queue)
    out = np.empty(len(arrivals), dtype=np.int64)
    for j, g in enumerate(arrivals):
        d = min(length, n_s)
        out[j] = d
        length = length - d + int(g)
    return out


def rank_hits(departures, n_rank: int) -> np.ndarray:
    """Times each sorted position is preempted when position k is hit iff D > k."""
    departures = np.asarray(departures)
    return (departures[:, None] > np.arange(n_rank)[None, :]).sum(axis=0)


def oracle_rb_units(departures, rank_of: np.ndarray) -> np.ndarray:
    """Exact per-RB preemption counts under the greedy policy for a known trace."""
    hits = rank_hits(departures, len(rank_of))
    units = np.empty(len(rank_of), dtype=np.int64)
    units[rank_of] = hits
    return units
