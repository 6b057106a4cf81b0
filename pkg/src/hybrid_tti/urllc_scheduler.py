"""Mini-slot URLLC scheduling: proportional-fair RB metrics and greedy preemption."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError


def update_history(s_prev, r, eta: float, t: int):
    """Exponentially averaged successful throughput; zero at the first slot."""
    if not 0 < eta < 1:
        raise ConfigError(f"aging factor must lie in (0, 1), got {eta!r}")
    s_prev = np.asarray(s_prev, dtype=float)
    out = np.zeros_like(s_prev) if t == 0 else (1.0 - eta) * s_prev + eta * np.asarray(r, dtype=float)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RbMetricTable:
    """Per-slot PF metric of every RB and the ascending metric order.

    ``rank_of[j]`` is the RB at sorted position ``j``; ``position[k]`` is the
    inverse (sorted position of RB ``k``).
    """

    owner: np.ndarray
    metric: np.ndarray
    rank_of: np.ndarray

    @property
    def n_rb(self) -> int:
        return len(self.metric)

    @property
    def position(self) -> np.ndarray:
        pos = np.empty_like(self.rank_of)
        pos[self.rank_of] = np.arange(len(self.rank_of))
        return pos


def rank_metrics(metric) -> np.ndarray:
    # stable sort: equal metrics keep ascending RB index
    return np.argsort(np.asarray(metric, dtype=float), kind="stable")


def compute_metrics(gamma, owner, s_hist, s_min: float | None = None) -> RbMetricTable:
    """Metric of RB k: log2(1 + SNR of its owner on k) / owner's history.

    ``gamma`` is the ``(n_users, n_rb)`` SNR matrix. ``s_min`` floors the
    history; without it a zero history is an error.
    """
    gamma = np.asarray(gamma, dtype=float)
    owner = np.asarray(owner, dtype=np.int64)
    s = np.asarray(s_hist, dtype=float)
    if s_min is not None:
        s = np.maximum(s, s_min)
    elif np.any(s <= 0):
        raise ZeroDivisionError("zero throughput history; pass s_min to floor it")
    cols = np.arange(gamma.shape[1])
    metric = np.log2(1.0 + gamma[owner, cols]) / s[owner]
    return RbMetricTable(owner=owner, metric=metric, rank_of=rank_metrics(metric))


@dataclass(frozen=True)
class SchedulerState:
    """Policy input: slot-level metrics plus the current queue length."""

    x: RbMetricTable
    z: int

    def as_vector(self) -> np.ndarray:
        return np.append(self.x.metric, float(self.z))


@dataclass(frozen=True)
class PreemptDecision:
    alpha: np.ndarray

    @property
    def n_preempted(self) -> int:
        return int(self.alpha.sum())


def preempt(state: SchedulerState, table: RbMetricTable | None = None,
            n_s: int | None = None) -> tuple[PreemptDecision, int]:
    """Best-effort greedy policy: serve min(L, n_s) packets on the lowest-metric RBs."""
    table = state.x if table is None else table
    n_s = table.n_rb if n_s is None else n_s
    d = min(int(state.z), n_s, table.n_rb)
    alpha = np.zeros(table.n_rb, dtype=np.int8)
    alpha[table.rank_of[:d]] = 1
    return PreemptDecision(alpha), d
