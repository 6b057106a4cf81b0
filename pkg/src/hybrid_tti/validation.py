"""Model invariant checks over traced simulation runs and predictor output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .engine import METHODS, InvariantError, run_cell
from .predictor import NORM_TOL, Pmf, departure_pmfs, poisson_pmf, queue_pmfs, rank_preemption_pmfs
from .urllc_scheduler import RbMetricTable, SchedulerState, preempt, rank_metrics


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}" + (f": {self.detail}" if self.detail else "")


def _sorted_lowest(metric: np.ndarray, d: int) -> set:
    order = sorted(range(len(metric)), key=lambda k: (metric[k], k))
    return set(order[:d])


class _TraceAudit:
    """Collects per-mini-slot invariant violations from slot records."""

    def __init__(self, n_s: int):
        self.n_s = n_s
        self.steps = 0
        self.violations: dict[str, int] = {}
        self._next_len = None

    def _fail(self, key: str):
        self.violations[key] = self.violations.get(key, 0) + 1

    def __call__(self, rec):
        for tr in rec.trace:
            self.steps += 1
            if self._next_len is not None and tr.queue_len != self._next_len:
                self._fail("queue recursion")
            self._next_len = max(tr.queue_len - self.n_s, 0) + tr.arrivals
            if tr.served != min(tr.queue_len, self.n_s):
                self._fail("best-effort service")
            if int(tr.alpha.sum()) != tr.preempted:
                self._fail("sum(alpha) = preempted")
            if tr.embb_units + tr.served + tr.idle_reserved != self.n_s:
                self._fail("resource conservation")
            if len(tr.metric):
                hit = set(np.flatnonzero(tr.alpha))
                if hit != _sorted_lowest(tr.metric, tr.preempted):
                    self._fail("preempted set = lowest metrics")
                table = RbMetricTable(np.zeros(len(tr.metric), dtype=int), tr.metric * 0.5,
                                      rank_metrics(tr.metric * 0.5))
                scaled, _ = preempt(SchedulerState(table, tr.preempted), table, self.n_s)
                if not np.array_equal(scaled.alpha, tr.alpha):
                    self._fail("metric scale invariance")


def check_simulation(cfg: SystemConfig, lambdas=(0.5, 1.5, 2.5), methods=METHODS) -> list[Check]:
    checks = []
    for lam in lambdas:
        for method in methods:
            audit = _TraceAudit(cfg.n_s)
            name = f"trace invariants lambda={lam} {method}"
            try:
                run_cell(cfg.replace(lam=lam), method, record_hook=audit, trace=True)
            except InvariantError as exc:
                checks.append(Check(name, False, f"engine raised: {exc}"))
                continue
            detail = ", ".join(f"{k} x{v}" for k, v in audit.violations.items())
            checks.append(Check(name, not audit.violations, detail or f"{audit.steps} mini-slots"))
    return checks


def check_predictor(cfg: SystemConfig, lambdas=(0.0, 0.5, 1.5, 2.5), l0s=(0, 3, 30)) -> list[Check]:
    worst_norm, dominance_ok = 0.0, True
    for lam in lambdas:
        worst_norm = max(worst_norm, abs(poisson_pmf(lam, cfg.tail_eps).total() - 1))
        for l0 in l0s:
            for p in queue_pmfs(l0, lam, cfg.n_s, cfg.m, cfg.tail_eps):
                worst_norm = max(worst_norm, abs(p.total() - 1))
            for q in departure_pmfs(l0, lam, cfg.n_s, cfg.m, cfg.tail_eps):
                worst_norm = max(worst_norm, abs(q.total() - 1))
            pmfs = rank_preemption_pmfs(l0, lam, cfg.n_s, cfg.m, cfg.tail_eps)
            worst_norm = max(worst_norm, float(np.abs(pmfs.sum(axis=1) - 1).max()))
            ccdf = np.array([Pmf(row).tail() for row in pmfs])
            dominance_ok &= bool(np.all(ccdf[:-1] >= ccdf[1:] - 1e-12))
    return [
        Check("pmf normalization", worst_norm <= NORM_TOL, f"max |sum-1| = {worst_norm:.2e}"),
        Check("stochastic dominance Y[k] over Y[k+1]", dominance_ok),
    ]


def run_all(cfg: SystemConfig, n_slots: int = 2000) -> list[Check]:
    cfg = cfg.replace(n_slots=n_slots)
    return check_predictor(cfg) + check_simulation(cfg)
