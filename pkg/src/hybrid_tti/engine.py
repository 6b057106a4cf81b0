"""Two-timescale simulation loop, per-cell metrics and lambda sweeps."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from .channel import ChannelState, rb_capacity_bits, sample_slot_channel
from .config import ConfigError, SystemConfig
from .embb_scheduler import (SlotBlocks, account_slot, allocate_rbs, decode_success, group_blocks,
                             predicted_bler, select_redundancy_units)
from .predictor import Pmf, rank_preemption_pmfs, rankset_preemption_pmf
from .reference import (known_departures, oracle_rb_units, separate_bands_reserve, split_service)
from .urllc_queue import UrllcQueue, next_queue_length, sample_arrivals
from .urllc_scheduler import SchedulerState, compute_metrics, preempt, update_history

log = logging.getLogger(__name__)

METHODS = ("proposed", "baseline", "oracle")
ARRIVALS, CHANNEL = 0, 1

RESULT_COLUMNS = ("lambda", "method", "seed", "throughput_bits", "throughput_bps",
                  "bler_aggregate", "bler_max_user", "urllc_mean_wait", "urllc_p95_wait",
                  "mean_queue_len")
PATTERN_COLUMNS = ("lambda", "rank", "y", "predicted", "empirical")


class InvariantError(AssertionError):
    """A simulated step broke a model invariant."""


@dataclass
class SimState:
    queue: UrllcQueue
    s_hist: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, cfg: SystemConfig) -> "SimState":
        return cls(queue=UrllcQueue(), s_hist=np.zeros(cfg.n_e))


@dataclass
class MiniSlotTrace:
    tau: int
    queue_len: int
    arrivals: int
    served: int
    preempted: int
    embb_units: int
    idle_reserved: int
    alpha: np.ndarray
    metric: np.ndarray


@dataclass
class SlotRecord:
    t: int
    l0: int
    bits: np.ndarray
    attempts: np.ndarray
    errors: np.ndarray
    waits: list
    queue_lens: list
    rank_units: Optional[np.ndarray] = None  # preemptions per sorted position
    blocks: Optional[SlotBlocks] = None
    trace: list = field(default_factory=list)


@lru_cache(maxsize=1024)
def rank_redundancy(l0: int, lam: float, n_s: int, m: int, epsilon: float, theta_max: float,
                    mu: float, tail_eps: float):
    """Per-rank redundancy units, feasibility and predicted BLER for one-RB blocks."""
    pmfs = rank_preemption_pmfs(l0, lam, n_s, m, tail_eps)
    units = np.empty(n_s, dtype=np.int64)
    feasible = np.empty(n_s, dtype=bool)
    bler = np.empty(n_s)
    for k in range(n_s):
        pmf = Pmf(pmfs[k])
        units[k], feasible[k] = select_redundancy_units(pmf, epsilon, m, theta_max)
        bler[k] = predicted_bler(pmf, units[k] / m, mu, m)
    for arr in (units, feasible, bler, pmfs):
        arr.setflags(write=False)
    return units, feasible, bler, pmfs


def _plan_proposed(cfg, l0, table, members, units_total):
    position = table.position
    if cfg.block_mode == "rb":
        units, _, bler, _ = rank_redundancy(l0, cfg.lam, cfg.n_s, cfg.m, cfg.epsilon,
                                            cfg.theta_max, cfg.mu, cfg.tail_eps)
        pos = position[np.concatenate(members)]
        return units[pos].copy(), bler[pos].copy()
    theta_units = np.empty(len(members), dtype=np.int64)
    bler = np.empty(len(members))
    for j, rbs in enumerate(members):
        pmf = rankset_preemption_pmf(l0, cfg.lam, cfg.n_s, cfg.m, position[rbs], cfg.tail_eps)
        theta_units[j], _ = select_redundancy_units(pmf, cfg.epsilon, int(units_total[j]),
                                                    cfg.theta_max)
        bler[j] = predicted_bler(pmf, theta_units[j] / units_total[j], cfg.mu, int(units_total[j]))
    return theta_units, bler


def run_slot(method: str, state: SimState, cfg: SystemConfig, arrivals_rng: np.random.Generator,
             channel_rng: np.random.Generator, trace: bool = False,
             channel: Optional[ChannelState] = None,
             arrivals: Optional[np.ndarray] = None) -> tuple[SlotRecord, SimState]:
    """Simulate one slot: slot-level eMBB configuration, then m URLLC mini-slots.

    Both random streams are consumed identically by every method so that
    paired runs see the same channels and arrivals.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    n_s, m = cfg.n_s, cfg.m
    if channel is None:
        channel = sample_slot_channel(channel_rng, cfg.n_e, n_s, cfg.user_mean_snr_db(), cfg.fading)
    if arrivals is None:
        arrivals = sample_arrivals(arrivals_rng, cfg.lam, size=m)
    queue = state.queue
    l0 = len(queue)

    n_r = separate_bands_reserve(cfg.lam, n_s) if method == "baseline" else 0
    embb_rbs = np.arange(n_s - n_r)
    n_embb = len(embb_rbs)

    rank_units = None
    if n_embb:
        gamma = channel.gamma[:, embb_rbs]
        owner = allocate_rbs(gamma, state.s_hist, cfg.s_min)
        table = compute_metrics(gamma, owner, state.s_hist, cfg.s_min)
        capacity = rb_capacity_bits(gamma[owner, np.arange(n_embb)], cfg.n_ss, cfg.t_s,
                                    cfg.bits_per_symbol_cap)
        b_owner, b_cap, b_units, rb_block, members = group_blocks(
            owner, embb_rbs, capacity, m, n_s, cfg.block_mode)
        if method == "proposed":
            theta_units, bler = _plan_proposed(cfg, l0, table, members, b_units)
        elif method == "oracle":
            departures = known_departures(queue, arrivals, n_s)
            rb_units = oracle_rb_units(departures, table.rank_of)
            theta_units = np.array([rb_units[g].sum() for g in members], dtype=np.int64)
            bler = np.zeros(len(members))
        else:
            theta_units = np.zeros(len(members), dtype=np.int64)
            bler = np.zeros(len(members))
        blocks = SlotBlocks(b_owner, b_cap, theta_units, b_units, bler, rb_block)
        rank_units = np.zeros(n_embb, dtype=np.int64)
    else:
        table, blocks = None, None

    rb_units = np.zeros(n_s, dtype=np.int64)
    waits: list = []
    queue_lens: list = []
    traces: list = []
    for j in range(m):
        tau = state.t * m + j
        length = len(queue)
        queue_lens.append(length)
        served, w = queue.dequeue_best_effort(n_s, tau)
        waits.extend(w)
        _, overflow, idle = split_service(served, n_r)
        if table is not None:
            decision, hit = preempt(SchedulerState(table, overflow if n_r else length), table, n_s)
            if hit != overflow:
                raise InvariantError(f"preempted {hit} RBs but {overflow} packets overflowed")
            rb_units[embb_rbs] += decision.alpha
            rank_units[:hit] += 1
        elif overflow:
            raise InvariantError("overflow with no eMBB RBs")
        queue.step(int(arrivals[j]), tau)
        if len(queue) != next_queue_length(length, int(arrivals[j]), n_s):
            raise InvariantError("queue recursion violated")
        if trace:
            embb_units = n_embb - overflow
            if embb_units + served + idle != n_s:
                raise InvariantError("resource conservation violated")
            traces.append(MiniSlotTrace(
                tau=tau, queue_len=length, arrivals=int(arrivals[j]), served=served,
                preempted=overflow, embb_units=embb_units, idle_reserved=idle,
                alpha=decision.alpha if table is not None else np.zeros(0, dtype=np.int8),
                metric=table.metric if table is not None else np.zeros(0)))

    if blocks is not None:
        outcomes = decode_success(blocks.theta_units, blocks.preempted_units(rb_units))
        bits, attempts, errors = account_slot(blocks, outcomes, cfg.n_e)
    else:
        bits = np.zeros(cfg.n_e)
        attempts = np.zeros(cfg.n_e, dtype=np.int64)
        errors = np.zeros(cfg.n_e, dtype=np.int64)

    new_hist = update_history(state.s_hist, bits, cfg.eta, state.t)
    record = SlotRecord(t=state.t, l0=l0, bits=bits, attempts=attempts, errors=errors,
                        waits=waits, queue_lens=queue_lens, rank_units=rank_units,
                        blocks=blocks, trace=traces)
    return record, SimState(queue=queue, s_hist=new_hist, t=state.t + 1)


def proposed_slot(state, cfg, arrivals_rng, channel_rng, **kw):
    return run_slot("proposed", state, cfg, arrivals_rng, channel_rng, **kw)


def separate_bands_slot(state, cfg, arrivals_rng, channel_rng, **kw):
    return run_slot("baseline", state, cfg, arrivals_rng, channel_rng, **kw)


def oracle_slot(state, cfg, arrivals_rng, channel_rng, **kw):
    return run_slot("oracle", state, cfg, arrivals_rng, channel_rng, **kw)


def stream_seed(seed: int, lam: float, purpose: int) -> np.random.SeedSequence:
    """Sub-stream keyed by (root seed, lambda, purpose); shared by all methods."""
    return np.random.SeedSequence(seed, spawn_key=(int(round(lam * 1_000_000)), purpose))


def make_streams(seed: int, lam: float) -> tuple[np.random.Generator, np.random.Generator]:
    return (np.random.default_rng(stream_seed(seed, lam, ARRIVALS)),
            np.random.default_rng(stream_seed(seed, lam, CHANNEL)))


@dataclass
class CellResult:
    lam: float
    method: str
    seed: int
    n_slots: int
    slot_duration_s: float
    bits: np.ndarray
    attempts: np.ndarray
    errors: np.ndarray
    wait_hist: np.ndarray
    queue_len_sum: int
    n_minislots: int
    rank_hist: Optional[np.ndarray] = None      # (n_rank, m + 1) empirical counts
    rank_predicted: Optional[np.ndarray] = None  # (n_rank, m + 1) summed predicted pmfs

    @property
    def throughput_bits(self) -> float:
        return float(self.bits.sum())

    @property
    def throughput_bps(self) -> float:
        return self.throughput_bits / (self.n_slots * self.slot_duration_s)

    @property
    def bler_aggregate(self) -> float:
        n = self.attempts.sum()
        return float(self.errors.sum() / n) if n else 0.0

    @property
    def bler_per_user(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.attempts > 0, self.errors / np.maximum(self.attempts, 1), 0.0)

    @property
    def bler_max_user(self) -> float:
        return float(self.bler_per_user.max()) if len(self.attempts) else 0.0

    @property
    def urllc_mean_wait(self) -> float:
        n = self.wait_hist.sum()
        return float(np.dot(np.arange(len(self.wait_hist)), self.wait_hist) / n) if n else 0.0

    @property
    def urllc_p95_wait(self) -> float:
        n = self.wait_hist.sum()
        if not n:
            return 0.0
        # smallest wait w with P(W <= w) >= 0.95
        return float(np.searchsorted(np.cumsum(self.wait_hist), 0.95 * n, side="left"))

    @property
    def mean_queue_len(self) -> float:
        return self.queue_len_sum / self.n_minislots if self.n_minislots else 0.0

    def row(self) -> dict:
        return {
            "lambda": self.lam, "method": self.method, "seed": self.seed,
            "throughput_bits": self.throughput_bits, "throughput_bps": self.throughput_bps,
            "bler_aggregate": self.bler_aggregate, "bler_max_user": self.bler_max_user,
            "urllc_mean_wait": self.urllc_mean_wait, "urllc_p95_wait": self.urllc_p95_wait,
            "mean_queue_len": self.mean_queue_len,
        }


def run_cell(cfg: SystemConfig, method: str, record_hook: Optional[Callable] = None,
             trace: bool = False) -> CellResult:
    """Run ``cfg.n_slots`` slots of one method at ``cfg.lam``."""
    arrivals_rng, channel_rng = make_streams(cfg.seed, cfg.lam)
    state = SimState.initial(cfg)
    bits = np.zeros(cfg.n_e)
    attempts = np.zeros(cfg.n_e, dtype=np.int64)
    errors = np.zeros(cfg.n_e, dtype=np.int64)
    waits: list = []
    queue_len_sum = 0
    track_ranks = method == "proposed" and cfg.block_mode == "rb"
    rank_hist = np.zeros((cfg.n_s, cfg.m + 1), dtype=np.int64) if track_ranks else None
    rank_pred = np.zeros((cfg.n_s, cfg.m + 1)) if track_ranks else None
    rows = np.arange(cfg.n_s)
    for _ in range(cfg.n_slots):
        rec, state = run_slot(method, state, cfg, arrivals_rng, channel_rng, trace=trace)
        bits += rec.bits
        attempts += rec.attempts
        errors += rec.errors
        waits.extend(rec.waits)
        queue_len_sum += sum(rec.queue_lens)
        if track_ranks:
            rank_hist[rows, rec.rank_units] += 1
            rank_pred += rank_redundancy(rec.l0, cfg.lam, cfg.n_s, cfg.m, cfg.epsilon,
                                         cfg.theta_max, cfg.mu, cfg.tail_eps)[3]
        if record_hook is not None:
            record_hook(rec)
    wait_hist = np.bincount(np.asarray(waits, dtype=np.int64), minlength=1)
    return CellResult(lam=cfg.lam, method=method, seed=cfg.seed, n_slots=cfg.n_slots,
                      slot_duration_s=cfg.slot_duration_s, bits=bits, attempts=attempts,
                      errors=errors, wait_hist=wait_hist, queue_len_sum=queue_len_sum,
                      n_minislots=cfg.n_slots * cfg.m, rank_hist=rank_hist,
                      rank_predicted=rank_pred)


def lambda_grid(lo: float = 0.0, hi: float = 2.5, step: float = 0.125) -> list[float]:
    if step <= 0 or hi < lo:
        raise ConfigError("lambda grid needs step > 0 and hi >= lo")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 10) for i in range(n)]


def run_sweep(cfg: SystemConfig, lambdas: Iterable[float], methods: Iterable[str],
              progress: Optional[Callable[[CellResult], None]] = None) -> list[CellResult]:
    """Every (lambda, method) cell, paired on seeds across methods."""
    lambdas, methods = list(lambdas), list(methods)
    if not lambdas or not methods:
        raise ConfigError("need at least one lambda and one method")
    for mth in methods:
        if mth not in METHODS:
            raise ConfigError(f"unknown method {mth!r}")
    results = []
    for lam in lambdas:
        for mth in methods:
            res = run_cell(cfg.replace(lam=float(lam)), mth)
            log.info("lambda=%.3f %-8s thr=%.4g bps bler=%.4f", lam, mth,
                     res.throughput_bps, res.bler_aggregate)
            results.append(res)
            if progress is not None:
                progress(res)
    return results


def write_results(results: list[CellResult], out_dir: str | Path, stem: str = "results") -> tuple[Path, Path]:
    """Write the metrics CSV and the per-rank predicted-vs-empirical pattern CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / f"{stem}.csv"
    with metrics_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for res in results:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in res.row().items()})
    pattern_path = out / f"{stem}_preemption_pattern.csv"
    with pattern_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PATTERN_COLUMNS)
        for res in results:
            if res.rank_hist is None:
                continue
            emp = res.rank_hist / res.n_slots
            pred = res.rank_predicted / res.n_slots
            for k in range(emp.shape[0]):
                for y in range(emp.shape[1]):
                    writer.writerow([repr(res.lam), k, y, repr(float(pred[k, y])), repr(float(emp[k, y]))])
    return metrics_path, pattern_path
