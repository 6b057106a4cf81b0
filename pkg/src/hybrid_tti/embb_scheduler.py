"""Slot-level eMBB scheduling: RB allocation, redundancy selection, decoding, accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .predictor import Pmf


def allocate_rbs(gamma, s_hist, s_min: float | None = None) -> np.ndarray:
    """Give each RB to the user maximizing log2(1 + SNR) / history.

    np.argmax returns the first maximum, so ties go to the lowest user index.
    """
    s = np.asarray(s_hist, dtype=float)
    if s_min is not None:
        s = np.maximum(s, s_min)
    score = np.log2(1.0 + np.asarray(gamma, dtype=float)) / s[:, None]
    return np.argmax(score, axis=0)


def max_redundancy_units(units_total: int, theta_max: float) -> int:
    # small slack so theta_max = j/units_total maps onto j despite rounding
    return int(math.floor(theta_max * units_total + 1e-9))


def required_units(y_pmf: Pmf, epsilon: float) -> int:
    """Smallest y with P(Y > y) <= epsilon."""
    tail = y_pmf.tail()
    return int(np.flatnonzero(tail <= epsilon)[0])


def select_redundancy_units(y_pmf: Pmf, epsilon: float, units_total: int,
                            theta_max: float = 0.8) -> tuple[int, bool]:
    """Redundancy in preemption units and whether the BLER target is met."""
    if y_pmf.support_max > units_total:
        raise ValueError(f"pmf support exceeds {units_total} units")
    y_star = required_units(y_pmf, epsilon)
    cap = max_redundancy_units(units_total, theta_max)
    if y_star > cap:
        return cap, False
    return y_star, True


def select_redundancy(y_pmf: Pmf, epsilon: float, units_total: int,
                      theta_max: float = 0.8) -> float:
    """Least redundancy fraction whose one-shot failure probability is <= epsilon.

    Capped at ``theta_max``; an infeasible block transmits at the cap.
    """
    units, _ = select_redundancy_units(y_pmf, epsilon, units_total, theta_max)
    return units / units_total


def sigmoid_bler(y, theta: float, mu: float, units_total: int):
    return expit(mu * (np.asarray(y, dtype=float) / units_total - theta))


def predicted_bler(y_pmf: Pmf, theta: float, mu: float, units_total: int) -> float:
    """Sigmoid threshold BLER averaged over the predicted preemption count."""
    y = np.arange(len(y_pmf.mass))
    return float(np.dot(y_pmf.mass, sigmoid_bler(y, theta, mu, units_total)))


@dataclass(frozen=True)
class CodeBlockConfig:
    """One eMBB code block. Redundancy is kept in whole preemption units."""

    owner: int
    rbs: tuple
    capacity_bits: float
    theta_units: int
    units_total: int
    predicted_bler: float = 0.0

    def __post_init__(self):
        if not 0 <= self.theta_units <= self.units_total:
            raise ValueError("theta_units outside 0..units_total")

    @property
    def theta(self) -> float:
        return self.theta_units / self.units_total

    @property
    def info_bits(self) -> float:
        return self.capacity_bits * (self.units_total - self.theta_units) / self.units_total


def decode_success(theta_units, preempted_units):
    """Hard threshold receiver: remaining capacity must cover the info bits.

    ``(1 - u/U) C >= (1 - theta) C`` reduces to ``u <= theta_units``.
    """
    return np.asarray(preempted_units) <= np.asarray(theta_units)


def decode_outcome(block: CodeBlockConfig, preempted_units: int) -> bool:
    if not 0 <= preempted_units <= block.units_total:
        raise ValueError("preempted_units outside 0..units_total")
    return bool(decode_success(block.theta_units, preempted_units))


@dataclass
class SlotBlocks:
    """All code blocks of one slot as parallel arrays.

    ``rb_block[k]`` is the block carried on RB k, or -1 for RBs carrying no
    eMBB data (reserved URLLC bands).
    """

    owner: np.ndarray
    capacity_bits: np.ndarray
    theta_units: np.ndarray
    units_total: np.ndarray
    predicted_bler: np.ndarray
    rb_block: np.ndarray

    @property
    def n_blocks(self) -> int:
        return len(self.owner)

    @property
    def info_bits(self) -> np.ndarray:
        return self.capacity_bits * (self.units_total - self.theta_units) / self.units_total

    def block(self, j: int) -> CodeBlockConfig:
        return CodeBlockConfig(
            owner=int(self.owner[j]),
            rbs=tuple(int(k) for k in np.flatnonzero(self.rb_block == j)),
            capacity_bits=float(self.capacity_bits[j]),
            theta_units=int(self.theta_units[j]),
            units_total=int(self.units_total[j]),
            predicted_bler=float(self.predicted_bler[j]),
        )

    def preempted_units(self, rb_units) -> np.ndarray:
        """Sum per-RB preempted mini-slot counts into per-block counts."""
        rb_units = np.asarray(rb_units)
        used = self.rb_block >= 0
        return np.bincount(self.rb_block[used], weights=rb_units[used],
                           minlength=self.n_blocks).astype(np.int64)


def group_blocks(owner_rb: np.ndarray, rbs: np.ndarray, capacity_rb: np.ndarray, m: int,
                 n_rb_total: int, mode: str = "rb"):
    """Form code blocks over the eMBB RBs ``rbs`` (global indices).

    ``mode="rb"``: one block per RB. ``mode="user"``: one jointly coded block
    per user over all its RBs. Returns (owner, capacity, units_total, rb_block,
    members) where ``members[j]`` lists block j's RB indices.
    """
    rb_block = np.full(n_rb_total, -1, dtype=np.int64)
    if mode == "rb":
        rb_block[rbs] = np.arange(len(rbs))
        members = [np.array([k]) for k in rbs]
        return (np.asarray(owner_rb, dtype=np.int64), np.asarray(capacity_rb, dtype=float),
                np.full(len(rbs), m, dtype=np.int64), rb_block, members)
    users = np.unique(owner_rb)
    members, caps = [], []
    for j, u in enumerate(users):
        sel = owner_rb == u
        rb_block[rbs[sel]] = j
        members.append(rbs[sel])
        caps.append(capacity_rb[sel].sum())
    units = np.array([m * len(g) for g in members], dtype=np.int64)
    return users.astype(np.int64), np.asarray(caps, dtype=float), units, rb_block, members


def account_slot(blocks: SlotBlocks, outcomes, n_users: int):
    """Per-user successful bits, attempted blocks and failed blocks."""
    outcomes = np.asarray(outcomes, dtype=bool)
    bits = np.bincount(blocks.owner, weights=blocks.info_bits * outcomes, minlength=n_users)
    attempts = np.bincount(blocks.owner, minlength=n_users)
    errors = np.bincount(blocks.owner, weights=~outcomes, minlength=n_users).astype(np.int64)
    return bits, attempts, errors
