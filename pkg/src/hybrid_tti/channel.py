"""Per-slot frequency-selective channel and resource-block capacity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class ChannelState:
    """SNR of every (eMBB user, sub-band) pair for one slot.

    ``gamma`` is linear scale with shape ``(n_users, n_s)``; ``mean_snr_db``
    is the fixed per-user average.
    """

    gamma: np.ndarray
    mean_snr_db: np.ndarray

    @property
    def n_users(self) -> int:
        return self.gamma.shape[0]

    @property
    def n_s(self) -> int:
        return self.gamma.shape[1]


def sample_slot_channel(rng: np.random.Generator, n_users: int, n_s: int, mean_snr_db,
                        fading: bool = True) -> ChannelState:
    """Draw block Rayleigh power fading, i.i.d. over users, sub-bands and slots."""
    if n_users < 1 or n_s < 1:
        raise ValueError("n_users and n_s must be >= 1")
    mean_db = np.broadcast_to(np.asarray(mean_snr_db, dtype=float), (n_users,)).copy()
    mean_lin = db_to_linear(mean_db)[:, None]
    if fading:
        # standard_exponential can return exactly 0 with negligible probability
        gain = np.maximum(rng.standard_exponential((n_users, n_s)), np.finfo(float).tiny)
        gamma = mean_lin * gain
    else:
        gamma = np.repeat(mean_lin, n_s, axis=1)
    return ChannelState(gamma=gamma, mean_snr_db=mean_db)


def spectral_efficiency(gamma, bits_per_symbol_cap: float = 8.0):
    """log2(1 + gamma) clipped at the highest-MCS ceiling."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(~(gamma > 0)):
        raise ValueError("SNR must be positive")
    return np.minimum(np.log2(1.0 + gamma), bits_per_symbol_cap)


def rb_capacity_bits(gamma_ik, n_ss: int, t_s: int, bits_per_symbol_cap: float = 8.0):
    """Information capacity in bits of one sub-band over one slot."""
    cap = n_ss * t_s * spectral_efficiency(gamma_ik, bits_per_symbol_cap)
    return float(cap) if np.ndim(cap) == 0 else cap
