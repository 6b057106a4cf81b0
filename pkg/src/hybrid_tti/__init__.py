"""Hybrid-TTI eMBB/URLLC coexistence simulator.

Slot-level eMBB coding-redundancy selection driven by an exact prediction of
mini-slot URLLC preemption, plus the separate-bands and known-arrival
reference schedulers.
"""

from .config import ConfigError, SystemConfig, load_config
from .predictor import Pmf

__all__ = ["ConfigError", "SystemConfig", "load_config", "Pmf"]
__version__ = "0.1.0"
