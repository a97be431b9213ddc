"""Equilibrium computations for sequential search markets in which brokers
sell information about each good the agent inspects."""

from .contracts import Offer, PayoffProfile, Thresholds, compute_thresholds, onpath_offer, phi, threshold_x, wtp
from .prior import Prior
from .search_core import SurplusBounds, reservation_value, surplus_bounds
from .signals import Signal, c_value, realize, signal_cdf

__all__ = [
    "Offer",
    "PayoffProfile",
    "Prior",
    "Signal",
    "SurplusBounds",
    "Thresholds",
    "c_value",
    "compute_thresholds",
    "onpath_offer",
    "phi",
    "realize",
    "reservation_value",
    "signal_cdf",
    "surplus_bounds",
    "threshold_x",
    "wtp",
]
