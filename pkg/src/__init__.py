# Transaction Simulator package
"""
Transaction Simulator - numerical checks of the transactional account of
measurement: offer and confirmation waves, seeded collapse trials, time-
symmetric propagators and first-order emission/absorption kernels.
"""

__version__ = "1.0.0"
__author__ = "Transaction Simulator Team"
