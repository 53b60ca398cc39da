"""Shared numerical tolerances.

A single mutable instance (``tolerances``) holds the default slack used
throughout the library.  The CLI can override fields from a plain-text
config file; library callers may also pass explicit values to the few
functions that take a ``tol`` argument.
"""

from dataclasses import dataclass


@dataclass
class ToleranceConfig:
    """Numerical slack for validity checks.

    entry_floor: how far below zero a probability entry may drift.
    pmf_sum: allowed deviation of a pmf total from 1.
    kernel: allowed violation of the causal-kernel consistency constraints.
    round_trip: allowed entrywise error in compose/factorize round trips.
    conditional_row: allowed deviation of a conditional row sum from 1.
    """

    entry_floor: float = 1e-12
    pmf_sum: float = 1e-9
    kernel: float = 1e-9
    round_trip: float = 1e-10
    conditional_row: float = 1e-12

    def update(self, **kwargs):
        for key, value in kwargs.items():
            if not hasattr(self, key):
                raise KeyError(f"unknown tolerance field {key!r}")
            setattr(self, key, float(value))


tolerances = ToleranceConfig()
