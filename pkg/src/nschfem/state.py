"""Coefficient-vector state of the coupled system at one time level."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass
class State:
    """Fields (phi, mu) in P1, velocity in P2, mean-free pressure in P1.

    Velocity coefficients are full-length; constrained entries hold their
    (zero) boundary values.
    """

    phi: np.ndarray
    mu: np.ndarray
    vel: np.ndarray
    pressure: np.ndarray
    time: float = 0.0
    step_index: int = 0

    def copy(self) -> "State":
        return State(
            phi=self.phi.copy(),
            mu=self.mu.copy(),
            vel=self.vel.copy(),
            pressure=self.pressure.copy(),
            time=self.time,
            step_index=self.step_index,
        )

    def with_time(self, time: float, step_index: int) -> "State":
        return replace(self, time=time, step_index=step_index)
