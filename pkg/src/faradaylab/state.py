"""The flattened-frame snapshot ``(u, p, eta, t)``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, SurfaceField, VolumeField


@dataclass(frozen=True, eq=False)
class FlowState:
    """Velocity, pressure and surface elevation at time ``t``."""

    u: VolumeField
    p: VolumeField
    eta: SurfaceField
    t: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.eta.grid

    @classmethod
    def zeros(cls, grid: Grid, t=0.0):
        return cls(VolumeField.zeros(grid, 3), VolumeField.zeros(grid, 1), SurfaceField.zeros(grid, 1), float(t))

    def max_abs(self):
        """Largest nodal ``|u|`` and ``|eta|``."""
        return float(np.max(np.abs(self.u.values))), float(np.max(np.abs(self.eta.values)))

    def mean_eta(self):
        return float(self.eta.coef[0, 0, 0].real)
