"""Engineering wake surrogate: top-hat deficits with advection delay.

Wind blows along +x.  A turbine is waked by every turbine upstream of it
whose expanding top-hat wake covers its hub position; deficits from
different sources combine root-sum-square.  Each source's thrust
coefficient reaches a downstream rotor after a fixed number of ticks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

CT_CLAMP = 0.9999


def wake_deficit(ct_upstream, distance, rotor_diameter: float, expansion: float = 0.05):
    """Fractional speed deficit ``(1 - sqrt(1 - C_T)) / (1 + k x / D)^2``.

    ``C_T >= 1`` is clamped to 0.9999 with a warning.
    """
    ct = np.asarray(ct_upstream, dtype=float)
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError("wake distance must be positive")
    if np.any(ct < 0):
        raise ValueError("thrust coefficient must be non-negative")
    if np.any(ct >= 1.0):
        log.warning("thrust coefficient >= 1 clamped to %s", CT_CLAMP)
        ct = np.minimum(ct, CT_CLAMP)
    return (1.0 - np.sqrt(1.0 - ct)) / (1.0 + expansion * distance / rotor_diameter) ** 2


@dataclass(frozen=True)
class FarmLayout:
    """Turbine hub positions (m) in the wind-aligned frame, x downstream."""

    x: np.ndarray
    y: np.ndarray
    rotor_diameter: float = 126.0
    rows: int = 0
    columns: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.shape != y.shape or x.ndim != 1 or x.size == 0:
            raise ValueError("x and y must be equal-length 1-D arrays")
        pts = np.column_stack([x, y])
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("turbine positions must be pairwise distinct")
        if self.rotor_diameter <= 0:
            raise ValueError("rotor_diameter must be positive")

    @classmethod
    def grid(cls, rows: int = 3, columns: int = 3, spacing_diameters: float = 5.0,
             rotor_diameter: float = 126.0) -> "FarmLayout":
        """Aligned rectangular farm, turbine index = row * columns + column."""
        s = spacing_diameters * rotor_diameter
        r, c = np.divmod(np.arange(rows * columns), columns)
        return cls(r * s, c * s, rotor_diameter, rows, columns)

    @property
    def size(self) -> int:
        return self.x.size

    def row_of(self) -> np.ndarray:
        """Row index per turbine (0 = most upstream), by distinct x position."""
        return np.searchsorted(np.unique(self.x), self.x)


class WakeField:
    """Rotor-effective wind speeds for a farm under steady aligned inflow.

    ``delays[j, i]`` is the number of ticks for turbine j's thrust state to
    reach turbine i (0 where j does not wake i).
    """

    def __init__(self, layout: FarmLayout, ambient: float, dt: float,
                 initial_ct, expansion: float = 0.05):
        if ambient <= 0:
            raise ValueError("ambient wind speed must be positive")
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.layout = layout
        self.ambient = float(ambient)
        self.dt = float(dt)
        self.expansion = float(expansion)
        n = layout.size
        ct0 = np.broadcast_to(np.asarray(initial_ct, dtype=float), (n,)).copy()

        dx = layout.x[None, :] - layout.x[:, None]          # [j, i] = x_i - x_j
        dy = np.abs(layout.y[None, :] - layout.y[:, None])
        radius = 0.5 * layout.rotor_diameter + 0.5 * expansion * np.maximum(dx, 0.0)
        self.waked = (dx > 0) & (dy < radius)
        self.distance = np.where(self.waked, dx, 1.0)

        # advection at the mean of ambient and waked speed, fixed at start-up
        d0 = np.where(self.waked, wake_deficit(ct0[:, None] * np.ones((1, n)), self.distance,
                                               layout.rotor_diameter, expansion), 0.0)
        speed = self.ambient * (1.0 - 0.5 * d0)
        steps = np.rint(self.distance / speed / self.dt).astype(int)
        self.delays = np.where(self.waked, np.maximum(steps, 1), 0)

        self._depth = int(self.delays.max()) + 1
        self._history = np.tile(ct0, (self._depth, 1))
        self._head = 0
        self.speeds = self._compute()

    def _delayed_ct(self) -> np.ndarray:
        """C_T matrix [j, i]: source j's value ``delays[j, i]`` ticks ago."""
        idx = (self._head - self.delays) % self._depth
        cols = np.arange(self.layout.size)[:, None]
        return self._history[idx, np.broadcast_to(cols, idx.shape)]

    def _compute(self) -> np.ndarray:
        ct = self._delayed_ct()
        deficits = np.where(self.waked,
                            wake_deficit(np.minimum(ct, CT_CLAMP), self.distance,
                                         self.layout.rotor_diameter, self.expansion), 0.0)
        total = np.sqrt(np.sum(deficits**2, axis=0))
        return self.ambient * np.clip(1.0 - total, 0.0, 1.0)

    def advance(self, ct_now) -> np.ndarray:
        """Record the turbines' current C_T and return this tick's speeds."""
        self._head = (self._head + 1) % self._depth
        self._history[self._head] = np.broadcast_to(np.asarray(ct_now, dtype=float),
                                                   (self.layout.size,))
        self.speeds = self._compute()
        return self.speeds.copy()

    def settle(self, ct_now) -> np.ndarray:
        """Fill the whole history with ``ct_now`` (steady-state initialisation)."""
        self._history[:] = np.broadcast_to(np.asarray(ct_now, dtype=float), (self.layout.size,))
        self.speeds = self._compute()
        return self.speeds.copy()
