"""Power and thrust coefficient lookup tables.

The shipped tables come from the exponential C_P(lambda, theta) curve fit
commonly used for variable-speed pitch-regulated turbines, rescaled so that
the fine-pitch optimum sits at the requested (lambda_opt, C_P_max).  The
usual ``0.035 / (theta^3 + 1)`` term is held at its fine-pitch value 0.035:
with theta in degrees that term collapses between 0 and 2 degrees and makes
the pitch sensitivity discontinuous near fine pitch.  Thrust
is derived from the same operating point through actuator-disk momentum
theory, with a rotor efficiency chosen so the optimum operating point has
the reference machine's thrust coefficient (about 0.77).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

BETZ_LIMIT = 16.0 / 27.0

# exponential curve-fit coefficients, theta in degrees
_C1, _C2, _C3, _C4, _C5, _C6 = 0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068


def _raw_cp(lam, theta_deg):
    lam = np.asarray(lam, dtype=float)
    theta_deg = np.asarray(theta_deg, dtype=float)
    inv_li = 1.0 / (lam + 0.08 * theta_deg) - 0.035
    cp = _C1 * (_C2 * inv_li - _C3 * theta_deg - _C4) * np.exp(-_C5 * inv_li) + _C6 * lam
    return np.where(inv_li > 0.0, cp, 0.0)


def analytic_cp(lam, theta, cp_max: float = 0.482, lambda_opt: float = 7.55):
    """C_P from the rescaled exponential fit; ``theta`` in radians."""
    res = minimize_scalar(lambda x: -_raw_cp(x, 0.0), bounds=(4.0, 12.0),
                          method="bounded", options={"xatol": 1e-12})
    lam_peak, cp_peak = res.x, -res.fun
    scaled = _raw_cp(np.asarray(lam) * lam_peak / lambda_opt, np.degrees(theta))
    return np.clip(scaled * cp_max / cp_peak, 0.0, BETZ_LIMIT)


def thrust_from_power_coefficient(cp, cp_max: float = 0.482, ct_at_optimum: float = 0.77):
    """Momentum-theory C_T for a given C_P (lower induction branch).

    Solves ``eta * 4 a (1 - a)^2 = C_P`` for the axial induction ``a`` and
    returns ``4 a (1 - a)``.  The rotor efficiency ``eta`` is fixed so that
    ``cp_max`` maps onto ``ct_at_optimum``.
    """
    a_opt = 0.5 * (1.0 - np.sqrt(1.0 - ct_at_optimum))
    eta = cp_max / (4.0 * a_opt * (1.0 - a_opt) ** 2)
    target = np.clip(np.asarray(cp, dtype=float) / eta, 0.0, BETZ_LIMIT)
    lo = np.zeros_like(target)
    hi = np.full_like(target, 1.0 / 3.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        low_side = 4.0 * mid * (1.0 - mid) ** 2 < target
        lo = np.where(low_side, mid, lo)
        hi = np.where(low_side, hi, mid)
    a = 0.5 * (lo + hi)
    return 4.0 * a * (1.0 - a)


@dataclass
class AeroTables:
    """Dense C_P / C_T grids over tip-speed ratio and pitch (radians).

    ``cp`` and ``ct`` have shape ``(len(lam), len(theta))``.
    """

    lam: np.ndarray
    theta: np.ndarray
    cp: np.ndarray
    ct: np.ndarray

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        self.cp = np.asarray(self.cp, dtype=float)
        self.ct = np.asarray(self.ct, dtype=float)
        shape = (self.lam.size, self.theta.size)
        if self.cp.shape != shape or self.ct.shape != shape:
            raise ValueError(f"table shape mismatch: expected {shape}, "
                             f"got C_P {self.cp.shape}, C_T {self.ct.shape}")
        if np.any(np.diff(self.lam) <= 0) or np.any(np.diff(self.theta) <= 0):
            raise ValueError("grid axes must be strictly increasing")
        if np.any(self.cp < 0) or np.any(self.cp > BETZ_LIMIT) or np.any(self.ct < 0):
            raise ValueError("coefficients outside physical bounds")
        i, j = np.unravel_index(np.argmax(self.cp), self.cp.shape)
        self.cp_max = float(self.cp[i, j])
        self.lambda_opt = float(self.lam[i])
        self.theta_fine = float(self.theta[j])
        self._stacked = np.stack([self.cp, self.ct])

    @classmethod
    def default(cls, cp_max: float = 0.482, lambda_opt: float = 7.55,
                ct_at_optimum: float = 0.77) -> "AeroTables":
        lam = np.union1d(np.arange(0.5, 18.0 + 1e-9, 0.25), [lambda_opt])
        theta = np.radians(np.arange(0.0, 30.0 + 1e-9, 0.5))
        L, T = np.meshgrid(lam, theta, indexing="ij")
        cp = analytic_cp(L, T, cp_max, lambda_opt)
        ct = thrust_from_power_coefficient(cp, cp_max, ct_at_optimum)
        return cls(lam, theta, cp, ct)

    def lookup(self, lam, theta):
        """Bilinear (C_P, C_T, extrapolated) at the given points.

        Points off the grid are clamped to its edge; ``extrapolated`` marks them.
        """
        lam = np.asarray(lam, dtype=float)
        theta = np.asarray(theta, dtype=float)
        lg, tg = self.lam, self.theta
        lc = np.minimum(np.maximum(lam, lg[0]), lg[-1])
        tc = np.minimum(np.maximum(theta, tg[0]), tg[-1])
        outside = (lc != lam) | (tc != theta)
        i = np.minimum(np.searchsorted(lg, lc, side="right") - 1, lg.size - 2)
        j = np.minimum(np.searchsorted(tg, tc, side="right") - 1, tg.size - 2)
        u = (lc - lg[i]) / (lg[i + 1] - lg[i])
        w = (tc - tg[j]) / (tg[j + 1] - tg[j])
        g = self._stacked
        out = ((1 - u) * (1 - w) * g[:, i, j] + u * (1 - w) * g[:, i + 1, j]
               + (1 - u) * w * g[:, i, j + 1] + u * w * g[:, i + 1, j + 1])
        return out[0], out[1], outside

    def power_coefficient(self, lam, theta):
        return self.lookup(lam, theta)[0]

    def thrust_coefficient(self, lam, theta):
        return self.lookup(lam, theta)[1]

    def save(self, path) -> None:
        """Write the plain-text grid format read by :meth:`load`."""
        with open(path, "w") as fh:
            fh.write("# aero tables: line 1 lambda grid, line 2 theta grid [rad],\n")
            fh.write("# then C_P rows (one per lambda), then C_T rows\n")
            fh.write(" ".join(repr(float(x)) for x in self.lam) + "\n")
            fh.write(" ".join(repr(float(x)) for x in self.theta) + "\n")
            for grid in (self.cp, self.ct):
                for row in grid:
                    fh.write(" ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path) -> "AeroTables":
        rows = [line.split() for line in Path(path).read_text().splitlines()
                if line.strip() and not line.lstrip().startswith("#")]
        if len(rows) < 2:
            raise ValueError(f"{path}: missing grid header lines")
        lam = np.array(rows[0], dtype=float)
        theta = np.array(rows[1], dtype=float)
        body = rows[2:]
        if len(body) != 2 * lam.size:
            raise ValueError(f"{path}: expected {2 * lam.size} table rows, found {len(body)}")
        data = np.array(body, dtype=float)
        return cls(lam, theta, data[:lam.size], data[lam.size:])
