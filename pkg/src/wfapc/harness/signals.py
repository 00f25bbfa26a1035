"""Farm power reference: de-rated hold, then a ramp/hold program."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class ReferenceSignal:
    """P_ref_WF(t) in watts.

    Before ``start_time`` the farm runs at ``derate_fraction`` of its rated
    power.  Afterwards the piecewise-linear ``program`` is played, rescaled
    so its largest level equals ``peak_fraction`` of rated power.  A CSV
    file with columns ``t, P_ref_WF`` replaces the whole signal when given.
    """

    def __init__(self, total_rated: float, derate_fraction: float = 0.5,
                 peak_fraction: float = 0.7, program=None, start_time: float = 300.0,
                 file=None):
        self.total_rated = float(total_rated)
        self.derate_fraction = derate_fraction
        self.start_time = start_time
        self._replay = None
        if file is not None:
            self._replay = self._read(file)
            return
        if program is None:
            from .config import DEFAULT_PROGRAM
            program = DEFAULT_PROGRAM
        knots = np.asarray(program, dtype=float)
        self._times = knots[:, 0]
        self._levels = knots[:, 1] * peak_fraction / knots[:, 1].max()

    @staticmethod
    def _read(path):
        with open(Path(path), newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        data = np.array([[float(r[0]), float(r[1])] for r in rows])
        if data.ndim != 2 or len(data) < 1 or np.any(np.diff(data[:, 0]) <= 0):
            raise ValueError(f"{path}: need strictly increasing t column and P_ref_WF column")
        return data

    @classmethod
    def from_config(cls, config) -> "ReferenceSignal":
        sig = config.signal
        total = config.n_turbines * config.turbine_params().rated_power
        return cls(total, sig.derate_fraction, sig.peak_fraction, sig.program,
                   config.controller.start_time, sig.file)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self._replay is not None:
            return np.interp(t, self._replay[:, 0], self._replay[:, 1])
        program = np.interp(t, self._times, self._levels) * self.total_rated
        return np.where(t < self.start_time, self.derate_fraction * self.total_rated, program)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def write_signal(path, t, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "P_ref_WF"])
        for a, b in zip(t, values):
            w.writerow([repr(float(a)), repr(float(b))])
