"""Run metrics and case comparison."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np


def rms_error(error, t=None, window=None) -> float:
    """Root-mean-square of ``error`` over samples with ``window[0] <= t <= window[1]``."""
    error = np.asarray(error, dtype=float)
    if window is not None:
        t = np.asarray(t, dtype=float)
        error = error[(t >= window[0]) & (t <= window[1])]
    if error.size == 0:
        raise ValueError("empty RMS window")
    return float(np.sqrt(np.mean(error**2)))


def thrust_spread(thrust, unsaturated) -> np.ndarray:
    """Per-step max - min thrust over unsaturated turbines (NaN when none)."""
    f = np.where(unsaturated, thrust, np.nan)
    spread = np.full(f.shape[0], np.nan)
    has = np.any(unsaturated, axis=1)
    spread[has] = np.nanmax(f[has], axis=1) - np.nanmin(f[has], axis=1)
    return spread


def thrust_mean(thrust, unsaturated) -> np.ndarray:
    f = np.where(unsaturated, thrust, 0.0)
    count = np.sum(unsaturated, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, f.sum(axis=1) / count, np.nan)


@dataclass
class RunMetrics:
    rms_tracking_error: float
    rms_window: list
    saturation_occupancy: list
    occupancy_window: list
    terminal_thrust_spread: float
    terminal_relative_thrust_spread: float
    total_energy: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunMetrics":
        return cls(**json.loads(text))


def compute_metrics(series: dict, dt: float, rms_window, occupancy_window) -> RunMetrics:
    t = series["t"]
    err = series["P_ref_WF"] - series["P_meas_WF"]
    occ_mask = (t >= occupancy_window[0]) & (t <= occupancy_window[1])
    saturated = ~series["s"].astype(bool)
    occupancy = saturated[occ_mask].mean(axis=0) if occ_mask.any() else np.zeros(saturated.shape[1])
    spread = thrust_spread(series["F_T"], series["s"].astype(bool))
    mean = thrust_mean(series["F_T"], series["s"].astype(bool))
    return RunMetrics(
        rms_tracking_error=rms_error(err, t, rms_window),
        rms_window=[float(x) for x in rms_window],
        saturation_occupancy=[float(x) for x in occupancy],
        occupancy_window=[float(x) for x in occupancy_window],
        terminal_thrust_spread=float(spread[-1]),
        terminal_relative_thrust_spread=float(spread[-1] / mean[-1]),
        total_energy=total_energy(series["P_meas_WF"], dt),
    )


def total_energy(p_meas_wf, dt: float) -> float:
    return math.fsum(float(p) * dt for p in p_meas_wf)


class CaseMismatch(ValueError):
    pass


def compare_cases(metrics_a: RunMetrics, metrics_b: RunMetrics, config_a: dict | None = None,
                  config_b: dict | None = None) -> dict:
    """Side-by-side metrics with deltas (b - a).

    When both configs are given they must agree on everything except the
    setting case, the scenario name and the output location.
    """
    if config_a is not None and config_b is not None:
        a, b = _comparable(config_a), _comparable(config_b)
        if a != b:
            diff = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
            raise CaseMismatch(f"configs differ beyond setting_case: {diff}")
    rows = {}
    for key in ("rms_tracking_error", "terminal_thrust_spread",
                "terminal_relative_thrust_spread", "total_energy"):
        va, vb = getattr(metrics_a, key), getattr(metrics_b, key)
        rows[key] = {"a": va, "b": vb, "delta": vb - va}
    occ_a = float(np.mean(metrics_a.saturation_occupancy))
    occ_b = float(np.mean(metrics_b.saturation_occupancy))
    rows["mean_saturation_occupancy"] = {"a": occ_a, "b": occ_b, "delta": occ_b - occ_a}
    rows["saturation_occupancy"] = {
        "a": metrics_a.saturation_occupancy, "b": metrics_b.saturation_occupancy,
        "delta": [y - x for x, y in zip(metrics_a.saturation_occupancy, metrics_b.saturation_occupancy)],
    }
    return rows


def _comparable(config: dict) -> dict:
    flat = {}

    def walk(prefix, node):
        if isinstance(node, dict):
            for k, v in node.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        else:
            flat[prefix] = node

    walk("", config)
    for key in ("name", "controller.setting_case", "output.directory"):
        flat.pop(key, None)
    return flat


def format_comparison(report: dict) -> str:
    lines = [f"{'metric':34s} {'case A':>16s} {'case B':>16s} {'B - A':>16s}"]
    for key, row in report.items():
        if key == "saturation_occupancy":
            continue
        lines.append(f"{key:34s} {row['a']:16.6g} {row['b']:16.6g} {row['delta']:16.6g}")
    occ = report["saturation_occupancy"]
    for i, (a, b) in enumerate(zip(occ["a"], occ["b"])):
        lines.append(f"{'occupancy turbine ' + str(i + 1):34s} {a:16.4f} {b:16.4f} {b - a:16.4f}")
    return "\n".join(lines)
