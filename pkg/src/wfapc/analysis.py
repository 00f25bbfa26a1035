"""Closed-loop spectrum of the thrust-balancing loop.

The augmented state is ``[F; e_I]`` with

    A_cl = [[A,                 B K      ],
            [((1/M) W - I) T_s, I        ]]

where ``W`` has every row equal to the unsaturated-flag vector and ``M`` is
the number of unsaturated turbines.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

UNIT_CIRCLE_TOL = 1e-9
STABILITY_MARGIN = 1e-6


class AnalysisError(RuntimeError):
    pass


def build_W(s) -> tuple[np.ndarray, int]:
    s = np.asarray(s, dtype=float).ravel()
    if not np.all((s == 0) | (s == 1)):
        raise ValueError("saturation flags must be 0 or 1")
    return np.tile(s, (s.size, 1)), int(s.sum())


@dataclass
class ClosedLoopSystem:
    A_cl: np.ndarray
    W: np.ndarray
    M: int
    T_s: float
    K: np.ndarray

    @property
    def n_turbines(self) -> int:
        return self.W.shape[0]


def build_Acl(A, B, K, W, M: int, T_s: float) -> ClosedLoopSystem:
    A, B, K, W = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (A, B, K, W))
    n = A.shape[0]
    for name, mat in (("A", A), ("B", B), ("K", K), ("W", W)):
        if mat.shape != (n, n):
            raise ValueError(f"{name} must be {n}x{n}, got {mat.shape}")
    if M < 1:
        raise AnalysisError("no unsaturated turbine: the thrust loop has no closed loop")
    lower = (W / M - np.eye(n)) * T_s
    a_cl = np.block([[A, B @ K], [lower, np.eye(n)]])
    return ClosedLoopSystem(a_cl, W, M, T_s, K)


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    count_on_unit_circle: int
    max_interior_modulus: float
    stable: bool
    outside: list = field(default_factory=list)

    def summary(self) -> str:
        verdict = "marginally stable" if self.stable else "UNSTABLE"
        return (f"{verdict}: {self.count_on_unit_circle} eigenvalue(s) on the unit circle, "
                f"max interior |lambda| = {self.max_interior_modulus:.9f}")


def spectrum(system: ClosedLoopSystem | np.ndarray, unit_tol: float = UNIT_CIRCLE_TOL,
             margin: float = STABILITY_MARGIN) -> SpectrumReport:
    """Eigenvalues of ``A_cl`` classified against the unit circle.

    Stable here means every eigenvalue off the unit circle has modulus at
    most ``1 - margin``; eigenvalues within ``unit_tol`` of modulus one are
    counted separately and do not make the system unstable.
    """
    a_cl = system.A_cl if isinstance(system, ClosedLoopSystem) else np.asarray(system, dtype=float)
    if not np.all(np.isfinite(a_cl)):
        raise AnalysisError("closed-loop matrix is not finite")
    try:
        eig = np.linalg.eigvals(a_cl)
    except np.linalg.LinAlgError as exc:
        raise AnalysisError(f"eigenvalue solver failed: {exc}") from None
    modulus = np.abs(eig)
    on_circle = np.abs(modulus - 1.0) <= unit_tol
    interior = modulus[~on_circle]
    max_interior = float(interior.max()) if interior.size else 0.0
    outside = [complex(e) for e in eig[~on_circle & (modulus > 1.0 - margin)]]
    return SpectrumReport(eig, int(on_circle.sum()), max_interior, not outside, outside)


def decoupled_poles(a: float, b: float, k: float, T_s: float) -> np.ndarray:
    """Roots of ``z^2 - (1 + a) z + a + b k T_s``, largest first."""
    roots = np.roots([1.0, -(1.0 + a), a + b * k * T_s])
    return roots[np.argsort(-roots.real)]


def place_gains(a: float, b: float, pole: float, T_s: float) -> float:
    """Gain placing one real pole of the per-turbine loop at ``pole``.

    The pole sum is fixed at ``1 + a``, so the partner pole is ``1 + a - pole``.
    Only real poles strictly inside ``(a, 1)`` are reachable with ``k > 0``.
    """
    if not 0 < a < 1 or b <= 0:
        raise ValueError("need 0 < a < 1 and b > 0")
    if isinstance(pole, complex) or np.iscomplexobj(pole):
        if complex(pole).imag != 0:
            raise ValueError("complex poles requested; the design is restricted to overdamped loops")
        pole = complex(pole).real
    pole = float(pole)
    if not a < pole < 1:
        raise ValueError(f"pole {pole} unreachable: real poles need a < p < 1 (a={a})")
    return (pole - a) * (1.0 - pole) / (b * T_s)


def max_overdamped_gain(a: float, b: float, T_s: float) -> float:
    """Largest gain for which both per-turbine poles stay real."""
    return (1.0 - a) ** 2 / (4.0 * b * T_s)


def saturation_patterns(n: int, exhaustive: bool | None = None, samples: int = 100, seed: int = 0):
    """Unsaturated-flag vectors with at least one unsaturated turbine.

    Enumerates all of them for ``n <= 4`` (or when ``exhaustive``); otherwise
    returns every pattern with one or two saturated turbines plus ``samples``
    random ones.
    """
    if exhaustive is None:
        exhaustive = n <= 4
    if exhaustive:
        return [np.array(p) for p in itertools.product((0, 1), repeat=n) if any(p)]
    seen = set()
    patterns = []

    def add(p):
        key = tuple(int(x) for x in p)
        if any(key) and key not in seen:
            seen.add(key)
            patterns.append(np.array(key))

    add(np.ones(n, dtype=int))
    for count in (1, 2):
        for idx in itertools.combinations(range(n), count):
            p = np.ones(n, dtype=int)
            p[list(idx)] = 0
            add(p)
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        add(rng.integers(0, 2, n))
    return patterns


@dataclass
class PatternVerdict:
    pattern: np.ndarray
    report: SpectrumReport
    det_residual: float

    @property
    def ok(self) -> bool:
        return self.report.stable and self.report.count_on_unit_circle >= 1 and self.det_residual <= UNIT_CIRCLE_TOL


def sweep(a: float, b: float, k: float, T_s: float, n: int, exhaustive: bool | None = None,
          samples: int = 100, seed: int = 0) -> list[PatternVerdict]:
    A = a * np.eye(n)
    B = b * np.eye(n)
    K = k * np.eye(n)
    verdicts = []
    for s in saturation_patterns(n, exhaustive, samples, seed):
        W, M = build_W(s)
        report = spectrum(build_Acl(A, B, K, W, M, T_s))
        det = abs(np.linalg.det(W / M - np.eye(n)))
        verdicts.append(PatternVerdict(s, report, det))
    return verdicts


def format_report(model, k: float, n: int, verdicts: list[PatternVerdict]) -> str:
    lines = [
        f"model: K1={model.K1:.6g} N/W  T1={model.T1:.6g} s  T_s={model.T_s:g} s  "
        f"a={model.a:.9f}  b={model.b:.6g}",
        f"thrust-loop gain k={k:g}, turbines={n}",
        f"decoupled poles: {', '.join(f'{p.real:.6f}' for p in decoupled_poles(model.a, model.b, k, model.T_s))}",
        f"overdamped up to k={max_overdamped_gain(model.a, model.b, model.T_s):.6g}",
        "",
        f"{'pattern':>{max(n, 7)}}  M  unit  max|lambda|      det      verdict",
    ]
    for v in verdicts:
        flags = "".join(str(int(x)) for x in v.pattern)
        lines.append(f"{flags:>{max(n, 7)}} {int(v.pattern.sum()):2d} {v.report.count_on_unit_circle:5d}  "
                     f"{v.report.max_interior_modulus:.9f}  {v.det_residual:.1e}  "
                     f"{'ok' if v.ok else 'FAIL'}")
    failed = sum(not v.ok for v in verdicts)
    lines.append("")
    lines.append(f"{len(verdicts)} pattern(s), {failed} failing")
    return "\n".join(lines) + "\n"


def write_eigenvalues(path, verdicts: list[PatternVerdict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pattern", "index", "real", "imag", "modulus", "on_unit_circle"])
        for v in verdicts:
            flags = "".join(str(int(x)) for x in v.pattern)
            for i, e in enumerate(v.report.eigenvalues):
                mod = abs(e)
                w.writerow([flags, i, repr(float(e.real)), repr(float(e.imag)), repr(float(mod)),
                            int(abs(mod - 1.0) <= UNIT_CIRCLE_TOL)])
