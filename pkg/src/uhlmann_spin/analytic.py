"""Closed-form Loschmidt amplitudes on great circles and their zeros in temperature."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .errors import GridTooCoarse, NonPositiveTemperature, UhlmannError
from .spin import SpinJ, rotation_y
from .thermal import ThermalSpec
from .uhlmann import chi_from_beta_omega, generating_function, principal_phase, z2_phase

LIMITS = ("zero", "infinity")


def _check_limit(limit):
    if limit not in LIMITS:
        raise ValueError(f"limit must be one of {LIMITS}, got {limit!r}")


def loschmidt_amplitude(j, omega0: float, winding: int, T: float) -> complex:
    """Complex ``sum_m l_m <jm| exp(-i 2 pi winding chi J_y) |jm>`` before dropping the imaginary part."""
    spec = ThermalSpec(T, omega0, j)
    angle = 2 * math.pi * winding * chi_from_beta_omega(spec.beta * omega0)
    if angle == 0:
        return 1.0 + 0.0j
    diag = np.diagonal(rotation_y(spec.j, angle))
    return complex(np.dot(spec.weights, diag))


def loschmidt_great_circle(j, omega0: float, winding: int, T: float) -> float:
    """Loschmidt amplitude of a great-circle Uhlmann process (longitude or equator)."""
    return loschmidt_amplitude(j, omega0, winding, T).real


def loschmidt_limit(j, winding: int, limit: str) -> float:
    """Analytic T -> 0 and T -> infinity values for general j.

    At T -> 0 only m = -j survives and ``d_{-j,-j}(2 pi winding) = (-1)^(2 j winding)``.
    """
    _check_limit(limit)
    spin = SpinJ.from_value(j)
    if limit == "infinity":
        return 1.0
    return float((-1) ** ((spin.two_j * winding) % 2))


def loschmidt_half(omega0: float, winding: int, T: float | None = None, limit: str | None = None) -> float:
    """``cos(pi W) cos(pi W sech(omega0 / 2T))`` for spin 1/2."""
    if limit is not None:
        _check_limit(limit)
        return float((-1) ** (winding % 2)) if limit == "zero" else 1.0
    if T is None or not T > 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {T}")
    sech = 1.0 - chi_from_beta_omega(omega0 / T)
    return math.cos(math.pi * winding) * math.cos(math.pi * winding * sech)


def tstar_half(omega0: float, winding: int) -> list[float]:
    """Spin-1/2 critical temperatures, ascending; one per n = 0 .. winding-1."""
    if winding < 0:
        raise UhlmannError("winding must be nonnegative")
    out = []
    for n in range(winding):
        r = winding / (n + 0.5)
        out.append(omega0 / (2 * math.log(r + math.sqrt(r * r - 1))))
    return sorted(out)


def loschmidt_spin1(omega0: float, winding: int, T: float | None = None, limit: str | None = None) -> float:
    if limit is not None:
        _check_limit(limit)
        return 1.0
    if T is None or not T > 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {T}")
    b = omega0 / T
    c = math.cos(2 * math.pi * winding * (1.0 - chi_from_beta_omega(b)))
    if b > 700:
        # cosh(b) / Z -> 1/2 and 1/Z -> 0
        return 0.5 * (1 + c)
    ch = math.cosh(b)
    return (ch * (1 + c) + c) / (1 + 2 * ch)


@dataclass(frozen=True)
class SweepSpec:
    j: SpinJ
    omega0: float
    winding: int
    t_grid: tuple

    def __post_init__(self):
        object.__setattr__(self, "j", SpinJ.from_value(self.j))
        grid = tuple(float(t) for t in self.t_grid)
        object.__setattr__(self, "t_grid", grid)
        if not grid:
            raise UhlmannError("temperature grid is empty")
        if any(t <= 0 for t in grid):
            raise NonPositiveTemperature("temperatures must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise UhlmannError("temperature grid must be strictly increasing")
        if not self.omega0 > 0:
            raise UhlmannError("omega0 must be positive")
        if int(self.winding) != self.winding or self.winding < 0:
            raise UhlmannError("winding must be a nonnegative integer")


@dataclass(frozen=True)
class TransitionReport:
    tstars: tuple
    phase_labels: tuple

    def label_names(self) -> list[str]:
        return ["trivial" if lab == 0 else "nontrivial" for lab in self.phase_labels]


def _sign_changes(values: np.ndarray) -> np.ndarray:
    s = np.sign(values)
    return np.nonzero(s[1:] * s[:-1] < 0)[0]


def find_tqpt_zeros(j, omega0: float, winding: int, t_range=(0.01, 20.0), grid_n: int = 400,
                    rtol: float = 1e-10) -> TransitionReport:
    """Zeros of the great-circle Loschmidt amplitude in ``t_range``, bisected to ``rtol``.

    The log-spaced scan is refined x4 up to three times until the number of sign
    changes is stable. Exact grid zeros or persistent instability raise
    :class:`GridTooCoarse`.
    """
    lo, hi = t_range
    if not 0 < lo < hi:
        raise UhlmannError("t_range must be positive and increasing")
    if grid_n < 64:
        raise UhlmannError("grid_n must be >= 64")

    def f(t):
        return loschmidt_great_circle(j, omega0, winding, t)

    counts = []
    for level in range(4):
        grid = np.geomspace(lo, hi, grid_n * 4 ** level)
        vals = np.array([f(t) for t in grid])
        if np.any(vals == 0):
            raise GridTooCoarse("grid point lands exactly on a zero; shift t_range")
        cells = _sign_changes(vals)
        counts.append(len(cells))
        if level > 0 and counts[-1] == counts[-2]:
            break
    else:
        raise GridTooCoarse(f"sign-change count not stable under refinement: {counts}")

    tstars = [bisect(f, grid[i], grid[i + 1], xtol=1e-300, rtol=rtol, maxiter=400) for i in cells]
    edges = [lo] + tstars + [hi]
    labels = []
    for a, b in zip(edges, edges[1:]):
        labels.append(math.pi if f(math.sqrt(a * b)) < 0 else 0.0)
    if any(x == y for x, y in zip(labels, labels[1:])):
        raise GridTooCoarse("adjacent intervals share a phase; a zero is tangential")
    return TransitionReport(tuple(tstars), tuple(labels))


@dataclass(frozen=True)
class SweepRow:
    T: float
    loschmidt: complex
    theta_u: float
    g: float


def _row(j, omega0, winding, T, method, steps, raw_phase):
    if method == "analytic":
        g_val = loschmidt_amplitude(j, omega0, winding, T)
    elif method == "holonomy":
        from .spin import build_spin_operators
        from .uhlmann import LoopPath, holonomy

        ops = build_spin_operators(j)
        res = holonomy(ops, ThermalSpec(T, omega0, j), LoopPath.longitude(0.0, winding), steps=steps)
        g_val = res.loschmidt
    else:
        raise UhlmannError(f"unknown method {method!r}")
    phase = principal_phase(g_val) if raw_phase else z2_phase(g_val)
    return SweepRow(T, g_val, phase, generating_function(g_val))


def sweep(spec: SweepSpec, method: str = "analytic", steps: int = 64, raw_phase: bool = False,
          threads: int = 1) -> list[SweepRow]:
    """Evaluate every grid temperature; rows returned in grid order."""
    args = [(spec.j, spec.omega0, spec.winding, T, method, steps, raw_phase) for T in spec.t_grid]
    if threads <= 1:
        return [_row(*a) for a in args]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda a: _row(*a), args))
