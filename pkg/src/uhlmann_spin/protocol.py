"""Purified-state simulation of the meridian Uhlmann process.

The system and ancilla evolve under ``U_S(t) = exp(-i Theta(t) J_y)`` and
``U_A(t) = exp(-i eta Theta(t) J_y)`` with ``Theta(t) = int_0^t theta'``:

    |W(t)> = sum_m sqrt(l_m) U_S |psi_m(t)> (x) U_A |psi_m(t)>,
    |psi_m(t)> = exp(-i theta(t) J_y) |j m>.

No bath is needed; the temperature enters only through the initial weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .errors import UhlmannError
from .spin import build_spin_operators, rotation_y
from .thermal import ThermalSpec, purified_overlap
from .uhlmann import chi

QUAD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProtocolSchedule:
    """Meridian schedule with ``theta(0) = 0`` and ``theta(1) = 2 pi winding``."""

    winding: int
    theta_of_t: Callable[[float], float] = field(repr=False)
    rate: Callable[[float], float] = field(repr=False)
    kind: str = "custom"

    def __post_init__(self):
        if abs(self.theta_of_t(0.0)) > 1e-12 or abs(self.theta_of_t(1.0) - 2 * math.pi * self.winding) > 1e-9:
            raise UhlmannError("schedule must run from theta=0 to theta=2 pi winding")

    @classmethod
    def linear(cls, winding: int) -> "ProtocolSchedule":
        v = 2 * math.pi * winding
        return cls(winding, lambda t: v * t, lambda t: v, "linear")

    @classmethod
    def quadratic(cls, winding: int) -> "ProtocolSchedule":
        """Uniformly accelerated sweep, ``theta' = v t`` with ``v = 4 pi winding``."""
        v = 4 * math.pi * winding
        return cls(winding, lambda t: 0.5 * v * t * t, lambda t: v * t, "custom")

    @classmethod
    def custom(cls, winding: int, theta_of_t, rate) -> "ProtocolSchedule":
        return cls(winding, theta_of_t, rate, "custom")

    def integrated_rate(self, t: float) -> float:
        """``int_0^t theta'(s) ds``: closed form when linear, adaptive composite Simpson otherwise."""
        if self.kind == "linear":
            return 2 * math.pi * self.winding * t
        if t == 0:
            return 0.0
        n = 16
        prev = None
        while n <= 2 ** 20:
            s = np.linspace(0.0, t, n + 1)
            val = float(simpson([self.rate(x) for x in s], x=s))
            if prev is not None and abs(val - prev) <= QUAD_TOL * max(1.0, abs(val)):
                return val
            prev, n = val, 2 * n
        raise UhlmannError("Simpson quadrature of the schedule rate did not converge")


@dataclass(frozen=True, eq=False)
class ProtocolState:
    t: float
    purified: np.ndarray = field(repr=False)
    us: np.ndarray = field(repr=False)
    ua: np.ndarray = field(repr=False)
    eta: float


def ancilla_weight(spec: ThermalSpec) -> float:
    """``eta = 1 - chi = sech(beta omega0 / 2)``."""
    return 1.0 - chi(spec)


def purified_state(spec: ThermalSpec, us: np.ndarray, ua: np.ndarray, theta: float) -> np.ndarray:
    """``sum_m sqrt(l_m) U_S|psi_m> (x) U_A|psi_m>`` flattened with the system index slow."""
    psi = rotation_y(spec.j, theta)  # column m is |psi_m>
    sys_kets = us @ psi
    anc_kets = ua @ psi
    amp = np.sqrt(spec.weights)
    return np.einsum("m,sm,am->sa", amp, sys_kets, anc_kets).reshape(-1)


def state_at(spec: ThermalSpec, sched: ProtocolSchedule, t: float) -> ProtocolState:
    eta = ancilla_weight(spec)
    big_theta = sched.integrated_rate(t)
    us = rotation_y(spec.j, big_theta)
    ua = rotation_y(spec.j, eta * big_theta)
    return ProtocolState(t, purified_state(spec, us, ua, sched.theta_of_t(t)), us, ua, eta)


def evolve(spec: ThermalSpec, sched: ProtocolSchedule, n_steps: int) -> list[ProtocolState]:
    """States at ``t_k = k / n_steps`` for k = 0 .. n_steps."""
    if n_steps < 2:
        raise UhlmannError("n_steps must be >= 2")
    return [state_at(spec, sched, k / n_steps) for k in range(n_steps + 1)]


def transport_residual(traj: list[ProtocolState]) -> list[float]:
    """``Im <W(t)| dW/dt>`` at interior samples via central differences."""
    if len(traj) < 3:
        raise UhlmannError("need at least 3 samples")
    out = []
    for prev, cur, nxt in zip(traj, traj[1:], traj[2:]):
        deriv = (nxt.purified - prev.purified) / (nxt.t - prev.t)
        out.append(purified_overlap(cur.purified, deriv).imag)
    return out


def velocity(spec: ThermalSpec, sched: ProtocolSchedule, state: ProtocolState) -> np.ndarray:
    """Exact ``d|W>/dt``, generated by ``theta' [2 J_y (x) 1 + (1 + eta) 1 (x) J_y]``."""
    jy = build_spin_operators(spec.j).jy
    rate = sched.rate(state.t)
    eye = np.eye(spec.j.dim)
    gen = rate * (2 * np.kron(jy, eye) + (state.eta + 1) * np.kron(eye, jy))
    return -1j * gen @ state.purified


def derivative_error(spec: ThermalSpec, sched: ProtocolSchedule, traj: list[ProtocolState]) -> float:
    """Max deviation of the central-difference velocity from :func:`velocity`."""
    worst = 0.0
    for prev, cur, nxt in zip(traj, traj[1:], traj[2:]):
        deriv = (nxt.purified - prev.purified) / (nxt.t - prev.t)
        worst = max(worst, float(np.max(np.abs(deriv - velocity(spec, sched, cur)))))
    return worst


def reduced_system_state(state: ProtocolState) -> np.ndarray:
    dim = state.us.shape[0]
    psi = state.purified.reshape(dim, dim)
    return psi @ psi.conj().T


def protocol_fidelity(spec: ThermalSpec, sched: ProtocolSchedule) -> complex:
    """``<W(0)|W(1)>``; equals the great-circle Loschmidt amplitude."""
    return purified_overlap(state_at(spec, sched, 0.0).purified, state_at(spec, sched, 1.0).purified)
