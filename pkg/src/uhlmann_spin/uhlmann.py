"""Uhlmann connection, path-ordered holonomy, Loschmidt amplitude and curvature."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NotConverged, RankDeficient, UhlmannError
from .spin import SphereAngles, SpinOperators, field_direction_operator
from .thermal import DensityMatrix, ThermalSpec, density_matrix, sqrt_density

EPS_AMPLITUDE = 1e-12
G_MAX = -math.log(EPS_AMPLITUDE ** 2)


def chi(spec: ThermalSpec) -> float:
    """Connection strength ``1 - sech(beta omega0 / 2)``."""
    return chi_from_beta_omega(spec.beta * spec.omega0)


def chi_from_beta_omega(beta_omega: float) -> float:
    x = 0.5 * beta_omega
    # sech overflows gracefully: cosh(x) -> inf gives 0
    if x > 700:
        return 1.0
    return 1.0 - 1.0 / math.cosh(x)


def generating_function(value) -> float:
    """``-ln |G|^2`` with a finite ceiling at exact zeros."""
    mag = abs(value)
    if mag <= EPS_AMPLITUDE:
        return G_MAX
    # |G| may exceed 1 by rounding; g is never negative
    return min(max(-2.0 * math.log(mag), 0.0), G_MAX)


def principal_phase(value) -> float:
    """Argument in (-pi, pi]."""
    phase = math.atan2(complex(value).imag, complex(value).real)
    return math.pi if phase == -math.pi else phase


def z2_phase(value) -> float:
    """Snap a Uhlmann phase to the Z2 values: 0 when |arg| < pi/2, else pi."""
    return 0.0 if abs(principal_phase(value)) < math.pi / 2 else math.pi


@dataclass(frozen=True, eq=False)
class ConnectionAtPoint:
    """Coefficients of d theta and d phi in ``A_U``."""

    a_theta: np.ndarray
    a_phi: np.ndarray


def _connection_stack(ops: SpinOperators, theta, phi, chi_value: float):
    theta = np.asarray(theta, dtype=float)[..., None, None]
    phi = np.asarray(phi, dtype=float)[..., None, None]
    a_theta = -1j * chi_value * (ops.jx * np.sin(phi) - ops.jy * np.cos(phi))
    a_phi = -1j * chi_value * (
        (ops.jx * np.cos(phi) + ops.jy * np.sin(phi)) * np.cos(theta) - ops.jz * np.sin(theta)
    ) * np.sin(theta)
    return a_theta, a_phi


def connection_spin_j(ops: SpinOperators, a: SphereAngles, chi_value: float) -> ConnectionAtPoint:
    a_theta, a_phi = _connection_stack(ops, a.theta, a.phi, chi_value)
    return ConnectionAtPoint(a_theta, a_phi)


def connection_general(
    rho_family: Callable[[SphereAngles], DensityMatrix],
    a: SphereAngles,
    fd_step: float = 1e-5,
    min_eigval: float = 1e-14,
) -> ConnectionAtPoint:
    """Connection from the eigen-decomposition formula with ``d sqrt(rho)`` by central differences.

    ``A = -sum_mn |m><m|[d sqrt(rho), sqrt(rho)]|n><n| / (l_m + l_n)``, evaluated
    separately along theta and phi.
    """
    if not 0 < fd_step <= 1e-3:
        raise UhlmannError("fd_step must lie in (0, 1e-3]")
    dm = rho_family(a)
    lam = np.asarray(dm.eigvals, dtype=float)
    if np.any(lam < min_eigval):
        raise RankDeficient(f"smallest eigenvalue {lam.min():.3e} below {min_eigval:g}")
    s = sqrt_density(dm)
    e = dm.eigvecs
    denom = lam[:, None] + lam[None, :]

    def component(dtheta, dphi):
        plus = sqrt_density(rho_family(SphereAngles(a.theta + dtheta, a.phi + dphi)))
        minus = sqrt_density(rho_family(SphereAngles(a.theta - dtheta, a.phi - dphi)))
        ds = (plus - minus) / (2 * fd_step)
        comm = e.conj().T @ (ds @ s - s @ ds) @ e
        return -(e @ (comm / denom) @ e.conj().T)

    return ConnectionAtPoint(component(fd_step, 0.0), component(0.0, fd_step))


def thermal_family(spec: ThermalSpec) -> Callable[[SphereAngles], DensityMatrix]:
    return lambda a: density_matrix(spec, a)


# --- loops -----------------------------------------------------------------


def _unit_vector(theta, phi) -> np.ndarray:
    return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


@dataclass(frozen=True, eq=False)
class LoopPath:
    """Closed curve ``t -> (theta(t), phi(t))`` for t in [0, 1].

    ``sampler`` must be vectorised over t and return continuous (unwrapped) angles.
    """

    sampler: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] = field(repr=False)
    winding: int
    kind: str
    label: str = ""

    def __post_init__(self):
        if not self.is_closed():
            raise UhlmannError(f"path {self.kind} {self.label} is not closed")

    def angles(self, t) -> tuple[np.ndarray, np.ndarray]:
        theta, phi = self.sampler(np.asarray(t, dtype=float))
        return np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)

    def start(self) -> SphereAngles:
        theta, phi = self.angles(0.0)
        return SphereAngles(float(theta), float(phi))

    def is_closed(self, tol: float = 1e-9) -> bool:
        t0, p0 = self.angles(0.0)
        t1, p1 = self.angles(1.0)
        return bool(np.max(np.abs(_unit_vector(t0, p0) - _unit_vector(t1, p1))) <= tol)

    @classmethod
    def longitude(cls, phi0: float, winding: int) -> "LoopPath":
        """Meridian at fixed phi0 from the north pole, theta: 0 -> 2 pi winding."""
        def sampler(t):
            return 2 * np.pi * winding * t, np.full_like(t, phi0)
        return cls(sampler, winding, "longitude", f"phi0={phi0}")

    @classmethod
    def equator(cls, winding: int) -> "LoopPath":
        def sampler(t):
            return np.full_like(t, np.pi / 2), 2 * np.pi * winding * t
        return cls(sampler, winding, "equator")

    @classmethod
    def tilted_great_circle(cls, tilt: float, winding: int) -> "LoopPath":
        """Equator rotated by ``tilt`` (< pi/2) about the x axis; never crosses a pole."""
        if not 0 <= tilt < np.pi / 2:
            raise UhlmannError("tilt must lie in [0, pi/2)")

        def sampler(t):
            s = 2 * np.pi * winding * t
            x, y, z = np.cos(s), np.sin(s) * np.cos(tilt), np.sin(s) * np.sin(tilt)
            theta = np.arccos(np.clip(z, -1, 1))
            phi = np.arctan2(y, x)
            phi = phi + 2 * np.pi * np.round((s - phi) / (2 * np.pi))
            return theta, phi
        return cls(sampler, winding, "custom", f"tilt={tilt}")

    @classmethod
    def custom(cls, table, winding: int = 0) -> "LoopPath":
        """Linear interpolation through rows ``(t, theta, phi)`` spanning t = 0..1."""
        table = np.asarray(table, dtype=float)
        ts, thetas, phis = table[:, 0], table[:, 1], table[:, 2]
        if ts[0] != 0 or ts[-1] != 1 or np.any(np.diff(ts) <= 0):
            raise UhlmannError("sample table needs strictly increasing t from 0 to 1")

        def sampler(t):
            return np.interp(t, ts, thetas), np.interp(t, ts, phis)
        return cls(sampler, winding, "custom", f"{len(ts)} samples")

    def reversed(self) -> "LoopPath":
        return LoopPath(lambda t: self.sampler(1.0 - t), -self.winding, self.kind, self.label + " reversed")

    def reparameterized(self, f: Callable[[np.ndarray], np.ndarray]) -> "LoopPath":
        """Same curve traced with ``t -> f(t)``; f must be monotone with f(0)=0, f(1)=1."""
        return LoopPath(lambda t: self.sampler(f(t)), self.winding, self.kind, self.label + " reparam")


@dataclass(frozen=True, eq=False)
class HolonomyResult:
    holonomy: np.ndarray
    loschmidt: complex
    phase: float
    gen_fn: float
    steps_used: int
    est_error: float

    @property
    def z2_phase(self) -> float:
        return z2_phase(self.loschmidt)


def _ordered_product(ops: SpinOperators, path: LoopPath, chi_value: float, steps: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, steps + 1)
    theta, phi = path.angles(t)
    t_mid = 0.5 * (t[1:] + t[:-1])
    theta_mid, phi_mid = path.angles(t_mid)
    a_theta, a_phi = _connection_stack(ops, theta_mid, phi_mid, chi_value)
    # exponent -A along each step, anti-Hermitian; i * exponent is Hermitian
    gen = 1j * -(a_theta * np.diff(theta)[:, None, None] + a_phi * np.diff(phi)[:, None, None])
    gen = 0.5 * (gen + np.conj(np.swapaxes(gen, -1, -2)))
    w, v = np.linalg.eigh(gen)
    factors = (v * np.exp(-1j * w)[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    out = np.eye(ops.dim, dtype=complex)
    for f in factors:
        out = f @ out
    return out


def holonomy(
    ops: SpinOperators,
    spec: ThermalSpec,
    path: LoopPath,
    steps: int | None = None,
    tol: float = 1e-8,
    max_steps: int = 2 ** 16,
) -> HolonomyResult:
    """Path-ordered ``P exp(-oint A_U)`` by midpoint exponentials, later factors on the left.

    With ``steps`` given, the result uses ``2 * steps`` and ``est_error`` compares
    against ``steps``. Otherwise the step count doubles from 256 until the
    estimate drops below ``tol``.
    """
    if ops.spin != spec.j:
        raise UhlmannError("operators and thermal spec disagree on j")
    chi_value = chi(spec)
    n = 256 if steps is None else steps
    if n < 16:
        raise UhlmannError("steps must be >= 16")
    coarse = _ordered_product(ops, path, chi_value, n)
    while True:
        fine = _ordered_product(ops, path, chi_value, 2 * n)
        est = float(np.max(np.abs(fine - coarse)))
        if steps is not None or est <= tol:
            break
        if 4 * n > max_steps:
            raise NotConverged(f"step doubling error {est:.3e} above {tol:g} at {2 * n} steps")
        n, coarse = 2 * n, fine
    rho0 = density_matrix(spec, path.start()).rho
    g = complex(np.trace(rho0 @ fine))
    return HolonomyResult(fine, g, principal_phase(g), generating_function(g), 2 * n, est)


# --- curvature ---------------------------------------------------------------


def curvature(ops: SpinOperators, spec: ThermalSpec, a: SphereAngles) -> np.ndarray:
    """Coefficient of d theta ^ d phi: ``i tanh^2(beta omega0 / 2) sin(theta) H / omega0``."""
    t2 = math.tanh(0.5 * spec.beta * spec.omega0) ** 2
    return 1j * t2 * math.sin(a.theta) * field_direction_operator(ops, a.theta, a.phi)


def curvature_fd(ops: SpinOperators, spec: ThermalSpec, a: SphereAngles, h: float = 1e-5) -> np.ndarray:
    """``d A + A ^ A`` from the closed-form connection by central differences.

    ``(d A)_{theta phi} = d_theta A_phi - d_phi A_theta`` and
    ``(A ^ A)_{theta phi} = A_theta A_phi - A_phi A_theta``.
    """
    return _curvature_fd_stack(ops, chi(spec), a.theta, a.phi, h)


def _curvature_fd_stack(ops, c, theta, phi, h):
    _, ap_plus = _connection_stack(ops, theta + h, phi, c)
    _, ap_minus = _connection_stack(ops, theta - h, phi, c)
    at_plus, _ = _connection_stack(ops, theta, phi + h, c)
    at_minus, _ = _connection_stack(ops, theta, phi - h, c)
    at, ap = _connection_stack(ops, theta, phi, c)
    d_a = (ap_plus - ap_minus) / (2 * h) - (at_plus - at_minus) / (2 * h)
    return d_a + at @ ap - ap @ at


def sphere_integral(f: Callable[[np.ndarray, np.ndarray], np.ndarray], n_theta: int, n_phi: int):
    """Midpoint rule in theta on (0, pi), periodic trapezoid in phi on [0, 2 pi).

    ``f`` takes meshgrids of theta and phi (shape ``(n_theta, n_phi)``) and returns
    values with those leading dimensions.
    """
    dtheta, dphi = np.pi / n_theta, 2 * np.pi / n_phi
    theta = (np.arange(n_theta) + 0.5) * dtheta
    phi = np.arange(n_phi) * dphi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    vals = np.asarray(f(tt, pp))
    return vals.sum(axis=(0, 1)) * dtheta * dphi


def chern_number(ops: SpinOperators, spec: ThermalSpec, grid=(128, 128), method: str = "closed") -> float:
    """``(i / 2 pi) * integral of Tr F_U`` over the sphere.

    ``method="closed"`` uses the tanh^2 curvature, ``"fd"`` the finite-difference one.
    """
    n_theta, n_phi = grid
    if n_theta < 8 or n_phi < 8:
        raise UhlmannError("grid must be at least 8 x 8")
    if method == "closed":
        t2 = math.tanh(0.5 * spec.beta * spec.omega0) ** 2

        def tr_f(tt, pp):
            h = field_direction_operator(ops, tt[..., None, None], pp[..., None, None])
            return 1j * t2 * np.sin(tt) * np.trace(h, axis1=-2, axis2=-1)
    elif method == "fd":
        c = chi(spec)

        def tr_f(tt, pp):
            return np.trace(_curvature_fd_stack(ops, c, tt, pp, 1e-5), axis1=-2, axis2=-1)
    else:
        raise UhlmannError(f"unknown method {method!r}")
    total = complex(sphere_integral(tr_f, n_theta, n_phi)) * 1j / (2 * np.pi)
    if abs(total.imag) > 1e-9:
        raise ArithmeticError(f"Chern integral has imaginary part {total.imag:.3e}")
    return total.real
