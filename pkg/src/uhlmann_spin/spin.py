"""Spin-j matrices, rotations, the field Hamiltonian and Wigner d-functions.

All matrices use the descending-m basis ``|j, j>, |j, j-1>, ..., |j, -j>``,
so ``J_z = diag(j, ..., -j)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import IndexOutOfRange, InvalidFrequency, NonHermitianInput

HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class SpinJ:
    """Spin quantum number stored as the integer ``two_j`` = 2j."""

    two_j: int

    def __post_init__(self):
        if int(self.two_j) != self.two_j or self.two_j < 0:
            raise ValueError(f"two_j must be a nonnegative integer, got {self.two_j!r}")
        object.__setattr__(self, "two_j", int(self.two_j))

    @classmethod
    def from_value(cls, j) -> "SpinJ":
        """Build from ``0.5``, ``"3/2"``, ``Fraction(1, 2)``, ``2`` or an existing SpinJ."""
        if isinstance(j, SpinJ):
            return j
        frac = Fraction(str(j).strip()) if isinstance(j, str) else Fraction(j).limit_denominator(1000)
        two_j = 2 * frac
        if two_j.denominator != 1:
            raise ValueError(f"j must be a multiple of 1/2, got {j!r}")
        return cls(int(two_j))

    @property
    def j(self) -> float:
        return self.two_j / 2

    @property
    def dim(self) -> int:
        return self.two_j + 1

    @property
    def ms(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order (descending)."""
        return self.j - np.arange(self.dim)

    def index(self, m) -> int:
        """Basis position of magnetic number ``m``."""
        two_m = 2 * Fraction(m).limit_denominator(1000)
        if two_m.denominator != 1 or abs(two_m) > self.two_j or (self.two_j - two_m) % 2:
            raise IndexOutOfRange(f"m={m} is not a magnetic number of j={self}")
        return int((self.two_j - two_m) // 2)

    def __str__(self) -> str:
        return str(self.two_j // 2) if self.two_j % 2 == 0 else f"{self.two_j}/2"


@dataclass(frozen=True)
class SphereAngles:
    theta: float
    phi: float = 0.0


@dataclass(frozen=True, eq=False)
class SpinOperators:
    spin: SpinJ
    jx: np.ndarray = field(repr=False)
    jy: np.ndarray = field(repr=False)
    jz: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.spin.dim


@lru_cache(maxsize=None)
def _spin_matrices(two_j: int):
    spin = SpinJ(two_j)
    ms = spin.ms
    j = spin.j
    jp = np.zeros((spin.dim, spin.dim), dtype=complex)
    # J+ |j n> = sqrt((j - n)(j + n + 1)) |j n+1>; row k-1 holds m = n + 1.
    for k in range(1, spin.dim):
        n = ms[k]
        jp[k - 1, k] = np.sqrt((j - n) * (j + n + 1))
    jm = jp.conj().T
    jx = (jp + jm) / 2
    jy = (jp - jm) / 2j
    jz = np.diag(ms).astype(complex)
    for mat in (jx, jy, jz):
        mat.setflags(write=False)
    return jx, jy, jz


def build_spin_operators(j) -> SpinOperators:
    """Return J_x, J_y, J_z for spin ``j`` (any value accepted by :meth:`SpinJ.from_value`)."""
    spin = SpinJ.from_value(j)
    jx, jy, jz = _spin_matrices(spin.two_j)
    return SpinOperators(spin, jx, jy, jz)


def is_hermitian(mat: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(mat - mat.conj().T), initial=0.0) <= tol)


def hermitian_exp(generator: np.ndarray, scale: float) -> np.ndarray:
    """Compute ``exp(-i * scale * generator)`` for a Hermitian generator.

    Uses the eigendecomposition of the generator, so the result is unitary to
    machine precision.
    """
    generator = np.asarray(generator, dtype=complex)
    if not is_hermitian(generator):
        raise NonHermitianInput("generator is not Hermitian to 1e-10")
    if scale == 0:
        return np.eye(generator.shape[0], dtype=complex)
    w, v = np.linalg.eigh((generator + generator.conj().T) / 2)
    return (v * np.exp(-1j * scale * w)) @ v.conj().T


@lru_cache(maxsize=None)
def _jy_eigensystem(two_j: int):
    _, jy, _ = _spin_matrices(two_j)
    w, v = np.linalg.eigh(jy)
    return w, v


def rotation_y(spin: SpinJ, angle) -> np.ndarray:
    """``exp(-i angle J_y)``; accepts a scalar or an array of angles (stacked result)."""
    w, v = _jy_eigensystem(spin.two_j)
    angle = np.asarray(angle, dtype=float)
    if angle.ndim == 0 and angle == 0:
        return np.eye(spin.dim, dtype=complex)
    phases = np.exp(-1j * angle[..., None] * w)
    return (v * phases[..., None, :]) @ v.conj().T


def rotation_z(spin: SpinJ, angle) -> np.ndarray:
    """``exp(-i angle J_z)``; J_z is diagonal so this is exact."""
    angle = np.asarray(angle, dtype=float)
    diag = np.exp(-1j * angle[..., None] * spin.ms)
    return diag[..., :, None] * np.eye(spin.dim)


def rotation_R(ops: SpinOperators, a: SphereAngles) -> np.ndarray:
    """``R(theta, phi) = exp(-i phi J_z) exp(-i theta J_y)``."""
    return rotation_z(ops.spin, a.phi) @ rotation_y(ops.spin, a.theta)


def gauge_V(ops: SpinOperators, a: SphereAngles) -> np.ndarray:
    """``V(theta, phi) = R(theta, phi) exp(i phi J_z)``; columns are the energy eigenstates."""
    return rotation_R(ops, a) @ rotation_z(ops.spin, -a.phi)


def field_direction_operator(ops: SpinOperators, theta, phi) -> np.ndarray:
    """``J_x sin(theta) cos(phi) + J_y sin(theta) sin(phi) + J_z cos(theta)``."""
    return (ops.jx * (np.sin(theta) * np.cos(phi))
            + ops.jy * (np.sin(theta) * np.sin(phi))
            + ops.jz * np.cos(theta))


def hamiltonian(ops: SpinOperators, a: SphereAngles, omega0: float) -> np.ndarray:
    if not omega0 > 0:
        raise InvalidFrequency(f"omega0 must be positive, got {omega0}")
    return omega0 * field_direction_operator(ops, a.theta, a.phi)


def wigner_d_matrix(j, Theta: float) -> np.ndarray:
    """Real matrix ``d^j(Theta)`` with rows/columns in descending-m order."""
    spin = SpinJ.from_value(j)
    d = rotation_y(spin, Theta)
    if np.max(np.abs(d.imag), initial=0.0) > 1e-10:
        raise ArithmeticError("exp(-i Theta J_y) acquired an imaginary part")
    return d.real


def wigner_d(j, m, mp, Theta: float) -> float:
    """Element ``<j m| exp(-i Theta J_y) |j mp>``."""
    spin = SpinJ.from_value(j)
    row, col = spin.index(m), spin.index(mp)
    return float(wigner_d_matrix(spin, Theta)[row, col])
