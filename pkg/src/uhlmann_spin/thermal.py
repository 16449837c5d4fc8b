"""Canonical density matrices, amplitudes and purified states of a spin-j paramagnet."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidFrequency, NonPositiveTemperature, NonUnitaryPhase, UhlmannError
from .spin import SphereAngles, SpinJ, build_spin_operators, gauge_V

UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class ThermalSpec:
    """Temperature (k_B = 1), Larmor frequency and spin of the ensemble."""

    temperature: float
    omega0: float
    j: SpinJ

    def __post_init__(self):
        object.__setattr__(self, "j", SpinJ.from_value(self.j))
        if not self.temperature > 0:
            raise NonPositiveTemperature(f"temperature must be > 0, got {self.temperature}")
        if not np.isfinite(self.temperature):
            raise NonPositiveTemperature("temperature must be finite; use the limit queries")
        if not self.omega0 > 0:
            raise InvalidFrequency(f"omega0 must be positive, got {self.omega0}")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature

    @property
    def weights(self) -> np.ndarray:
        """Boltzmann weights ``exp(-beta omega0 m) / Z`` in descending-m order."""
        ms = self.j.ms
        # shift by the ground-state energy so the exponent is never positive
        w = np.exp(-self.beta * self.omega0 * (ms - ms.min()))
        return w / w.sum()

    @property
    def partition_function(self) -> float:
        return float(np.sum(np.exp(-self.beta * self.omega0 * self.j.ms)))

    def weight(self, m) -> float:
        return float(self.weights[self.j.index(m)])


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    rho: np.ndarray = field(repr=False)
    eigvals: np.ndarray
    eigvecs: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def from_matrix(cls, rho: np.ndarray) -> "DensityMatrix":
        """Wrap an arbitrary positive-definite, unit-trace matrix."""
        rho = np.asarray(rho, dtype=complex)
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12 or abs(np.trace(rho) - 1) > 1e-12:
            raise UhlmannError("rho must be Hermitian with unit trace")
        w, v = np.linalg.eigh(rho)
        if np.any(w <= 0):
            raise UhlmannError("rho must be positive definite")
        return cls(rho, w, v)


@dataclass(frozen=True, eq=False)
class Amplitude:
    w: np.ndarray
    phase_factor: np.ndarray


@dataclass(frozen=True, eq=False)
class PurifiedState:
    """Vector in system (x) ancilla, flattened with the system index as the slow axis."""

    vector: np.ndarray
    dim: int

    def partial_trace_ancilla(self) -> np.ndarray:
        psi = self.vector.reshape(self.dim, self.dim)
        return psi @ psi.conj().T


def density_matrix(spec: ThermalSpec, a: SphereAngles) -> DensityMatrix:
    """``rho = V exp(-beta omega0 J_z) V^dagger / Z`` with the analytic eigenvectors."""
    ops = build_spin_operators(spec.j)
    v = gauge_V(ops, a)
    lam = spec.weights
    rho = (v * lam) @ v.conj().T
    return DensityMatrix(rho, lam, v)


def sqrt_density(dm: DensityMatrix) -> np.ndarray:
    return (dm.eigvecs * np.sqrt(dm.eigvals)) @ dm.eigvecs.conj().T


def _check_unitary(u: np.ndarray) -> None:
    if np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))) > UNITARY_TOL:
        raise NonUnitaryPhase("phase factor is not unitary to 1e-10")


def purify(dm: DensityMatrix, phase: np.ndarray) -> tuple[Amplitude, PurifiedState]:
    """Amplitude ``sqrt(rho) U`` and its purified state ``sum_i sqrt(l_i) |i> (x) U^T |i>``.

    The transpose is taken in the eigenbasis of rho: ``<k|U^T|i> = <i|U|k>``.
    """
    phase = np.asarray(phase, dtype=complex)
    _check_unitary(phase)
    amp = Amplitude(sqrt_density(dm) @ phase, phase)
    e = dm.eigvecs
    u_eig = e.conj().T @ phase @ e
    # row i of u_eig holds <i|U|k>, i.e. the eigenbasis components of U^T|i>
    ancilla_kets = u_eig @ e.T
    psi = np.sqrt(dm.eigvals)[:, None, None] * e.T[:, :, None] * ancilla_kets[:, None, :]
    return amp, PurifiedState(psi.sum(axis=0).reshape(-1), dm.dim)


def hilbert_schmidt(w1: np.ndarray, w2: np.ndarray) -> complex:
    """``Tr(W1^dagger W2)``."""
    return complex(np.trace(w1.conj().T @ w2))


def purified_overlap(psi1, psi2) -> complex:
    """``<W1|W2>`` of two purified states.

    Every overlap in the package goes through here. The ancilla factors are stored
    as plain kets (the eigenbasis transpose is applied when the state is built), so
    the ordinary inner product reproduces ``Tr(rho U2 U1^dagger)``.
    """
    v1 = psi1.vector if isinstance(psi1, PurifiedState) else np.asarray(psi1)
    v2 = psi2.vector if isinstance(psi2, PurifiedState) else np.asarray(psi2)
    return complex(np.vdot(v1, v2))
