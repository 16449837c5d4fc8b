"""Qubit-register preparation of the thermal purified state and its evolution.

Register layout: ``2n`` qubits, the system register on the high-order bits and
the ancilla on the low-order bits, so basis index = ``i_sys * 2**n + i_anc``.
Qubit pair ``k`` (1-based) is system qubit ``k`` together with ancilla qubit
``k``; pair 1 is the most significant. Register value ``i`` encodes the spin
state ``m = -j + i`` (ascending m), with values above ``2j`` left empty.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmbeddingMismatch, RegisterTooLarge, UhlmannError
from .spin import SpinJ, build_spin_operators
from .thermal import ThermalSpec, purified_overlap
from .protocol import ProtocolSchedule, ancilla_weight

MAX_QUBITS = 24


def qubits_for(j) -> int:
    """Smallest n with ``2j + 1 <= 2**n`` (at least one qubit)."""
    dim = SpinJ.from_value(j).dim
    return max(1, math.ceil(math.log2(dim)))


@dataclass(frozen=True, eq=False)
class WeightVector:
    p: np.ndarray
    n: int

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        if p.shape != (2 ** self.n,):
            raise UhlmannError(f"need {2 ** self.n} weights for n={self.n}, got {p.shape}")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise UhlmannError("weights must be nonnegative and sum to 1")


def boltzmann_weights(spec: ThermalSpec, n: int | None = None) -> WeightVector:
    """Register weights ``p_i = l_{m=-j+i}``; the single place where descending-m turns ascending."""
    n = qubits_for(spec.j) if n is None else n
    if 2 ** n < spec.j.dim:
        raise EmbeddingMismatch(f"{n} qubits cannot hold {spec.j.dim} levels")
    p = np.zeros(2 ** n)
    p[: spec.j.dim] = spec.weights[::-1]
    return WeightVector(p, n)


@dataclass(frozen=True, eq=False)
class AngleTree:
    """Angles in heap order: ``alphas[k - 1]`` is alpha_k, node k has children 2k and 2k+1."""

    alphas: np.ndarray
    n: int

    def level(self, k: int) -> np.ndarray:
        return self.alphas[2 ** (k - 1) - 1: 2 ** k - 1]


def angles_from_weights(w: WeightVector) -> AngleTree:
    """Invert the cos/sin product parameterisation by splitting probability mass in halves."""
    n = w.n
    alphas = np.zeros(2 ** n - 1)
    for level in range(1, n + 1):
        block = 2 ** (n - level + 1)
        for c in range(2 ** (level - 1)):
            seg = w.p[c * block:(c + 1) * block]
            left, right = seg[: block // 2].sum(), seg[block // 2:].sum()
            # zero-mass nodes fall out as atan2(0, 0) = 0
            alphas[2 ** (level - 1) - 1 + c] = math.atan2(math.sqrt(right), math.sqrt(left))
    return AngleTree(alphas, n)


def amplitudes_from_angles(tree: AngleTree) -> np.ndarray:
    """Forward map: ``sqrt(p_i)`` as a product of cos/sin along the binary path of i."""
    n = tree.n
    out = np.ones(2 ** n)
    for i in range(2 ** n):
        bits = [(i >> (n - 1 - q)) & 1 for q in range(n)]
        prefix = 0
        for level, b in enumerate(bits, start=1):
            alpha = tree.alphas[2 ** (level - 1) - 1 + prefix]
            out[i] *= math.sin(alpha) if b else math.cos(alpha)
            prefix = 2 * prefix + b
    return out


@dataclass(frozen=True)
class RotationGate:
    pair: int
    controls: tuple
    alpha: float

    def control_string(self) -> str:
        return "".join(str(b) for b in self.controls) or "-"


@dataclass(frozen=True, eq=False)
class PrepCircuit:
    gates: tuple
    n: int

    @property
    def num_qubits(self) -> int:
        return 2 * self.n


def build_prep_circuit(tree: AngleTree) -> PrepCircuit:
    """One doubled-ket rotation per tree node, ordered by level then control pattern."""
    gates = []
    for level in range(1, tree.n + 1):
        for c, alpha in enumerate(tree.level(level)):
            controls = tuple((c >> (level - 2 - q)) & 1 for q in range(level - 1))
            gates.append(RotationGate(level, controls, float(alpha)))
    return PrepCircuit(tuple(gates), tree.n)


def pair_rotation(alpha: float) -> np.ndarray:
    """Rotation in span{|00>, |11>} of one (system, ancilla) qubit pair; identity on |01>, |10>."""
    c, s = math.cos(alpha), math.sin(alpha)
    u = np.eye(4, dtype=complex)
    u[0, 0], u[3, 0], u[0, 3], u[3, 3] = c, s, -s, c
    return u


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray = field(repr=False)
    n: int

    def doubled(self) -> np.ndarray:
        """Amplitudes at the doubled indices ``|i>|i>``."""
        idx = np.arange(2 ** self.n)
        return self.amplitudes[idx * 2 ** self.n + idx]


def apply_gate(state: np.ndarray, gate: RotationGate, n: int) -> np.ndarray:
    psi = state.reshape([2] * (2 * n)).copy()
    sel = [slice(None)] * (2 * n)
    for q, b in enumerate(gate.controls):
        sel[q] = b
        sel[n + q] = b
    q = gate.pair - 1
    sub = psi[tuple(sel)]
    # remaining axes keep their relative order; locate the target pair in the sub-tensor
    free = [ax for ax in range(2 * n) if not isinstance(sel[ax], int)]
    a_sys, a_anc = free.index(q), free.index(n + q)
    moved = np.moveaxis(sub, (a_sys, a_anc), (-2, -1))
    shape = moved.shape
    moved = (moved.reshape(-1, 4) @ pair_rotation(gate.alpha).T).reshape(shape)
    psi[tuple(sel)] = np.moveaxis(moved, (-2, -1), (a_sys, a_anc))
    return psi.reshape(-1)


def gate_matrix(gate: RotationGate, n: int) -> np.ndarray:
    """Full-register unitary of one gate (for verification; 4**n x 4**n)."""
    dim = 4 ** n
    return np.stack([apply_gate(col, gate, n) for col in np.eye(dim, dtype=complex)], axis=1)


def simulate(circ: PrepCircuit) -> StateVector:
    if circ.num_qubits > MAX_QUBITS:
        raise RegisterTooLarge(f"{circ.num_qubits} qubits exceeds the {MAX_QUBITS}-qubit guard")
    psi = np.zeros(4 ** circ.n, dtype=complex)
    psi[0] = 1.0
    for gate in circ.gates:
        psi = apply_gate(psi, gate, circ.n)
    return StateVector(psi, circ.n)


def embedded_jy(j, n: int) -> np.ndarray:
    """``J_y`` on the 2**n register (ascending m), zero on padding levels."""
    spin = SpinJ.from_value(j)
    if 2 ** n < spin.dim:
        raise EmbeddingMismatch(f"{n} qubits cannot hold {spin.dim} levels")
    jy = build_spin_operators(spin).jy[::-1, ::-1]
    out = np.zeros((2 ** n, 2 ** n), dtype=complex)
    out[: spin.dim, : spin.dim] = jy
    return out


def _register_exp(jy_reg: np.ndarray, angle: float) -> np.ndarray:
    w, v = np.linalg.eigh(jy_reg)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


def register_evolution(circ: PrepCircuit, spec: ThermalSpec, sched: ProtocolSchedule, t: float) -> np.ndarray:
    """Register state at time t: ``(U_S e^{-i theta J_y}) (x) (U_A e^{-i theta J_y})`` on the prepared state."""
    if circ.num_qubits > MAX_QUBITS:
        raise RegisterTooLarge(f"{circ.num_qubits} qubits exceeds the {MAX_QUBITS}-qubit guard")
    jy_reg = embedded_jy(spec.j, circ.n)
    eta = ancilla_weight(spec)
    big_theta, theta = sched.integrated_rate(t), sched.theta_of_t(t)
    k_sys = _register_exp(jy_reg, big_theta + theta)
    k_anc = _register_exp(jy_reg, eta * big_theta + theta)
    psi = simulate(circ).amplitudes.reshape(2 ** circ.n, 2 ** circ.n)
    return (k_sys @ psi @ k_anc.T).reshape(-1)


def run_protocol_on_register(circ: PrepCircuit, spec: ThermalSpec, sched: ProtocolSchedule) -> complex:
    """``<W(0)|W(1)>`` computed entirely on the qubit register."""
    w0 = simulate(circ).amplitudes
    return purified_overlap(w0, register_evolution(circ, spec, sched, 1.0))


def prep_circuit_for(spec: ThermalSpec, n: int | None = None) -> PrepCircuit:
    return build_prep_circuit(angles_from_weights(boltzmann_weights(spec, n)))


def format_circuit(circ: PrepCircuit) -> str:
    lines = [f"ROT pair={g.pair} controls={g.control_string()} alpha={g.alpha:.12g}" for g in circ.gates]
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> PrepCircuit:
    gates = []
    for line in text.splitlines():
        if not line.strip():
            continue
        head, *fields = line.split()
        kv = dict(f.split("=", 1) for f in fields)
        if head != "ROT" or set(kv) != {"pair", "controls", "alpha"}:
            raise UhlmannError(f"malformed circuit line: {line!r}")
        controls = () if kv["controls"] == "-" else tuple(int(c) for c in kv["controls"])
        gates.append(RotationGate(int(kv["pair"]), controls, float(kv["alpha"])))
    n = max(g.pair for g in gates)
    return PrepCircuit(tuple(gates), n)
