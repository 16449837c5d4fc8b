"""Uhlmann holonomy, Loschmidt amplitudes and finite-temperature phase transitions of spin-j systems."""
from .errors import UhlmannError
from .spin import SpinJ, SphereAngles, build_spin_operators, wigner_d, wigner_d_matrix
from .thermal import ThermalSpec, density_matrix, purify
from .uhlmann import LoopPath, chern_number, chi, connection_general, connection_spin_j, curvature, holonomy
from .analytic import find_tqpt_zeros, loschmidt_great_circle, loschmidt_half, loschmidt_spin1, tstar_half
from .protocol import ProtocolSchedule, protocol_fidelity
from .circuit import prep_circuit_for, run_protocol_on_register

__version__ = "0.1.0"
