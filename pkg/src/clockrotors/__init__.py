"""Chiral clock rotor chains: NESS currents, heat flows, correlations and ground-state criticality."""
from .clockops import ClockParams
from .groundstate import binder_curve, binder_point, lowest_eigenpairs
from .infotheory import AnnealConfig, Partition, global_discord, mutual_information, negativity
from .lindblad import BathConfig, build_liouvillian, enumerate_transitions, steady_state
from .model import CCMParams, Variant, build_hamiltonian
from .observables import heat_currents, solve_ness, steady_currents

__all__ = [
    "AnnealConfig",
    "BathConfig",
    "CCMParams",
    "ClockParams",
    "Partition",
    "Variant",
    "binder_curve",
    "binder_point",
    "build_hamiltonian",
    "build_liouvillian",
    "enumerate_transitions",
    "global_discord",
    "heat_currents",
    "lowest_eigenpairs",
    "mutual_information",
    "negativity",
    "solve_ness",
    "steady_currents",
    "steady_state",
]

__version__ = "0.1.0"
