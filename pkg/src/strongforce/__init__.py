"""Numerical laboratory for N-body problems with homogeneous strong-force potentials."""

from .core import AlphaSystem, InvariantRecord, PhaseState, invariants
from .threshold import SetLabel, classify_state, e_omega, k_omega

__all__ = [
    "AlphaSystem",
    "InvariantRecord",
    "PhaseState",
    "SetLabel",
    "classify_state",
    "e_omega",
    "invariants",
    "k_omega",
]
