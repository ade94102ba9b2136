"""Numerical verification of the modified extended Toda hierarchy.

Modules: :mod:`fields` (x-polynomial Fourier coefficients), :mod:`opalg`
(difference-operator algebra), :mod:`dressing`, :mod:`hierarchy` (Lax
flows), :mod:`hamiltonian` (densities, brackets, tau function),
:mod:`addsym` (Orlov-Schulman operators and Block flows), :mod:`cli`.
"""
from .fields import CoeffFn, GridSpec, MethError, random_field
from .hierarchy import FlowSpec, LatticeState, evolve, lax_rhs
from .dressing import solve_dressing

__version__ = "0.1.0"

__all__ = [
    "CoeffFn",
    "GridSpec",
    "MethError",
    "random_field",
    "FlowSpec",
    "LatticeState",
    "evolve",
    "lax_rhs",
    "solve_dressing",
]
