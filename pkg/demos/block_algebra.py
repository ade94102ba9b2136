"""Orlov-Schulman operators and the computable part of the Block algebra table."""
import numpy as np

from mextoda import GridSpec, addsym, random_field, solve_dressing
from mextoda.hierarchy import LatticeState

grid = GridSpec()
rng = np.random.default_rng(1)
state = LatticeState(random_field(grid, rng), random_field(grid, rng))
P = solve_dressing(state.u, state.v, 10)
os_ = addsym.orlov_schulman(P, {}, state=state)

for k, r in addsym.canonical_residuals(os_, P).items():
    print(f"{k:28s} {r:.2e}")

for a, b in [((0, 2), (1, 0)), ((0, 1), (1, 1)), ((1, 0), (1, 1)), ((0, 2), (1, 1))]:
    c = addsym.measured_constant(os_, a, b, 1e-3)
    print(f"[{a}, {b}]: measured {c[0]: .6f}  predicted {addsym.structure_constant(a, b)}")
