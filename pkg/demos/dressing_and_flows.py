"""Dress a random periodic state, check the Lax flows and watch H_{0,n} along t_{0,0}."""
import numpy as np

from mextoda import FlowSpec, GridSpec, evolve, lax_rhs, random_field, solve_dressing
from mextoda import hamiltonian as ham
from mextoda.dressing import conjugation_residual
from mextoda.hierarchy import LatticeState

grid = GridSpec()
rng = np.random.default_rng(0)
state = LatticeState(random_field(grid, rng), random_field(grid, rng))

P = solve_dressing(state.u, state.v, 10)
print("S Lambda S^-1 - L, Sbar Lambda^-1 Sbar^-1 - L: %.2e %.2e" % conjugation_residual(P))

for a in range(3):
    for n in range(3):
        r = lax_rhs(state, None, FlowSpec(a, n), check=False)
        print(f"t_{a},{n}: |du| {r.du.norm():.3e}  anomaly {r.anomaly:.2e}")

obs = {f"H_0,{n}": (lambda s, n=n: ham.hamiltonian(s, 0, n)) for n in range(3)}
traj = evolve(state, FlowSpec(0, 0), 0.01, 20, observables=obs)
for k, vals in traj.observables.items():
    print(f"{k}: start {vals[0]: .12f}  drift {np.ptp(np.asarray(vals, dtype=float)):.1e}")
