import numpy as np
import pytest

from mextoda import hamiltonian as ham
from mextoda.fields import CoeffFn, exp_fn, random_field, shift
from mextoda.hierarchy import FlowSpec, LatticeState, evolve, lax_rhs

from conftest import XS, at
import oracles


def test_h01_hand_formula(trig_state):
    # h_{0,1} = (u^2 + e^v + e^{v(x+eps)}) / 2
    h = ham.density(trig_state, None, 0, 1).value
    want = [(oracles.u_fn(x) ** 2 + oracles.ev_fn(x) + oracles.ev_fn(x + 0.1)) / 2 for x in XS]
    np.testing.assert_allclose(at(h), want, atol=1e-15)


def test_frozen_hamiltonians(trig_state):
    # frozen from oracles.h0 (path sums, trapezoid rule)
    assert ham.hamiltonian(trig_state, 0, 1) == pytest.approx(6.368181747744395, abs=1e-13)
    assert ham.hamiltonian(trig_state, 0, 2) == pytest.approx(0.003523437033987488, abs=1e-15)


def test_gradient_of_h01(trig_state):
    # dH_{0,1}/du = u, dH_{0,1}/dv = e^v
    g = ham.density_grad(trig_state, 0, 1, J=24)
    assert (g.dHdu - trig_state.u).norm() < 1e-15
    assert (g.dHdv - exp_fn(trig_state.v)).norm() < 1e-15
    assert g.is_real()


def test_gradient_is_directional_derivative(state1):
    rng = np.random.default_rng(5)
    du, dv = random_field(state1.grid, rng), random_field(state1.grid, rng)
    fn = lambda u, v: ham.density_fn(u, v, 0, 2)
    g = ham.var_deriv(state1, fn)
    d = 2 * np.pi * ham.mean(ham.directional(state1, fn, du, dv))
    assert abs(ham.pairing(g, (du, dv)) - d) < 1e-15


def test_toda_is_eps_pb1(trig_state):
    g = ham.density_grad(trig_state, 0, 1, J=24)
    fu, fv = ham.pb1_flow(g)
    r = lax_rhs(trig_state, None, FlowSpec(0, 0))
    eps = trig_state.grid.epsilon
    assert max((fu * eps - r.du).norm(), (fv * eps - r.dv).norm()) < 1e-15


def _rand_grad(grid, seed):
    rng = np.random.default_rng(seed)
    return ham.VarGrad(random_field(grid, rng), random_field(grid, rng))


@pytest.mark.parametrize("bracket", ["pb1", "pb2"])
def test_brackets_skew(state1, bracket):
    a, b = _rand_grad(state1.grid, 1), _rand_grad(state1.grid, 2)
    flow = ham.pb1_flow if bracket == "pb1" else (lambda g: ham.pb2_flow(state1, g))
    assert abs(ham.pairing(a, flow(b)) + ham.pairing(b, flow(a))) < 1e-15


def test_log_densities_degenerate(state1):
    # h_{1,0} = 0 and H_{1,1} = -2 int u
    assert ham.density(state1, None, 1, 0).value.norm() < 1e-14
    assert abs(ham.hamiltonian(state1, 1, 1) + 2 * 2 * np.pi * ham.mean(state1.u).real) < 1e-12


@pytest.mark.parametrize("n", [0, 1])
def test_calibration_of_toda_flows(state1, n):
    c = ham.calibrate(state1, FlowSpec(0, n))
    assert (c.offset, c.scale_name) == (1, "eps")
    assert c.residual < 1e-7


def test_spatial_flow_generated_by_minus_log(state1):
    # t_{1,0} = eps pb1(H_{2,1}): the log labels are exchanged
    fu, fv = ham.pb1_flow(ham.density_grad(state1, 2, 1))
    r = lax_rhs(state1, None, FlowSpec(1, 0))
    eps = state1.grid.epsilon
    assert max((fu * eps - r.du).norm(), (fv * eps - r.dv).norm()) < 1e-12


def test_recursion_branch0(state1):
    assert ham.recursion_residual(state1, None, 0, 1, offset=1) < 1e-7
    assert ham.recursion_residual(state1, None, 0, 1) > 1e-2


def test_tau_symmetry_toda(state1):
    assert ham.tau_symmetry_residual(state1, None, (0, 0), (0, 1)) < 1e-12
    assert ham.tau_symmetry_residual(state1, None, (0, 1), (1, 0), pairing="swapped") < 1e-12


def test_tau_report_short(state1):
    traj = evolve(state1, FlowSpec(0, 0), 0.01, 10, observables={})
    rep = ham.tau_report(traj, stride=5)
    assert rep.closedness < 1e-12 and rep.v_relation < 1e-10


@pytest.mark.parametrize("b", [0, 1, 2])
def test_densities_periodic(state1, b):
    for n in range(4):
        assert ham.density(state1, None, b, n).secular_norm() < 1e-7
