import math

import numpy as np
import pytest

from mextoda.fields import CoeffFn, ddx
from mextoda.hierarchy import (
    AnomalyExceeded,
    FlowSpec,
    LatticeState,
    evolve,
    flow_commutator_residual,
    harmonic,
    lax_hamiltonian,
    lax_rhs,
    sato_residual,
    step_rk4,
    two_representation_residual,
    velocity,
)
from mextoda.dressing import solve_dressing
from fractions import Fraction

from conftest import XS, at
import oracles

TODA = [FlowSpec(0, n) for n in range(3)]
CLOSED = [FlowSpec(0, 0), FlowSpec(0, 1), FlowSpec(0, 2), FlowSpec(1, 0)]
ANOMALOUS = [FlowSpec(1, 1), FlowSpec(1, 2), FlowSpec(2, 0), FlowSpec(2, 1), FlowSpec(2, 2)]


def test_harmonic_numbers():
    assert harmonic(0) == 0
    assert harmonic(3) == Fraction(11, 6)
    with pytest.raises(ValueError):
        harmonic(-1)


def test_flowspec_parse():
    assert FlowSpec.parse("2,1") == FlowSpec(2, 1)
    with pytest.raises(ValueError):
        FlowSpec(3, 0)


def test_toda_hand_formula(trig_state):
    r = lax_rhs(trig_state, None, FlowSpec(0, 0))
    want = np.array([oracles.toda00(x) for x in XS])
    np.testing.assert_allclose(at(r.du), want[:, 0], atol=1e-15)
    np.testing.assert_allclose(at(r.dv), want[:, 1], atol=1e-15)


# frozen from oracles.toda_flow (pointwise operator products)
FROZEN_FLOWS = {
    1: ([0.006713502491859424, -0.03129083307634513, 0.011863735710811785],
        [0.019734025302185338, -0.012600709195298638, -0.008857604976505442]),
    2: ([0.02117964015016416, -0.012705978410269103, -0.006032101693561109],
        [0.007968176676143352, -0.031995435146467265, 0.01245798258652943]),
}


@pytest.mark.parametrize("n", [1, 2])
def test_toda_flows_frozen(trig_state, n):
    r = lax_rhs(trig_state, None, FlowSpec(0, n))
    du, dv = FROZEN_FLOWS[n]
    np.testing.assert_allclose(at(r.du).real, du, atol=1e-15)
    np.testing.assert_allclose(at(r.dv).real, dv, atol=1e-15)
    odu, odv = oracles.toda_flow(n)
    np.testing.assert_allclose(at(r.du), [odu(x) for x in XS], atol=1e-15)


def test_spatial_flow(trig_state):
    r = lax_rhs(trig_state, None, FlowSpec(1, 0))
    eps = trig_state.grid.epsilon
    assert (r.du - ddx(trig_state.u) * (2 * eps)).norm() < 1e-9
    assert (r.dv - ddx(trig_state.v) * (2 * eps)).norm() < 1e-9


@pytest.mark.parametrize("f", CLOSED, ids=str)
def test_closed_flows(state1, dressing1, f):
    assert lax_rhs(state1, None, f).anomaly < 1e-6
    assert two_representation_residual(state1, dressing1, f) < 1e-8


@pytest.mark.parametrize("f", ANOMALOUS, ids=str)
def test_anomalous_flows_are_flagged(state1, dressing1, f):
    # with all eps d terms in the plus projection a Lambda^-2 term survives
    assert lax_rhs(state1, None, f, check=False).anomaly > 1e-3
    with pytest.raises(AnomalyExceeded):
        lax_rhs(state1, None, f)
    assert two_representation_residual(state1, dressing1, f) < 1e-8


def test_flow_real_on_real_state(state1):
    for f in CLOSED:
        du, dv = velocity(state1, f)
        assert du.is_real() and dv.is_real()


def test_zero_steps(state1):
    traj = evolve(state1, FlowSpec(0, 0), 0.01, 0)
    assert len(traj.states) == 1 and traj.states[0] is state1


def test_rk4_order(state1):
    # halving dt reduces the one-step error by about 2^5
    f = FlowSpec(0, 0)
    ref = state1
    for _ in range(8):
        ref = step_rk4(ref, f, 0.0125)
    a = step_rk4(state1, f, 0.1)
    b = step_rk4(step_rk4(state1, f, 0.05), f, 0.05)
    ea, eb = (a.u - ref.u).norm(), (b.u - ref.u).norm()
    assert ea / eb > 16


def test_toda_conserves_lax_hamiltonians(state1):
    traj = evolve(state1, FlowSpec(0, 0), 0.05, 10)
    for k, vals in traj.observables.items():
        assert np.ptp(vals) / max(abs(vals[0]), 1) < 1e-10, k


def test_lax_hamiltonian_frozen(trig_state):
    # frozen from oracles.h0 by trapezoid quadrature
    assert lax_hamiltonian(trig_state, 1) == pytest.approx(6.368181747744395, abs=1e-13)
    assert lax_hamiltonian(trig_state, 2) == pytest.approx(0.003523437033987488, abs=1e-15)


@pytest.mark.parametrize("pair", [(FlowSpec(0, 0), FlowSpec(0, 1)), (FlowSpec(0, 1), FlowSpec(1, 0))], ids=str)
def test_flows_commute(state1, pair):
    assert flow_commutator_residual(state1, *pair) < 5e-5


def test_commutator_detects_noncommuting_fields(state1):
    # sanity: a field that does not commute with Toda gives a large bracket
    from mextoda.hierarchy import vector_field_bracket
    def shear(s):
        return s.u * s.u, CoeffFn.zero(s.grid)
    b = vector_field_bracket(state1, lambda s: velocity(s, FlowSpec(0, 0)), shear, 1e-3)
    assert max(b[0].norm(), b[1].norm()) > 1e-3


@pytest.mark.parametrize("f", [FlowSpec(0, 0), FlowSpec(1, 0)], ids=str)
def test_sato(state1, f):
    assert max(sato_residual(state1, f)) < 5e-5


def test_state_json_roundtrip(state1):
    s = LatticeState(state1.u, state1.v, {(0, 1): 0.5})
    back = LatticeState.from_json(s.to_json(), s.grid)
    assert back.times == {(0, 1): 0.5}
    assert (back.u - s.u).norm() < 1e-15
