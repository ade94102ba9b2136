import numpy as np
import pytest

from mextoda import addsym
from mextoda.dressing import solve_dressing
from mextoda.fields import CoeffFn
from mextoda.hierarchy import FlowSpec, LatticeState, lax_rhs
from mextoda.opalg import DiffOp, MixedOp, commutator, mixed_mul, op_mul, op_norm

from conftest import random_state


@pytest.fixture(scope="module")
def os1(state1, dressing1):
    return addsym.orlov_schulman(dressing1, {}, state=state1)


def test_recip_factorial():
    assert addsym.recip_factorial(-1) == 0 and addsym.recip_factorial(3) == 1 / 6


def test_gamma_zero_times(grid):
    G, Gb = addsym.build_gamma({}, grid)
    x = CoeffFn.x(grid) * (1 / grid.epsilon)
    assert G.order == 0 and (G.diff.coeff(-1) - x).norm() == 0
    assert (Gb.diff.coeff(1) + x).norm() == 0


@pytest.mark.parametrize("variant", addsym.GAMMA_VARIANTS)
def test_gamma_canonical(grid, variant):
    # [Lambda, Gamma] = 1 and [Lambda^-1, GammaBar] = 1 for any t_{0,n}
    G, Gb = addsym.build_gamma({(0, 1): 0.7, (0, 2): -0.3, (1, 0): 0.4}, grid, variant)
    one = MixedOp.lift(DiffOp.identity(grid))
    lam = MixedOp.lift(DiffOp.shift_op(1, grid))
    lami = MixedOp.lift(DiffOp.shift_op(-1, grid))
    assert op_norm(commutator(lam, G) - one) < 1e-14
    assert op_norm(commutator(lami, Gb) - one) < 1e-14


def test_gamma_off_slice_has_derivation(grid):
    G, _ = addsym.build_gamma({(1, 2): 0.5}, grid)
    assert G.order == 1
    assert not addsym.on_slice({(1, 2): 0.5}) and addsym.on_slice({(1, 0): 0.5})


def test_off_slice_rejected(dressing1):
    with pytest.raises(addsym.SliceViolation):
        addsym.orlov_schulman(dressing1, {(2, 0): 0.1})


def test_free_operator_M(grid):
    # u = 0, e^v = 1: direct conjugation S (x/eps) Lambda^-1 S^-1 term by term
    z = CoeffFn.zero(grid)
    P = solve_dressing(z, z, 4)
    os_ = addsym.orlov_schulman(P, {})
    xe = DiffOp.from_coeffs({-1: CoeffFn.x(grid) * (1 / grid.epsilon)}, grid)
    want = op_mul(op_mul(P.S, xe, truncate=True), P.Sinv, band=(-4, -1), truncate=True)
    assert op_norm(os_.M - want) < 1e-12
    # leading term x/eps, next correction from w_2 = -x/eps
    assert (os_.M.coeff(-1) - CoeffFn.x(grid) * (1 / grid.epsilon)).norm() < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_canonical_relations(grid, seed):
    s = random_state(grid, seed)
    P = solve_dressing(s.u, s.v, 10)
    res = addsym.canonical_residuals(addsym.orlov_schulman(P, {(0, 1): 0.3}, state=s), P)
    for k in ("L_M", "L_Mbar", "MmMbar_L", "logp_M_minus_Sinv", "logm_Mbar_minus_Sbarinv"):
        assert res[k] < 1e-7, k
    # the relation [log_+ L, M] = L does not hold
    assert res["logp_M_minus_L"] > 1e-2


def test_zero_flow(dressing1, os1):
    r = addsym.additional_flow_rhs(dressing1, os1, 0, 0)
    assert r.du.norm() == 0 and r.dv.norm() == 0


def test_t01_is_toda(state1, dressing1, os1):
    # X = L: [-(L)_-, L] = [(L)_+, L]
    r = addsym.additional_flow_rhs(dressing1, os1, 0, 1)
    t = lax_rhs(state1, None, FlowSpec(0, 0))
    assert max((r.du - t.du).norm(), (r.dv - t.dv).norm()) < 1e-15


def test_t10_constant_shift(dressing1, os1):
    r = addsym.additional_flow_rhs(dressing1, os1, 1, 0)
    assert (r.du - 1.0).norm() < 1e-12 and r.dv.norm() < 1e-12
    assert r.anomaly < 1e-7 and r.two_rep < 1e-7


def test_t11_scaling(dressing1, os1, state1):
    du, dv = addsym.additional_rhs(os1, 1, 1)
    assert (du - state1.u).norm() < 1e-12
    assert (dv - 2.0).norm() < 1e-12
    assert addsym.t11_flow_formula_residual(dressing1, os1, "printed") > 1e-2
    os2 = addsym.orlov_schulman(dressing1, {(0, 1): 0.3, (0, 2): 0.2}, state=state1)
    assert addsym.t11_flow_formula_residual(dressing1, os2, "homogeneous") < 1e-12


def test_t12_secular(dressing1, os1, state1):
    # velocity of t*_{1,2} contains 2 (x/eps) d_{t_{0,0}}(u, v)
    r = addsym.additional_flow_rhs(dressing1, os1, 1, 2)
    assert r.anomaly > 1
    with pytest.raises(addsym.SecularFlow):
        addsym.additional_rhs(os1, 1, 2)
    assert not addsym.is_periodic_flow(1, 2)


def test_divergent_powers(os1, state1):
    with pytest.raises(addsym.DivergentProduct):
        addsym.block_operator(os1, 2, 0)
    probe = addsym.divergence_probe(state1, orders=(6, 8))
    assert probe[1] > 3 * probe[0]


@pytest.mark.parametrize("ml", [(0, 1), (1, 0), (1, 1)], ids=str)
@pytest.mark.parametrize("f", [FlowSpec(0, 0), FlowSpec(0, 1), FlowSpec(1, 0)], ids=str)
def test_hierarchy_commutation(dressing1, os1, ml, f):
    assert addsym.hierarchy_commutation_residual(dressing1, os1, ml, f) < 1e-4


def test_commutation_zero_flow(dressing1, os1):
    assert addsym.hierarchy_commutation_residual(dressing1, os1, (0, 0), FlowSpec(0, 1)) < 1e-14


@pytest.mark.parametrize("pair", [((1, 0), (1, 1)), ((0, 2), (1, 0)), ((0, 2), (1, 1)), ((0, 1), (0, 3))], ids=str)
def test_block_brackets(dressing1, os1, pair):
    assert addsym.block_bracket_residual(dressing1, os1, *pair) < 1e-4


def test_block_antisymmetry(dressing1, os1):
    assert addsym.block_bracket_residual(dressing1, os1, (1, 1), (1, 1)) == 0


def test_measured_constant(os1):
    c, res = addsym.measured_constant(os1, (0, 2), (1, 0))
    assert c == pytest.approx(-2, abs=1e-9) and res < 1e-9


@pytest.mark.parametrize("variant,ok", [("flow", True), ("definition", False)])
def test_flows_of_M(dressing1, state1, variant, ok):
    os_ = addsym.orlov_schulman(dressing1, {(0, 1): 0.2}, variant, state=state1)
    r = addsym.flowsofM_residual(os_, FlowSpec(0, 1))
    assert (r < 1e-7) == ok


def test_additional_hamiltonian_trivial(dressing1, os1, state1):
    # h*_{0,1} = Res L = u
    assert (addsym.additional_density(os1, 0, 1) - state1.u).norm() < 1e-15
    assert abs(addsym.additional_hamiltonian(dressing1, os1, 0, 1)) < 1e-15
    # H*_{1,1} has an x-secular density
    assert addsym.additional_density(os1, 1, 1).xdeg >= 1
