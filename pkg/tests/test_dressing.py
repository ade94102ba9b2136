import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mextoda.dressing import (
    conjugation_residual,
    dressing_residual,
    lhat,
    log_minus,
    log_plus,
    solve_dressing,
)
from mextoda.fields import CoeffFn, SecularExponent, eval_fn, exp_fn
from mextoda.opalg import MixedOp, commutator, op_norm, trusted_band

from conftest import XS, at, random_state
import oracles


def test_first_coefficient_oracle(trig_state):
    P = solve_dressing(trig_state.u, trig_state.v, 4)
    np.testing.assert_allclose(at(P.w(1)), [oracles.w1(x) for x in XS], atol=1e-14)


def test_free_operator_secular_coefficient(grid):
    # u = 0, e^v = 1: (1 - Lambda) w_2 = 1 gives w_2 = -x/eps
    z = CoeffFn.zero(grid)
    P = solve_dressing(z, z, 4)
    assert P.w(1).norm() == 0
    assert (P.w(2) + CoeffFn.x(grid) * (1 / grid.epsilon)).norm() < 1e-14


def test_order_zero_is_identity(trig_state):
    P = solve_dressing(trig_state.u, trig_state.v, 0)
    assert P.S.band == (0, 0)
    assert (P.S.coeff(0) - 1.0).norm() == 0


def test_w0_pinned(state1, dressing1):
    assert abs(eval_fn(dressing1.w0, 0.0) - 1.0) < 1e-15
    assert (dressing1.phi - dressing1.phi.value()).norm() == 0


def test_lhat_is_conjugate(dressing1, state1):
    # wt_0^-1 L wt_0 = e^{v(x+eps)} Lambda + u + Lambda^-1
    Lh = lhat(dressing1)
    assert (Lh.coeff(-1) - 1.0).norm() == 0
    assert (Lh.coeff(0) - state1.u).norm() == 0


@pytest.mark.parametrize("seed", range(3))
def test_two_dressings(grid, seed):
    s = random_state(grid, seed)
    P = solve_dressing(s.u, s.v, 10)
    r1, r2 = conjugation_residual(P)
    assert r1 < 1e-8 and r2 < 1e-8
    assert dressing_residual(P) < 1e-8


def test_sbar_needs_zero_mean(grid, state1):
    with pytest.raises(SecularExponent):
        solve_dressing(state1.u, state1.v + 0.1, 4)
    P = solve_dressing(state1.u, state1.v + 0.1, 4, bar=False)
    assert P.G is None and conjugation_residual(P)[0] < 1e-8


def test_logs_commute_with_L(dressing1):
    L = MixedOp.lift(dressing1.L)
    for lg in (log_plus(dressing1), log_minus(dressing1)):
        C = commutator(lg, L, truncate=True)
        assert op_norm(C, trusted_band(C)) < 1e-8


def test_log_bands(dressing1):
    lp, lm = log_plus(dressing1), log_minus(dressing1)
    assert lp.diff.band[1] <= -1 and lm.diff.band[0] >= 0
    assert (lp.part(1).coeff(0) - 1.0).norm() == 0
    assert (lm.part(1).coeff(0) + 1.0).norm() == 0


def test_log_plus_leading_term(trig_state, grid):
    # -eps S_x S^-1 starts with -eps w_1' Lambda^-1
    P = solve_dressing(trig_state.u, trig_state.v, 6)
    from mextoda.fields import ddx
    lead = log_plus(P).diff.coeff(-1)
    assert (lead + ddx(P.w(1)) * grid.epsilon).norm() < 1e-15


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.3))
@settings(max_examples=5, deadline=None)
def test_dressing_property(seed, amplitude):
    from mextoda.fields import GridSpec
    s = random_state(GridSpec(), seed, amplitude)
    P = solve_dressing(s.u, s.v, 8)
    assert max(conjugation_residual(P)) < 1e-8


def test_order_zero_leaves_untruncated_defect(state1):
    # S = 1 exactly, so S Lambda - L S = -u - e^v Lambda^-1
    P = solve_dressing(state1.u, state1.v, 0)
    assert dressing_residual(P) == 0.0  # nothing trusted at K = 0
    assert dressing_residual(P, full=True) >= state1.u.norm() > 0
