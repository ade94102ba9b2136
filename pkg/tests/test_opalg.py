import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mextoda.fields import CoeffFn, exp_fn, random_field
from mextoda.opalg import (
    BandOverflow,
    DiffOp,
    MixedOp,
    commutator,
    lax_operator,
    mixed_mul,
    op_mul,
    op_norm,
    op_power,
    project_minus,
    project_plus,
    residue,
    trusted_band,
)

from conftest import XS, at
import oracles


def oracle_op(trig_state, grid):
    return lax_operator(trig_state.u, exp_fn(trig_state.v))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_power_coefficients_match_pointwise_products(trig_state, grid, n):
    L = oracle_op(trig_state, grid)
    got = op_power(L, n)
    want = oracles.power(oracles.lax_op(), n)
    assert got.band == (-n, n)
    for k, f in want.items():
        np.testing.assert_allclose(at(got.coeff(k)), [f(x) for x in XS], atol=1e-14)


def test_residue_of_square(trig_state, grid):
    # Res L^2 = u^2 + e^v + e^{v(x+eps)}
    r = residue(op_power(oracle_op(trig_state, grid), 2))
    want = [oracles.u_fn(x) ** 2 + oracles.ev_fn(x) + oracles.ev_fn(x + grid.epsilon) for x in XS]
    np.testing.assert_allclose(at(r), want, atol=1e-15)


def test_shift_commutes_past_x(grid):
    # Lambda x = (x + eps) Lambda
    lam = DiffOp.shift_op(1, grid)
    X = DiffOp.from_coeffs({0: CoeffFn.x(grid)}, grid)
    C = commutator(lam, X)
    assert C.band == (1, 1)
    assert (C.coeff(1) - grid.epsilon).norm() < 1e-15


def test_eps_d_rule(grid):
    # [eps d, f] = eps f_x
    f = CoeffFn.fourier({1: 0.5, -1: 0.5}, grid)
    C = commutator(MixedOp.eps_d(grid), MixedOp.lift(DiffOp.from_coeffs({0: f}, grid)))
    assert C.order == 0 or op_norm(C.part(1)) == 0
    want = CoeffFn.fourier({1: 0.5j, -1: -0.5j}, grid) * grid.epsilon
    assert (C.diff.coeff(0) - want).norm() < 1e-15


def _rand_op(grid, seed, lo, hi):
    rng = np.random.default_rng(seed)
    return DiffOp.from_coeffs({k: random_field(grid, rng, 0.3) + rng.normal() for k in range(lo, hi + 1)}, grid)


@given(st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_product_associative(grid, seed):
    A, B, C = (_rand_op(grid, seed + i, -2, 1) for i in range(3))
    lhs = op_mul(op_mul(A, B), C)
    rhs = op_mul(A, op_mul(B, C))
    assert op_norm(lhs - rhs) < 1e-13 * max(1.0, op_norm(lhs))


@given(st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_projections_split(grid, seed):
    A = _rand_op(grid, seed, -3, 2)
    m, p = project_minus(A), project_plus(A)
    assert m.band[1] <= -1 and p.band[0] >= 0
    assert op_norm(m + p - A) == 0


def test_projection_sends_derivation_to_plus(grid):
    A = MixedOp({0: DiffOp.from_coeffs({-1: 1.0, 1: 2.0}, grid), 1: DiffOp.identity(grid)}, grid)
    assert project_minus(A).order == 0
    assert project_plus(A).order == 1


def test_mixed_product_leibniz(grid):
    # (eps d) (f Lambda) = f Lambda (eps d) + eps f_x Lambda
    f = CoeffFn.fourier({2: 0.25, -2: 0.25}, grid)
    A = MixedOp.lift(DiffOp.from_coeffs({1: f}, grid))
    P = mixed_mul(MixedOp.eps_d(grid), A)
    assert (P.part(1).coeff(1) - f).norm() < 1e-15
    fx = CoeffFn.fourier({2: 0.5j, -2: -0.5j}, grid)
    assert (P.diff.coeff(1) - fx * grid.epsilon).norm() < 1e-15


def test_band_cap(grid):
    L = DiffOp.from_coeffs({1: 1.0, -1: 1.0}, grid)
    with pytest.raises(BandOverflow):
        op_power(L, grid.band_cap + 1, truncate=False)


def test_truncation_shrinks_trust(grid):
    S = DiffOp.from_coeffs({-k: 1.0 for k in range(8)}, grid, trust=(-7, np.inf))
    T = op_mul(S, S, band=(-7, 0))
    assert trusted_band(T) == (-7, np.inf)
    U = op_mul(S, S, band=(-5, 0))
    assert trusted_band(U)[0] >= -5


def test_json_roundtrip(grid, trig_state):
    L = oracle_op(trig_state, grid)
    M = MixedOp({0: L, 1: DiffOp.identity(grid)}, grid)
    back = MixedOp.from_json(M.to_json(), grid)
    assert op_norm(back - M) < 1e-15
