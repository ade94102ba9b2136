"""Dressing operators of the Lax operator and the two logarithms.

With ``L = Lambda + u + e^v Lambda^-1`` we solve, order by order,

    S    = 1 + sum_{m>=1} w_m Lambda^-m,   S Lambda     = L S
    Sbar = sum_{k>=0} wt_k Lambda^k,       Sbar Lambda^-1 = L Sbar

Matching coefficients gives

    (1 - Lambda) w_m = u w_{m-1} + e^v w_{m-2}(x - eps)
    wt_0 = exp(phi),  (1 - Lambda^-1) phi = v
    wt_k = wt_0 g_k,  (1 - Lambda^-1) g_k = (wt_{k-2}(x + eps) + u wt_{k-1}) / wt_0

Each ``(1 - Lambda)`` inversion uses the zero-mode gauge of
:func:`mextoda.fields.invert_one_minus_shift`; ``phi`` is pinned by
``phi(0) = 0`` so that ``wt_0(0) = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import (
    CoeffFn,
    DegreeOverflow,
    SecularExponent,
    ddx,
    exp_fn,
    invert_one_minus_shift,
    mean,
    shift,
)
from .opalg import INF, DiffOp, MixedOp, lax_operator, op_mul, op_norm


@dataclass(frozen=True)
class DressingPair:
    """Truncated dressing operators with their inverses.

    ``S`` has band ``[-K, 0]``.  The second operator is stored factored as
    ``Sbar = wt_0 G`` with ``G = 1 + sum_{k>=1} g_k Lambda^k``; ``G`` dresses
    ``Lhat = wt_0^-1 L wt_0 = e^{v(x+eps)} Lambda + u + Lambda^-1`` whose
    coefficients stay O(1), which keeps the exponentially large range of
    ``wt_0`` out of every long cancellation.  ``G`` is ``None`` when the pair
    was solved with ``bar=False``.
    """

    S: DiffOp
    Sinv: DiffOp
    G: DiffOp | None
    Ginv: DiffOp | None
    phi: CoeffFn | None
    order: int
    L: DiffOp
    gauge: dict = field(default_factory=dict)

    @property
    def ledger(self) -> float:
        out = self.S.ledger + self.Sinv.ledger
        if self.G is not None:
            out += self.G.ledger + self.Ginv.ledger
        return out

    @property
    def grid(self):
        return self.S.grid

    @property
    def has_bar(self) -> bool:
        return self.G is not None

    @property
    def w0(self) -> CoeffFn:
        return exp_fn(self.phi)

    @property
    def Sbar(self) -> DiffOp:
        return DiffOp.from_coeffs({0: self.w0}, self.grid) * self.G

    @property
    def Sbarinv(self) -> DiffOp:
        return self.Ginv * DiffOp.from_coeffs({0: exp_fn(-self.phi)}, self.grid)

    def w(self, m: int) -> CoeffFn:
        return self.S.coeff(-m)

    def wt(self, k: int) -> CoeffFn:
        return self.w0 * self.G.coeff(k)

    def conj_w0(self, A: DiffOp) -> DiffOp:
        """``wt_0 A wt_0^-1`` using the bounded ratios ``exp(phi(x) - phi(x + k eps))``."""
        return conj_by_exp(A, self.phi)


def conj_by_exp(A: DiffOp, phi: CoeffFn) -> DiffOp:
    """``e^phi A e^-phi`` for a difference operator ``A``."""
    coeffs = {}
    for k, c in A.coeffs().items():
        coeffs[k] = c if k == 0 else exp_fn(phi - shift(phi, k)) * c
    return DiffOp.from_coeffs(coeffs, A.grid, trust=A.trust)


def _check_degree_room(grid, K):
    need = (K + 1) // 2
    if grid.Dx < need:
        raise DegreeOverflow(f"dressing order K={K} needs Dx >= {need}, have {grid.Dx}")


def solve_s(u: CoeffFn, ev: CoeffFn, K: int) -> list[CoeffFn]:
    """Coefficients ``w_0 .. w_K`` of ``S``."""
    grid = u.grid
    w = [CoeffFn.const(1.0, grid)]
    for m in range(1, K + 1):
        rhs = u * w[m - 1]
        if m >= 2:
            rhs = rhs + ev * shift(w[m - 2], -1)
        w.append(invert_one_minus_shift(rhs))
    return w


def _inv_one_minus_back(r: CoeffFn) -> CoeffFn:
    """``g`` with ``(1 - Lambda^-1) g = r``, i.e. ``(1 - Lambda) g = -r(x + eps)``."""
    return invert_one_minus_shift(-shift(r, 1))


def solve_phi(v: CoeffFn) -> CoeffFn:
    """``phi`` with ``(1 - Lambda^-1) phi = v`` and ``phi(0) = 0``."""
    if v.xdeg > 0 or abs(mean(v)) > 1e-12 * max(1.0, v.norm()):
        raise SecularExponent("Sbar needs a zero-mean v: wt_0 = exp(phi) with (1 - Lambda^-1) phi = v")
    phi = _inv_one_minus_back(v)
    # pin phi(0) = 0 slice by slice (tangent slices included)
    data = np.array(phi.data)
    data[:, 0, phi.J] -= data[:, 0, :].sum(axis=-1)
    return CoeffFn(data, phi.grid, phi.ledger)


def solve_g(u: CoeffFn, v: CoeffFn, K: int) -> list[CoeffFn]:
    """Coefficients ``g_0 .. g_K`` of ``G = wt_0^-1 Sbar``.

    ``(1 - Lambda^-1) g_k = e^{v(x+eps)} g_{k-2}(x+eps) + u g_{k-1}``.
    """
    grid = u.grid
    evp = shift(exp_fn(v), 1)
    g = [CoeffFn.const(1.0, grid)]
    for k in range(1, K + 1):
        rhs = u * g[k - 1]
        if k >= 2:
            rhs = rhs + evp * shift(g[k - 2], 1)
        g.append(_inv_one_minus_back(rhs))
    return g


def _inverse_g(g: list[CoeffFn]) -> list[CoeffFn]:
    """``h_m`` with ``G^-1 = sum h_m Lambda^m``: ``h_m = -sum_a g_a h_{m-a}(x + a eps)``."""
    out = [CoeffFn.const(1.0, g[0].grid)]
    for m in range(1, len(g)):
        acc = CoeffFn.zero(g[0].grid)
        for a in range(1, m + 1):
            acc = acc - g[a] * shift(out[m - a], a)
        out.append(acc)
    return out


def _inverse_s(w: list[CoeffFn]) -> list[CoeffFn]:
    """``v_m`` with ``S^-1 = sum v_m Lambda^-m``: ``v_m = -sum_a w_a v_{m-a}(x - a eps)``."""
    out = [CoeffFn.const(1.0, w[0].grid)]
    for m in range(1, len(w)):
        acc = CoeffFn.zero(w[0].grid)
        for a in range(1, m + 1):
            acc = acc - w[a] * shift(out[m - a], -a)
        out.append(acc)
    return out


def solve_dressing(u: CoeffFn, v: CoeffFn, K: int, *, bar: bool = True) -> DressingPair:
    """Solve the dressing pair of ``L = Lambda + u + e^v Lambda^-1`` to order ``K``.

    ``bar=False`` skips the second operator, which needs a zero-mean ``v``.
    """
    grid = u.grid
    _check_degree_room(grid, K)
    ev = exp_fn(v)
    L = lax_operator(u, ev)
    w = solve_s(u, ev, K)
    S = DiffOp.from_coeffs({-m: c for m, c in enumerate(w)}, grid, trust=(-K, INF))
    Sinv = DiffOp.from_coeffs({-m: c for m, c in enumerate(_inverse_s(w))}, grid, trust=(-K, INF))
    gauge = {"w_zero_mode": 0.0}
    G = Ginv = phi = None
    if bar:
        phi = solve_phi(v)
        g = solve_g(u, v, K)
        G = DiffOp.from_coeffs(dict(enumerate(g)), grid, trust=(-INF, K))
        Ginv = DiffOp.from_coeffs(dict(enumerate(_inverse_g(g))), grid, trust=(-INF, K))
        gauge["wt0_at_0"] = 1.0
    return DressingPair(S, Sinv, G, Ginv, phi, K, L, gauge)


def lhat(P: DressingPair) -> DiffOp:
    """``wt_0^-1 L wt_0 = e^{v(x+eps)} Lambda + u + Lambda^-1``."""
    L = P.L
    return DiffOp.from_coeffs({1: shift(L.coeff(-1), 1), 0: L.coeff(0), -1: 1.0}, P.grid)


def _trusted_norm(A: DiffOp, full: bool = False) -> float:
    lo, hi = (A.kmin, A.kmax) if full else A.trust
    return op_norm(A, (lo, hi))


def dressing_residual(P: DressingPair, L: DiffOp | None = None, full: bool = False) -> float:
    """Max of ``||S Lambda - L S||`` and ``||Sbar Lambda^-1 - L Sbar||`` on trusted bands.

    The second residual is evaluated as ``wt_0 (G Lambda^-1 - Lhat G)``.  With
    ``full=True`` the truncated operators are taken as exact and every computed
    band counts, so the truncation defect (e.g. ``-u - e^v Lambda^-1`` at K = 0)
    shows up.
    """
    L = P.L if L is None else L
    grid = P.grid
    lam = DiffOp.shift_op(1, grid)
    res = _trusted_norm(op_mul(P.S, lam) - op_mul(L, P.S), full)
    if P.has_bar:
        Lh = lhat(P) if L is P.L else conj_by_exp(L, -P.phi)
        R = op_mul(P.G, DiffOp.shift_op(-1, grid)) - op_mul(Lh, P.G)
        R = op_mul(DiffOp.from_coeffs({0: P.w0}, grid), R)
        res = max(res, _trusted_norm(R, full))
    return res


def conjugation_residual(P: DressingPair) -> tuple[float, float]:
    """``||S Lambda S^-1 - L||`` and ``||Sbar Lambda^-1 Sbar^-1 - L||`` on trusted bands."""
    grid = P.grid
    K = P.order
    SL = op_mul(P.S, DiffOp.shift_op(1, grid))
    A = op_mul(SL, P.Sinv, band=(1 - K, 1))
    r1 = _trusted_norm(A - P.L)
    r2 = 0.0
    if P.has_bar:
        GL = op_mul(P.G, DiffOp.shift_op(-1, grid))
        B = P.conj_w0(op_mul(GL, P.Ginv, band=(-1, K - 1)))
        r2 = _trusted_norm(B - P.L)
    return r1, r2


def log_plus(P: DressingPair) -> MixedOp:
    """``log_+ L = eps d - eps S_x S^-1``; the difference part has band ``[-K, -1]``."""
    grid = P.grid
    eps = grid.epsilon
    part = op_mul(P.S.ddx(), P.Sinv, band=(-P.order, -1)) * (-eps)
    return MixedOp({0: part, 1: DiffOp.identity(grid)}, grid)


def log_minus(P: DressingPair) -> MixedOp:
    """``log_- L = -eps d + eps Sbar_x Sbar^-1``; the difference part has band ``[0, K]``.

    With ``Sbar = e^phi G``: ``Sbar_x Sbar^-1 = phi_x + e^phi (G_x G^-1) e^-phi``.
    """
    grid = P.grid
    eps = grid.epsilon
    inner = P.conj_w0(op_mul(P.G.ddx(), P.Ginv, band=(0, P.order)))
    part = (inner + DiffOp.from_coeffs({0: ddx(P.phi)}, grid)) * eps
    return MixedOp({0: part, 1: -DiffOp.identity(grid)}, grid)
