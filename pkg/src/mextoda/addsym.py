"""Orlov-Schulman operators, additional symmetries and the Block algebra.

On the admissible slice (``t_{1,n} = 0`` for ``n >= 1``, ``t_{2,n} = 0``)::

    Gamma    = (x/eps) Lambda^-1 + sum_n c_n t_{0,n} Lambda^n
    GammaBar = -(x/eps) Lambda
    M = S Gamma S^-1,   Mbar = Sbar GammaBar Sbar^-1

with ``c_n = 1/n!`` (variant ``"flow"``) or ``c_n = n + 1`` (variant
``"definition"``).  Since ``S Lambda^n S^-1 = L^n`` the time terms of ``M``
are added as ``c_n t_{0,n} L^n``.

The additional flow ``(m, l)`` uses ``X = (M - Mbar)^m L^l``::

    dS = -X_- S,   dSbar = X_+ Sbar,   dL = [-X_-, L]

``M`` has band ``(-inf, -1]`` and ``Mbar`` band ``[1, inf)``, and the
coefficients of both grow geometrically with the band index, so the cross
terms of ``(M - Mbar)^m`` for ``m >= 2`` are divergent sums; those flows
raise :class:`DivergentProduct` (see :func:`divergence_probe`).

Finite-difference checks move the operator state ``(u, v, M, Mbar, times)``
along a flow to first order, i.e. with the dressing co-evolved; re-solving
the dressing in the pinned gauge would change ``M`` by a series in
``L^-1`` and break the comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dressing import DressingPair, log_minus, log_plus, solve_dressing
from .fields import CoeffFn, MethError, exp_fn, log_fn, mean
from .hierarchy import (
    FlowSpec,
    LatticeState,
    generator_full,
    harmonic,
    lax_rhs,
)
from .opalg import (
    INF,
    DiffOp,
    MixedOp,
    commutator,
    lax_operator,
    op_mul,
    op_norm,
    op_power,
    project_minus,
    project_plus,
    residue,
    trusted_band,
)

GAMMA_VARIANTS = ("flow", "definition")
MCAP = 3
LCAP = 3
SECULAR_TOL = 1e-8


class SliceViolation(MethError):
    pass


class DivergentProduct(MethError):
    pass


class SecularFlow(MethError):
    """The flow has an x-polynomial part, so it leaves the periodic phase space."""


def recip_factorial(n: int) -> float:
    """``1/n!`` with ``1/n! = 0`` for negative ``n``."""
    return 0.0 if n < 0 else 1.0 / math.factorial(n)


def gamma_coeff(n: int, variant: str = "flow") -> float:
    if variant == "flow":
        return recip_factorial(n)
    if variant == "definition":
        return float(n + 1)
    raise ValueError(f"unknown Gamma variant {variant!r}")


def _key(k) -> tuple[int, int]:
    return (k.alpha, k.n) if isinstance(k, FlowSpec) else tuple(k)


def on_slice(times: dict) -> bool:
    """True when ``t_{1,n} = 0`` for ``n >= 1`` and ``t_{2,n} = 0``."""
    for k, t in times.items():
        a, n = _key(k)
        if t and (a == 2 or (a == 1 and n >= 1)):
            return False
    return True


def build_gamma(times: dict, grid, variant: str = "flow") -> tuple[MixedOp, MixedOp]:
    """Bare operators ``Gamma``, ``GammaBar`` for the given times.

    Off the slice the ``t_{1,n}`` and ``t_{2,n}`` terms carry ``eps d`` and
    the result has derivation order 1.
    """
    eps = grid.epsilon
    X = CoeffFn.x(grid) * (1.0 / eps)
    g0 = {-1: X}
    g1 = {}
    b0 = {1: -X}
    b1 = {}
    for k, t in times.items():
        if not t:
            continue
        a, n = _key(k)
        if a == 0:
            g0[n] = g0.get(n, 0.0) + gamma_coeff(n, variant) * t
        elif a == 1:
            c = 2.0 * recip_factorial(n - 1) * t
            if c:
                g0[n - 1] = g0.get(n - 1, 0.0) - c * float(harmonic(n - 1))
                g1[n - 1] = g1.get(n - 1, 0.0) + c
        else:
            c = 2.0 * recip_factorial(n) * t
            b0[-n] = b0.get(-n, 0.0) - c * float(harmonic(n))
            b1[-n] = b1.get(-n, 0.0) - c

    def mixed(p0, p1):
        parts = {0: DiffOp.from_coeffs(p0, grid)}
        if p1:
            parts[1] = DiffOp.from_coeffs(p1, grid)
        return MixedOp(parts, grid)

    return mixed(g0, g1), mixed(b0, b1)


@dataclass(frozen=True)
class OSOperators:
    """Orlov-Schulman data at one point: fields, ``M``, ``Mbar`` and the times."""

    u: CoeffFn
    v: CoeffFn
    M: DiffOp
    Mbar: DiffOp
    times: dict
    variant: str = "flow"
    order: int = 0
    Gamma: MixedOp | None = None
    GammaBar: MixedOp | None = None

    @property
    def grid(self):
        return self.u.grid

    @property
    def L(self) -> DiffOp:
        return lax_operator(self.u, exp_fn(self.v))

    @property
    def ledger(self) -> float:
        return self.M.ledger + self.Mbar.ledger

    @property
    def state(self) -> LatticeState:
        return LatticeState(self.u, self.v, dict(self.times))


def orlov_schulman(P: DressingPair, times: dict | None = None, variant: str = "flow",
                   state: LatticeState | None = None) -> OSOperators:
    """``M = S Gamma S^-1`` and ``Mbar = Sbar GammaBar Sbar^-1`` on the slice."""
    times = dict(times or {})
    if not on_slice(times):
        raise SliceViolation("Orlov-Schulman operators need t_{1,n>=1} = t_{2,n} = 0")
    if not P.has_bar:
        raise ValueError("dressing pair solved without Sbar")
    grid = P.grid
    eps = grid.epsilon
    K = P.order
    Gamma, GammaBar = build_gamma(times, grid, variant)
    xe = DiffOp.from_coeffs({-1: CoeffFn.x(grid) * (1.0 / eps)}, grid)
    M = op_mul(op_mul(P.S, xe), P.Sinv, band=(-K, -1), truncate=True)
    L = P.L
    for k, t in times.items():
        a, n = _key(k)
        if a == 0 and t:
            M = M + op_power(L, n) * (gamma_coeff(n, variant) * t)
    xb = DiffOp.from_coeffs({1: CoeffFn.x(grid) * (-1.0 / eps)}, grid)
    Mbar = P.conj_w0(op_mul(op_mul(P.G, xb), P.Ginv, band=(1, K), truncate=True))
    if state is None:
        u, v = L.coeff(0), log_fn(L.coeff(-1))
    else:
        u, v = state.u, state.v
    return OSOperators(u, v, M, Mbar, times, variant, K, Gamma, GammaBar)


def os_from_state(state: LatticeState, K: int = 10, variant: str = "flow") -> OSOperators:
    P = solve_dressing(state.u, state.v, K)
    return orlov_schulman(P, state.times, variant, state)


def _trusted(A) -> float:
    return op_norm(A, trusted_band(A))


def canonical_residuals(os: OSOperators, P: DressingPair | None = None) -> dict[str, float]:
    """``[L, M] = 1``, ``[L, Mbar] = 1`` and ``[M - Mbar, L] = 0`` on trusted bands.

    With ``P`` the report-only identities ``[log_+ L, M] = L`` and
    ``[log_- L, Mbar] = L`` are measured as well, next to the conjugation
    identities ``[log_+ L, M] = S Lambda^-1 S^-1`` and
    ``[log_- L, Mbar] = Sbar Lambda Sbar^-1``.
    """
    L = os.L
    one = DiffOp.identity(os.grid)
    out = {
        "L_M": _trusted(commutator(L, os.M, truncate=True) - one),
        "L_Mbar": _trusted(commutator(L, os.Mbar, truncate=True) - one),
        "MmMbar_L": _trusted(commutator(os.M - os.Mbar, L, truncate=True)),
    }
    if P is not None:
        cp = commutator(log_plus(P), MixedOp.lift(os.M), truncate=True)
        out["logp_M_minus_L"] = _trusted(cp - MixedOp.lift(L))
        cm = commutator(log_minus(P), MixedOp.lift(os.Mbar), truncate=True)
        out["logm_Mbar_minus_L"] = _trusted(cm - MixedOp.lift(L))
        K, grid = P.order, P.grid
        Linv = op_mul(op_mul(P.S, DiffOp.shift_op(-1, grid)), P.Sinv, band=(-K, -1), truncate=True)
        Lbinv = P.conj_w0(op_mul(op_mul(P.G, DiffOp.shift_op(1, grid)), P.Ginv,
                                 band=(1, K), truncate=True))
        out["logp_M_minus_Sinv"] = _trusted(cp - MixedOp.lift(Linv))
        out["logm_Mbar_minus_Sbarinv"] = _trusted(cm - MixedOp.lift(Lbinv))
    return out


# --- additional flows ----------------------------------------------------------

def block_operator(os: OSOperators, m: int, l: int) -> DiffOp:
    """``X = (M - Mbar)^m L^l`` for ``m <= 1``."""
    if m < 0 or l < 0:
        raise ValueError("indices must be non-negative")
    if m > MCAP or l > LCAP + 2:
        raise ValueError(f"(m, l) = ({m}, {l}) beyond caps")
    if m >= 2:
        raise DivergentProduct(
            f"(M - Mbar)^{m} needs products of a (-inf, -1] band with a [1, inf) band")
    L = os.L
    Ll = op_power(L, l)
    if m == 0:
        return Ll
    return op_mul(os.M, Ll, truncate=True) - op_mul(os.Mbar, Ll, truncate=True)


def divergence_probe(state: LatticeState, m: int = 2, l: int = 0, band: int = -1,
                     orders=(6, 8, 10)) -> list[float]:
    """Sup norm of the band-``band`` coefficient of the truncated ``(M - Mbar)^m L^l``.

    The partial sums keep ``M``, ``Mbar`` to order ``K`` for each ``K`` in
    ``orders``; growth with ``K`` shows the product has no limit.
    """
    out = []
    for K in orders:
        os = os_from_state(state, K)
        Z = os.M - os.Mbar
        X = op_power(Z, m, truncate=True)
        X = op_mul(X, op_power(os.L, l), truncate=True)
        out.append(X.coeff(band).norm())
    return out


@dataclass(frozen=True)
class AdditionalFlow:
    dS: DiffOp | None
    dSbar: DiffOp | None
    dL: DiffOp
    du: CoeffFn
    dv: CoeffFn
    anomaly: float
    two_rep: float
    ledger: float = 0.0


def _extract(C: DiffOp, v: CoeffFn, lo: float):
    """``(du, dv)`` plus the anomaly on trusted bands ``>= lo``."""
    du = C.coeff(0)
    dv = C.coeff(-1) * exp_fn(-v)
    anomaly = op_norm(C, (max(lo, C.kmin), -2)) if C.kmin <= -2 else 0.0
    anomaly = max(anomaly, op_norm(C, (1, INF)), du.secular_part().norm(), dv.secular_part().norm())
    return du.periodic_part(), dv.periodic_part(), anomaly


def additional_flow_rhs(P: DressingPair | None, os: OSOperators, m: int, l: int) -> AdditionalFlow:
    """Right-hand sides of the ``t*_{m,l}`` flow on ``S``, ``Sbar`` and ``L``."""
    X = block_operator(os, m, l)
    Xm, Xp = project_minus(X), project_plus(X)
    L = os.L
    C = commutator(-Xm, L, truncate=True)
    lo = trusted_band(C)[0]
    du, dv, anomaly = _extract(C, os.v, lo)
    Cp = commutator(Xp, L, truncate=True)
    diff = Cp - C
    two_rep = op_norm(diff, trusted_band(diff))
    dS = dSbar = None
    if P is not None:
        dS = -op_mul(Xm, P.S, truncate=True)
        dSbar = op_mul(Xp, P.Sbar, truncate=True)
    return AdditionalFlow(dS, dSbar, C, du, dv, anomaly, two_rep, C.ledger)


def additional_rhs(os: OSOperators, m: int, l: int, strict: bool = True) -> tuple[CoeffFn, CoeffFn]:
    """Periodic ``(du, dv)`` of ``t*_{m,l}``; raises :class:`SecularFlow` otherwise.

    ``strict=False`` skips the check; finite differences use it at displaced
    points, where the first-order motion of ``M`` leaves O(h^2) defects.
    """
    r = additional_flow_rhs(None, os, m, l)
    if strict and r.anomaly > SECULAR_TOL:
        raise SecularFlow(f"t*_{m},{l}: non-periodic part {r.anomaly:.3e}")
    return r.du, r.dv


def is_periodic_flow(m: int, l: int) -> bool:
    """Flows whose velocity stays periodic: ``m = 0``, or ``m = 1`` with ``l <= 1``.

    ``(M - Mbar) L^l`` contains ``2 (x/eps) L^{l-1}``-type terms whose minus
    part is a multiple of ``x`` times a hierarchy flow once ``l >= 2``.
    """
    return m == 0 or (m == 1 and l <= 1)


# --- first-order motion of the operator state --------------------------------------

def _displace(os: OSOperators, d: dict, h: float) -> OSOperators:
    times = dict(os.times)
    for k, dt in d.get("times", {}).items():
        times[k] = times.get(k, 0.0) + dt * h
    return replace(os, u=os.u + d["du"] * h, v=os.v + d["dv"] * h,
                   M=os.M + d["dM"] * h, Mbar=os.Mbar + d["dMbar"] * h, times=times)


def additional_motion(os: OSOperators, m: int, l: int) -> dict:
    """Tangent of ``(u, v, M, Mbar)`` along ``t*_{m,l}``."""
    X = block_operator(os, m, l)
    Xm, Xp = project_minus(X), project_plus(X)
    du, dv = additional_rhs(os, m, l)
    return {
        "du": du, "dv": dv,
        "dM": commutator(-Xm, os.M, truncate=True),
        "dMbar": commutator(Xp, os.Mbar, truncate=True),
    }


def hierarchy_motion(os: OSOperators, f: FlowSpec, K: int | None = None) -> dict:
    """Tangent of ``(u, v, M, Mbar, times)`` along the hierarchy flow ``f``.

    ``dM = [-B_-, M] + S (dGamma/dt) S^-1`` and ``dMbar = [B_+, Mbar]``; on
    the slice only ``t_{0,n}`` and ``t_{1,0}`` keep the state on the slice.
    """
    if f.alpha == 2 or (f.alpha == 1 and f.n >= 1):
        raise SliceViolation(f"flow {f} leaves the admissible slice")
    state = os.state
    P = None
    if f.alpha == 1:
        P = solve_dressing(os.u, os.v, K or max(os.order, f.n + 4), bar=False)
    L = os.L
    B = generator_full(L, P, f)
    Bm, Bp = project_minus(B), project_plus(B)
    rhs = lax_rhs(state, P, f)
    dM = commutator(-Bm, MixedOp.lift(os.M), truncate=True).diff
    if f.alpha == 0:
        dM = dM + op_power(L, f.n) * gamma_coeff(f.n, os.variant)
    dMbar = commutator(Bp, MixedOp.lift(os.Mbar), truncate=True)
    if dMbar.order and op_norm(dMbar.part(1)) > 1e-12:
        raise SliceViolation("Mbar motion picked up a derivation term")
    return {"du": rhs.du, "dv": rhs.dv, "dM": dM, "dMbar": dMbar.diff,
            "times": {(f.alpha, f.n): 1.0}}


def flowsofM_residual(os: OSOperators, f: FlowSpec) -> float:
    """``||[-B_-, M] + S (dGamma/dt) S^-1 - [B_+, M]||`` for ``f = (0, n)``.

    The dressing motion gives the first two terms; the Lax-type form
    ``dM/dt = [B_+, M]`` holds exactly when ``S (dGamma/dt) S^-1 = [B, M]``,
    i.e. when the ``t_{0,n}`` term of ``Gamma`` is ``Lambda^n / n!``.
    """
    f = FlowSpec(*f) if not isinstance(f, FlowSpec) else f
    if f.alpha != 0:
        raise ValueError("only the t_{0,n} flows move Gamma on the slice")
    L = os.L
    B = op_power(L, f.n + 1) * (1.0 / math.factorial(f.n + 1))
    Bm, Bp = project_minus(B), project_plus(B)
    lhs = commutator(-Bm, os.M, truncate=True) + op_power(L, f.n) * gamma_coeff(f.n, os.variant)
    R = lhs - commutator(Bp, os.M, truncate=True)
    return op_norm(R, trusted_band(R))


def _central(fn, os: OSOperators, d: dict, h: float, richardson: bool = True):
    def diff(hh):
        a = fn(_displace(os, d, hh))
        b = fn(_displace(os, d, -hh))
        return tuple((x - y) * (0.5 / hh) for x, y in zip(a, b))

    d1 = diff(h)
    if not richardson:
        return d1
    d2 = diff(h / 2)
    return tuple((4 * y - x) * (1.0 / 3) for x, y in zip(d1, d2))


def _lax_tangent(state: LatticeState, f: FlowSpec, du: CoeffFn, dv: CoeffFn):
    """Exact derivative of the hierarchy velocity along ``(du, dv)`` (forward mode)."""
    from .hamiltonian import _with_tangents

    J = max(state.u.J, state.v.J, du.J, dv.J)

    def pad(c):
        arr = np.zeros((1, 2 * J + 1), dtype=c.data.dtype)
        arr[0, J - c.J: J + c.J + 1] = c.data[0, 0]
        return arr

    s = LatticeState(_with_tangents(state.u, pad(du)), _with_tangents(state.v, pad(dv)))
    r = lax_rhs(s, None, f, check=False)
    return r.du.tangent(0), r.dv.tangent(0)


def _vf_norm(a) -> float:
    return max(a[0].norm(), a[1].norm())


def hierarchy_commutation_residual(P: DressingPair | None, os: OSOperators, ml, f: FlowSpec,
                                   h: float = 1e-3, richardson: bool = True) -> float:
    """Sup norm of ``[d*_{m,l}, d_f](u, v)``."""
    m, l = ml
    f = FlowSpec(*f) if not isinstance(f, FlowSpec) else f
    du, dv = additional_rhs(os, m, l)
    t1 = _lax_tangent(os.state, f, du, dv)
    t2 = _central(lambda o: additional_rhs(o, m, l, False), os, hierarchy_motion(os, f), h, richardson)
    return _vf_norm((t1[0] - t2[0], t1[1] - t2[1]))


def block_bracket(os: OSOperators, ml, nk, h: float = 1e-3, richardson: bool = True):
    """Finite-difference ``[d*_{m,l}, d*_{n,k}](u, v)``."""
    (m, l), (n, k) = ml, nk
    additional_rhs(os, m, l)
    additional_rhs(os, n, k)
    a = _central(lambda o: additional_rhs(o, n, k, False), os, additional_motion(os, m, l), h, richardson)
    b = _central(lambda o: additional_rhs(o, m, l, False), os, additional_motion(os, n, k), h, richardson)
    return a[0] - b[0], a[1] - b[1]


def structure_constant(ml, nk) -> int:
    (m, l), (n, k) = ml, nk
    return k * m - n * l


def block_bracket_residual(P: DressingPair | None, os: OSOperators, ml, nk, h: float = 1e-3,
                           richardson: bool = True) -> float:
    """``||[d*_{m,l}, d*_{n,k}] - (km - nl) d*_{m+n-1,k+l-1}||`` on ``(u, v)``."""
    (m, l), (n, k) = ml, nk
    br = block_bracket(os, ml, nk, h, richardson)
    c = structure_constant(ml, nk)
    if c:
        tu, tv = additional_rhs(os, m + n - 1, k + l - 1)
        br = (br[0] - tu * c, br[1] - tv * c)
    return _vf_norm(br)


def measured_constant(os: OSOperators, ml, nk, h: float = 1e-3) -> tuple[float, float]:
    """Least-squares ``c`` in ``[d*_{m,l}, d*_{n,k}] = c d*_{m+n-1,k+l-1}`` and its residual."""
    from .fields import grid_values

    (m, l), (n, k) = ml, nk
    br = block_bracket(os, ml, nk, h)
    if m + n - 1 < 0 or k + l - 1 < 0:
        return 0.0, _vf_norm(br)
    tu, tv = additional_rhs(os, m + n - 1, k + l - 1)
    npts = 4 * os.grid.Jmax
    y = np.concatenate([grid_values(br[0].data[0], npts), grid_values(br[1].data[0], npts)])
    x = np.concatenate([grid_values(tu.data[0], npts), grid_values(tv.data[0], npts)])
    y, x = y.astype(complex), x.astype(complex)
    xx = float(np.vdot(x, x).real)
    if xx < 1e-24:
        return 0.0, float(np.abs(y).max())
    c = np.vdot(x, y) / xx
    return float(c.real), float(np.abs(y - c * x).max())


GENERATORS = ((0, 1), (1, 0), (1, 1), (2, 1), (1, 2))


# --- explicit t*_{1,1} flow -----------------------------------------------------------

T11_VARIANTS = ("printed", "homogeneous")


def t11_formula(os: OSOperators, variant: str = "printed") -> tuple[CoeffFn, CoeffFn]:
    """Explicit ``t*_{1,1}`` velocity on the slice.

    ``printed``: ``(u, 2v) + sum_{n>=1} n t_{0,n} d_{t_{0,n}}(u, v)``.
    ``homogeneous``: ``(u, 2) + sum_{n>=1} k_n t_{0,n} d_{t_{0,n}}(u, v)``,
    where ``2`` is the weight of ``e^v`` under ``u -> c u``,
    ``e^v -> c^2 e^v`` and ``k_n = c_n (n+1)!`` comes from
    ``(c_n t_{0,n} L^{n+1})_-`` in ``(M L)_-``.
    """
    if variant not in T11_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    du = os.u
    dv = os.v * 2.0 if variant == "printed" else CoeffFn.const(2.0, os.grid)
    state = os.state
    for key, t in os.times.items():
        a, n = _key(key)
        if a == 0 and n >= 1 and t:
            r = lax_rhs(state, None, FlowSpec(0, n))
            k = n if variant == "printed" else gamma_coeff(n, os.variant) * math.factorial(n + 1)
            du, dv = du + r.du * (k * t), dv + r.dv * (k * t)
    return du, dv


def t11_flow_formula_residual(P: DressingPair | None, os: OSOperators,
                              variant: str = "printed") -> float:
    du, dv = additional_rhs(os, 1, 1)
    fu, fv = t11_formula(os, variant)
    return _vf_norm((du - fu, dv - fv))


# --- additional Hamiltonians -------------------------------------------------------------

def additional_density(os: OSOperators, m: int, l: int) -> CoeffFn:
    """``h*_{m,l} = Res (M - Mbar)^m L^l``."""
    return residue(block_operator(os, m, l))


def additional_hamiltonian(P: DressingPair | None, os: OSOperators, m: int, l: int) -> float:
    """``int_0^{2pi} h*_{m,l} dx`` (periodic and secular parts together)."""
    return float((2 * np.pi * mean(additional_density(os, m, l))).real)


def additional_density_fn(u: CoeffFn, v: CoeffFn, m: int, l: int, K: int = 10,
                          variant: str = "flow") -> CoeffFn:
    """``h*_{m,l}`` at zero times as a function of the fields (tangents carried)."""
    P = solve_dressing(u, v, K)
    return additional_density(orlov_schulman(P, {}, variant, LatticeState(u, v)), m, l)


@dataclass(frozen=True)
class AdditionalCalibration:
    ml: tuple[int, int]
    offset: int
    scale_name: str
    residual: float
    table: dict


def additional_pb1_residual(state: LatticeState, m: int, l: int, K: int = 10,
                            J: int | None = None) -> AdditionalCalibration:
    """Match the ``t*_{m,l}`` velocity with ``pb1`` of ``H*_{m,l+o}`` times a scale.

    Offsets ``o`` in ``{0, 1}`` and scales ``{1, 1/eps, eps}``, each also
    divided by ``l + o`` (the ``L^{l+1}/(l+1)`` normalisation), are searched.
    The gradient is exact (forward mode) on modes ``|j| <= J``.
    """
    from .hamiltonian import _scales, pb1_flow, var_deriv

    os = os_from_state(state, K)
    du, dv = additional_rhs(os, m, l)
    table = {}
    for o in (0, 1):
        g = var_deriv(state, lambda a, b: additional_density_fn(a, b, m, l + o, K), J=J)
        fu, fv = pb1_flow(g)
        for name, s in _scales(state.grid.epsilon).items():
            table[(o, name)] = _vf_norm((du - fu * s, dv - fv * s))
            if l + o > 1:
                s2 = s / (l + o)
                table[(o, f"{name}/{l + o}")] = _vf_norm((du - fu * s2, dv - fv * s2))
    (o, name), res = min(table.items(), key=lambda kv: kv[1])
    return AdditionalCalibration((m, l), o, name, res,
                                 {f"H*_{m},{l + oo} * {nn}": r for (oo, nn), r in table.items()})
