"""Flow generators, Lax right-hand sides and time integration.

For a flow ``(alpha, n)`` the generator ``A`` gives ``dL/dt = [A, L]``; the
fields follow from the ``Lambda^0`` and ``Lambda^-1`` coefficients::

    du = [A, L]_0,   dv = [A, L]_{-1} e^{-v}

Everything else in ``[A, L]`` must vanish and is reported as the anomaly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from .dressing import DressingPair, log_minus, log_plus, solve_dressing
from .fields import CoeffFn, GridSpec, MethError, exp_fn, mean, shift
from .opalg import (
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

ANOMALY_TOL = 1e-6
BLOWUP_NORM = 1e6


class AnomalyExceeded(MethError):
    pass


class BlowUp(MethError):
    pass


def harmonic(n: int) -> Fraction:
    """``c_n = sum_{k=1}^n 1/k`` with ``c_0 = 0``, exactly."""
    if n < 0:
        raise ValueError("harmonic number of a negative index")
    return sum((Fraction(1, k) for k in range(1, n + 1)), Fraction(0))


@dataclass(frozen=True)
class FlowSpec:
    alpha: int
    n: int

    def __post_init__(self):
        if self.alpha not in (0, 1, 2) or self.n < 0:
            raise ValueError(f"invalid flow ({self.alpha}, {self.n})")

    @classmethod
    def parse(cls, text: str) -> "FlowSpec":
        a, n = (int(t) for t in text.split(","))
        return cls(a, n)

    def __str__(self):
        return f"({self.alpha},{self.n})"


@dataclass(frozen=True)
class LatticeState:
    u: CoeffFn
    v: CoeffFn
    times: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.u.xdeg or self.v.xdeg:
            raise ValueError("fields must be periodic")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @property
    def L(self) -> DiffOp:
        return lax_operator(self.u, exp_fn(self.v))

    def time(self, f: FlowSpec) -> float:
        return self.times.get((f.alpha, f.n), 0.0)

    def is_real(self) -> bool:
        return self.u.is_real() and self.v.is_real()

    def norm(self) -> float:
        return max(self.u.norm(), self.v.norm())

    def to_json(self) -> dict:
        return {
            "u": self.u.to_json(),
            "v": self.v.to_json(),
            "times": {f"{a},{n}": t for (a, n), t in sorted(self.times.items())},
        }

    @classmethod
    def from_json(cls, obj: dict, grid: GridSpec) -> "LatticeState":
        times = {tuple(int(t) for t in k.split(",")): float(t) for k, t in obj.get("times", {}).items()}
        return cls(CoeffFn.from_json(obj["u"], grid), CoeffFn.from_json(obj["v"], grid), times)


@dataclass(frozen=True)
class FlowRHS:
    du: CoeffFn
    dv: CoeffFn
    anomaly: float
    ledger: float = 0.0


def dressing_order(f: FlowSpec, margin: int = 3) -> int:
    """Dressing order that keeps every band used by flow ``f`` trusted."""
    return f.n + 1 + margin


def dress(state: LatticeState, K: int, bar: bool = True) -> DressingPair:
    return solve_dressing(state.u, state.v, K, bar=bar)


def _need_dressing(f: FlowSpec) -> bool:
    return f.alpha != 0


def _fact(n: int) -> float:
    return float(math.factorial(n))


def _c(n: int) -> float:
    return float(harmonic(n))


def generator_full(L: DiffOp, P: DressingPair | None, f: FlowSpec) -> MixedOp:
    """The unprojected operator ``B`` whose projection is the generator.

    ``(0,n)``: ``L^{n+1}/(n+1)!``; ``(1,n)``: ``(2/n!) L^n (log_+ L - c_n)``;
    ``(2,n)``: ``-(2/(n+1)!) L^{n+1} (log_- L - c_{n+1})``.
    """
    n = f.n
    if f.alpha == 0:
        return MixedOp.lift(op_power(L, n + 1) * (1.0 / _fact(n + 1)))
    if f.alpha == 1:
        lg = log_plus(P) - _c(n)
        return mixed_mul(MixedOp.lift(op_power(L, n)), lg, truncate=True) * (2.0 / _fact(n))
    lg = log_minus(P) - _c(n + 1)
    return mixed_mul(MixedOp.lift(op_power(L, n + 1)), lg, truncate=True) * (-2.0 / _fact(n + 1))


def flow_generator(state: LatticeState, P: DressingPair | None, f: FlowSpec) -> MixedOp:
    """``A_{alpha,n}``; plus projection for alpha in {0, 1}, minus for alpha = 2."""
    L = state.L if P is None else P.L
    B = generator_full(L, P, f)
    if f.alpha == 2:
        return project_minus(B)
    return project_plus(B)


def extract_rhs(C, v: CoeffFn) -> FlowRHS:
    """Field velocities from ``C = dL/dt`` plus the anomaly of the rest."""
    Cm = MixedOp.lift(C) if isinstance(C, DiffOp) else C
    P0 = Cm.diff
    du = P0.coeff(0)
    dv = P0.coeff(-1) * exp_fn(-v)
    rest = P0.restrict(P0.kmin, -2)
    anomaly = max(op_norm(rest), op_norm(P0.restrict(1, P0.kmax)))
    for d, p in Cm.parts.items():
        if d:
            anomaly = max(anomaly, op_norm(p))
    anomaly = max(anomaly, du.secular_part().norm(), dv.secular_part().norm())
    return FlowRHS(du.periodic_part(), dv.periodic_part(), anomaly, Cm.ledger)


def lax_rhs(state: LatticeState, P: DressingPair | None, f: FlowSpec, *,
            check: bool = True) -> FlowRHS:
    """``(du, dv)`` of flow ``f`` from ``[A_{alpha,n}, L]``."""
    if P is None and _need_dressing(f):
        P = dress(state, dressing_order(f), bar=f.alpha == 2)
    L = state.L if P is None else P.L
    A = flow_generator(state, P, f)
    C = commutator(A, MixedOp.lift(L))
    out = extract_rhs(C, state.v)
    if check and out.anomaly > ANOMALY_TOL:
        raise AnomalyExceeded(f"flow {f}: anomaly {out.anomaly:.3e}")
    return out


def two_representation_residual(state: LatticeState, P: DressingPair, f: FlowSpec) -> float:
    """``||[B_+, L] + [B_-, L]||`` on trusted bands (``[B, L] = 0``)."""
    L = P.L
    B = generator_full(L, P, f)
    C = commutator(project_plus(B), MixedOp.lift(L), truncate=True) \
        + commutator(project_minus(B), MixedOp.lift(L), truncate=True)
    return op_norm(C, trusted_band(C))


# --- time integration ---------------------------------------------------

def velocity(state: LatticeState, f: FlowSpec, K: int | None = None) -> tuple[CoeffFn, CoeffFn]:
    P = None
    if _need_dressing(f):
        P = dress(state, K or dressing_order(f), bar=f.alpha == 2)
    r = lax_rhs(state, P, f)
    return r.du, r.dv


def _real(f: CoeffFn) -> CoeffFn:
    """Project onto conjugate-symmetric coefficients (removes roundoff drift)."""
    d = f.data
    return CoeffFn(0.5 * (d + np.conj(d[..., ::-1])), f.grid, f.ledger)


def step_rk4(state: LatticeState, f: FlowSpec, dt: float, K: int | None = None) -> LatticeState:
    """One classical Runge-Kutta step; the dressing is re-solved at every stage."""
    u, v = state.u, state.v

    def rhs(uu, vv):
        return velocity(LatticeState(uu, vv), f, K)

    k1 = rhs(u, v)
    k2 = rhs(u + k1[0] * (dt / 2), v + k1[1] * (dt / 2))
    k3 = rhs(u + k2[0] * (dt / 2), v + k2[1] * (dt / 2))
    k4 = rhs(u + k3[0] * dt, v + k3[1] * dt)
    un = u + (k1[0] + k2[0] * 2 + k3[0] * 2 + k4[0]) * (dt / 6)
    vn = v + (k1[1] + k2[1] * 2 + k3[1] * 2 + k4[1]) * (dt / 6)
    if state.is_real():
        un, vn = _real(un), _real(vn)
    times = dict(state.times)
    key = (f.alpha, f.n)
    times[key] = times.get(key, 0.0) + dt
    return LatticeState(un, vn, times)


def lax_hamiltonian(state: LatticeState, n: int) -> float:
    """``int_0^{2pi} Res L^{n+1}/(n+1)! dx`` (needs no dressing)."""
    h = residue(op_power(state.L, n + 1)) * (1.0 / _fact(n + 1))
    return float((2 * np.pi * mean(h)).real)


def default_observables() -> dict[str, Callable[[LatticeState], float]]:
    return {f"H_0_{n}": (lambda s, n=n: lax_hamiltonian(s, n)) for n in range(3)}


@dataclass
class Trajectory:
    states: list
    ts: list
    observables: dict

    def rows(self):
        names = list(self.observables)
        for i, (s, t) in enumerate(zip(self.states, self.ts)):
            yield [i, t] + [self.observables[k][i] for k in names] + [s.u.norm(), s.v.norm()]

    def header(self):
        return ["step", "t"] + list(self.observables) + ["norm_u", "norm_v"]


def evolve(state: LatticeState, f: FlowSpec, dt: float, steps: int, *,
           observables: dict | None = None, K: int | None = None) -> Trajectory:
    """RK4 integration of flow ``f``; records observables at every step."""
    obs = default_observables() if observables is None else observables
    states, ts = [state], [state.time(f)]
    values = {k: [fn(state)] for k, fn in obs.items()}
    s = state
    for _ in range(steps):
        s = step_rk4(s, f, dt, K)
        if not np.isfinite(s.norm()) or s.norm() > BLOWUP_NORM:
            raise BlowUp(f"field norm {s.norm():.3e} after t={s.time(f)}")
        states.append(s)
        ts.append(s.time(f))
        for k, fn in obs.items():
            values[k].append(fn(s))
    return Trajectory(states, ts, values)


def _displace(state: LatticeState, vel, h: float) -> LatticeState:
    return LatticeState(state.u + vel[0] * h, state.v + vel[1] * h, state.times)


def _lie_bracket(state: LatticeState, X1, X2, h: float):
    """Central-difference ``D X2 . X1 - D X1 . X2``."""
    v1, v2 = X1(state), X2(state)
    dx2 = [(a - b) * (0.5 / h) for a, b in zip(X2(_displace(state, v1, h)), X2(_displace(state, v1, -h)))]
    dx1 = [(a - b) * (0.5 / h) for a, b in zip(X1(_displace(state, v2, h)), X1(_displace(state, v2, -h)))]
    return dx2[0] - dx1[0], dx2[1] - dx1[1]


def vector_field_bracket(state: LatticeState, X1, X2, h: float, richardson: bool = True):
    """Lie bracket of two vector fields ``state -> (du, dv)``."""
    b = _lie_bracket(state, X1, X2, h)
    if not richardson:
        return b
    b2 = _lie_bracket(state, X1, X2, h / 2)
    return tuple((4 * y - x) * (1 / 3) for x, y in zip(b, b2))


def flow_commutator_residual(state: LatticeState, f1: FlowSpec, f2: FlowSpec, h: float = 1e-3,
                             richardson: bool = True) -> float:
    """Sup norm of the finite-difference commutator ``[d_{f1}, d_{f2}](u, v)``."""
    if f1 == f2:
        return 0.0
    b = vector_field_bracket(state, lambda s: velocity(s, f1), lambda s: velocity(s, f2), h, richardson)
    return max(b[0].norm(), b[1].norm())


# --- Sato equations -------------------------------------------------------

def _constant_free(A: DiffOp, lo: int, hi: int) -> float:
    """Norm of the x-dependent part of the coefficients of ``A`` on ``lo..hi``."""
    worst = 0.0
    for k in range(max(lo, A.kmin), min(hi, A.kmax) + 1):
        c = A.coeff(k)
        data = np.array(c.data)
        data[:, 0, c.J] = 0.0
        worst = max(worst, CoeffFn(data, c.grid).norm())
    return worst


def sato_residual(state: LatticeState, f: FlowSpec, h: float = 1e-3, K: int = 6,
                  band: tuple[int, int] | None = None) -> tuple[float, float]:
    """Check the dressing evolution against the Sato equations.

    ``S(t)``, ``Sbar(t)`` are solved in the pinned gauge at ``t +- h`` (one RK4
    step each way, Richardson-extrapolated central differences).  In that
    gauge ``dS/dt = -B_- S + S C`` with ``C`` constant-coefficient, so
    ``S^-1 (dS/dt + B_- S)`` and ``Sbar^-1 (dSbar/dt - B_+ Sbar)`` must have
    x-independent coefficients.  Returns the x-dependent remainders.
    """
    grid = state.grid
    band = band or (-(K - f.n - 2), 0)

    def deriv(hh):
        sp = step_rk4(state, f, hh)
        sm = step_rk4(state, f, -hh)
        Pp, Pm = dress(sp, K), dress(sm, K)
        dS = (Pp.S - Pm.S) * (0.5 / hh)
        dG = (Pp.Sbar - Pm.Sbar) * (0.5 / hh)
        return dS, dG

    dS1, dG1 = deriv(h)
    dS2, dG2 = deriv(h / 2)
    dS = (dS2 * 4 - dS1) * (1 / 3)
    dSb = (dG2 * 4 - dG1) * (1 / 3)
    P = dress(state, K)
    B = generator_full(P.L, P, f)
    Bm = project_minus(B).diff
    R = op_mul(P.Sinv, dS + op_mul(Bm, P.S, truncate=True), truncate=True)
    r1 = _constant_free(R, *band)
    Bp = project_plus(B)
    Sbar = P.Sbar
    X = MixedOp.lift(dSb) - mixed_mul(Bp, MixedOp.lift(Sbar), truncate=True)
    Rb = mixed_mul(MixedOp.lift(P.Sbarinv), X, truncate=True)
    lo, hi = 0, -band[0]
    r2 = _constant_free(Rb.diff, lo, hi)
    for d, p in Rb.parts.items():
        if d:
            r2 = max(r2, _constant_free(p, lo, hi))
    return r1, r2
