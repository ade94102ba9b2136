"""Hamiltonian densities, variational derivatives and the two Poisson brackets.

Densities (residue = ``Lambda^0`` coefficient of the difference part)::

    h_{0,n} = Res L^{n+1} / (n+1)!
    h_{1,n} = (2/n!) Res[L^n (log_+ L - c_n)]
    h_{2,n} = (2/n!) Res[L^n (log_- L - c_n)]          variant "printed"
    h_{2,n} = (2/(n+1)!) Res[L^{n+1} (log_- L - c_{n+1})]  variant "shifted"

Variational derivatives are obtained in forward mode: the fields carry
tangent slices along ``e^{ijx}`` and ``(dH/du)_{-j}`` is the period average
of the corresponding tangent of the density.

Brackets, with ``g = (dH/du, dH/dv)``::

    pb1: du = (Lambda - 1) g_v / eps,  dv = (1 - Lambda^-1) g_u / eps
    pb2: du = [(Lambda e^v - e^v Lambda^-1) g_u + u (Lambda - 1) g_v] / eps
         dv = [(1 - Lambda^-1)(u g_u) + (Lambda - Lambda^-1) g_v] / eps
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dressing import DressingPair, log_minus, log_plus, solve_dressing
from .fields import (
    CDTYPE,
    CoeffFn,
    exp_fn,
    invert_one_minus_shift,
    mean,
    mean_all,
    shift,
)
from .hierarchy import (
    FlowSpec,
    LatticeState,
    Trajectory,
    harmonic,
    lax_rhs,
)
from .opalg import DiffOp, lax_operator, op_mul, op_power, residue

log = logging.getLogger(__name__)

VARIANTS = ("printed", "shifted")
MATCH_TOL = 1e-7


@dataclass(frozen=True)
class Density:
    beta: int
    n: int
    value: CoeffFn
    variant: str = "printed"

    def integral(self) -> complex:
        """``int_0^{2pi} h dx``."""
        return 2 * np.pi * mean(self.value)

    def secular_norm(self) -> float:
        return self.value.secular_part().norm()


@dataclass(frozen=True)
class VarGrad:
    dHdu: CoeffFn
    dHdv: CoeffFn

    def is_real(self) -> bool:
        return self.dHdu.is_real(1e-10) and self.dHdv.is_real(1e-10)


@dataclass(frozen=True)
class Calibration:
    """Generator chosen for a flow: ``scale * pb1(grad H_{beta, n + offset})``."""

    flow: FlowSpec
    offset: int
    scale_name: str
    scale: float
    residual: float
    table: dict = field(default_factory=dict)

    def describe(self) -> str:
        a, n = self.flow.alpha, self.flow.n
        return f"t_{a},{n} <- {self.scale_name} * pb1(H_{a},{n + self.offset})"


# --- densities ------------------------------------------------------------

def density_order(n: int, margin: int = 3) -> int:
    return n + 1 + margin


def _needs_dressing(beta: int) -> bool:
    return beta != 0


def density_fn(u: CoeffFn, v: CoeffFn, beta: int, n: int, variant: str = "printed",
               P: DressingPair | None = None, K: int | None = None) -> CoeffFn:
    """Density ``h_{beta,n}`` as a function of the fields (tangents propagate)."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    grid = u.grid
    if beta == 0:
        L = lax_operator(u, exp_fn(v)) if P is None else P.L
        top = op_mul(op_power(L, n), L, band=(0, 0))
        return residue(top) * (1.0 / math.factorial(n + 1))
    p = n + 1 if (beta == 2 and variant == "shifted") else n
    if P is None:
        P = solve_dressing(u, v, K or density_order(p), bar=beta == 2)
    L = P.L
    c = float(harmonic(p))
    # derivation terms carry no residue, so only the difference part of log_pm L matters
    W = (log_plus(P) if beta == 1 else log_minus(P)).diff
    Ln = op_power(L, p)
    r = residue(op_mul(Ln, W, band=(0, 0))) - residue(Ln) * c
    return r * (2.0 / math.factorial(p))


def density(state: LatticeState, P: DressingPair | None, beta: int, n: int,
            variant: str = "printed") -> Density:
    """``h_{beta,n}`` on ``state``; ``P`` is solved when missing."""
    return Density(beta, n, density_fn(state.u, state.v, beta, n, variant, P), variant)


def hamiltonian(state: LatticeState, beta: int, n: int, variant: str = "printed") -> float:
    """``H_{beta,n} = int h_{beta,n} dx`` (real part)."""
    return float(density(state, None, beta, n, variant).integral().real)


# --- variational derivatives ------------------------------------------------

def _with_tangents(f: CoeffFn, dirs: np.ndarray) -> CoeffFn:
    """Append tangent slices ``dirs`` (shape ``(m, 2J+1)``) to a periodic ``f``."""
    J = max(f.J, (dirs.shape[-1] - 1) // 2)
    base = np.zeros((1 + len(dirs), 1, 2 * J + 1), dtype=CDTYPE)
    base[0, 0, J - f.J: J + f.J + 1] = f.data[0, 0]
    jd = (dirs.shape[-1] - 1) // 2
    base[1:, 0, J - jd: J + jd + 1] = dirs
    return CoeffFn(base, f.grid, f.ledger, trim=False)


def directional(state: LatticeState, fn, du: CoeffFn, dv: CoeffFn) -> CoeffFn:
    """Derivative of ``fn(u, v)`` along ``(du, dv)`` (forward mode)."""
    J = max(state.u.J, state.v.J, du.J, dv.J)

    def pad(c):
        arr = np.zeros((1, 2 * J + 1), dtype=CDTYPE)
        arr[0, J - c.J: J + c.J + 1] = c.data[0, 0]
        return arr

    out = fn(_with_tangents(state.u, pad(du)), _with_tangents(state.v, pad(dv)))
    return out.tangent(0)


def var_deriv(state: LatticeState, fn, J: int | None = None, chunk: int = 40) -> VarGrad:
    """``(dH/du, dH/dv)`` of ``H = int fn(u, v) dx``.

    ``fn`` maps fields to a density ``CoeffFn``; it is differentiated along
    every ``e^{ijx}``, ``|j| <= J`` (default ``Jmax``), in chunks.
    """
    grid = state.grid
    J = grid.Jmax if J is None else J
    nm = 2 * J + 1
    eye = np.eye(nm, dtype=CDTYPE)
    dirs = [(0, i) for i in range(nm)] + [(1, i) for i in range(nm)]
    grads = np.zeros((2, nm), dtype=CDTYPE)
    zero = np.zeros((0, nm), dtype=CDTYPE)
    for start in range(0, len(dirs), chunk):
        part = dirs[start: start + chunk]
        du = np.array([eye[i] if w == 0 else np.zeros(nm) for w, i in part], dtype=CDTYPE)
        dv = np.array([eye[i] if w == 1 else np.zeros(nm) for w, i in part], dtype=CDTYPE)
        h = fn(_with_tangents(state.u, du if len(du) else zero),
               _with_tangents(state.v, dv if len(dv) else zero))
        avg = mean_all(h)[1:]
        for (w, i), a in zip(part, avg):
            # direction e^{ijx} picks out mode -j of the gradient
            grads[w, nm - 1 - i] = a
    return VarGrad(CoeffFn(grads[0], grid), CoeffFn(grads[1], grid))


def density_grad(state: LatticeState, beta: int, n: int, variant: str = "printed",
                 J: int | None = None) -> VarGrad:
    return var_deriv(state, lambda u, v: density_fn(u, v, beta, n, variant), J)


# --- brackets ---------------------------------------------------------------

def pb1_flow(g: VarGrad) -> tuple[CoeffFn, CoeffFn]:
    eps = g.dHdu.grid.epsilon
    du = (shift(g.dHdv, 1) - g.dHdv) * (1.0 / eps)
    dv = (g.dHdu - shift(g.dHdu, -1)) * (1.0 / eps)
    return du, dv


def pb2_flow(state: LatticeState, g: VarGrad) -> tuple[CoeffFn, CoeffFn]:
    eps = state.grid.epsilon
    u, ev = state.u, exp_fn(state.v)
    gu, gv = g.dHdu, g.dHdv
    du = shift(ev * gu, 1) - ev * shift(gu, -1) + u * (shift(gv, 1) - gv)
    ug = u * gu
    dv = ug - shift(ug, -1) + shift(gv, 1) - shift(gv, -1)
    return du * (1.0 / eps), dv * (1.0 / eps)


def pairing(g: VarGrad, X: tuple[CoeffFn, CoeffFn]) -> complex:
    """``int (g_u X_u + g_v X_v) dx``."""
    return 2 * np.pi * (mean(g.dHdu * X[0]) + mean(g.dHdv * X[1]))


def _vf_norm(a, b) -> float:
    return max(a[0].norm(), a[1].norm()) if b is None else max((a[0] - b[0]).norm(), (a[1] - b[1]).norm())


# --- Hamiltonian matching ------------------------------------------------------

def _scales(eps: float) -> dict[str, float]:
    return {"1": 1.0, "1/eps": 1.0 / eps, "eps": eps}


def calibrate(state: LatticeState, f: FlowSpec, variant: str = "printed",
              P: DressingPair | None = None) -> Calibration:
    """Search ``{h_{b,n}, h_{b,n+1}} x {1, 1/eps, eps}`` for the generator of flow ``f``."""
    rhs = lax_rhs(state, P, f, check=False)
    target = (rhs.du, rhs.dv)
    table = {}
    for offset in (0, 1):
        flow = pb1_flow(density_grad(state, f.alpha, f.n + offset, variant))
        for name, s in _scales(state.grid.epsilon).items():
            table[(offset, name)] = _vf_norm(target, (flow[0] * s, flow[1] * s))
    (offset, name), res = min(table.items(), key=lambda kv: kv[1])
    hits = [k for k, r in table.items() if r <= MATCH_TOL]
    if len(hits) > 1:
        log.warning("flow %s: calibration not unique: %s", f, hits)
    choice = Calibration(f, offset, name, _scales(state.grid.epsilon)[name], res,
                         {f"H_{f.alpha},{f.n + o} * {s}": r for (o, s), r in table.items()})
    log.info("calibration %s residual %.3e", choice.describe(), res)
    return choice


def hamiltonian_match_residual(state: LatticeState, P: DressingPair | None, f: FlowSpec,
                               variant: str = "printed") -> float:
    """``||lax_rhs(f) - scale * pb1(grad H)||`` for the calibrated generator."""
    return calibrate(state, f, variant, P).residual


# --- bi-Hamiltonian recursion ----------------------------------------------------

def recursion_sides(state: LatticeState, branch: int, n: int, variant: str = "printed",
                    offset: int = 0):
    """Both sides of the recursion line ``branch`` at level ``n``.

    ``variant`` ``"substituted"`` replaces the last ``H_{2,n-1}`` of branch 2
    by ``H_{0,n-1}``; ``offset`` shifts every Hamiltonian index.
    """
    if n < 1:
        raise ValueError("recursion needs n >= 1")
    o = offset

    def g(b, k):
        return density_grad(state, b, k + o)

    def comb(*terms):
        du = dv = CoeffFn.zero(state.grid)
        for c, (a, b) in terms:
            du, dv = du + a * c, dv + b * c
        return du, dv

    if branch == 0:
        lhs = pb2_flow(state, g(0, n - 1))
        rhs = comb((n + 1.0, pb1_flow(g(0, n))))
    elif branch == 1:
        lhs = pb2_flow(state, g(1, n - 1))
        rhs = comb((float(n), pb1_flow(g(1, n))), (2.0, pb1_flow(g(0, n - 1))))
    elif branch == 2:
        lhs = pb2_flow(state, g(2, n - 1))
        last = g(0, n - 1) if variant == "substituted" else g(2, n - 1)
        rhs = comb((float(n), pb1_flow(g(2, n))), (2.0, pb1_flow(last)))
    else:
        raise ValueError(f"unknown branch {branch}")
    return lhs, rhs


def recursion_residual(state: LatticeState, P: DressingPair | None, branch: int, n: int,
                       variant: str = "printed", offset: int = 0) -> float:
    """Sup norm of the difference of the two sides of a recursion line."""
    lhs, rhs = recursion_sides(state, branch, n, variant, offset)
    return _vf_norm(lhs, rhs)


# --- tau symmetry and tau function ------------------------------------------------

def density_rate(state: LatticeState, dens: tuple[int, int], f: FlowSpec,
                 variant: str = "printed") -> CoeffFn:
    """``d h_{dens} / d t_f`` by the chain rule through ``lax_rhs``."""
    rhs = lax_rhs(state, None, f, check=False)
    b, n = dens
    return directional(state, lambda u, v: density_fn(u, v, b, n, variant), rhs.du, rhs.dv)


PAIRINGS = ("same", "swapped")


def density_index(f: FlowSpec, pairing: str = "same") -> tuple[int, int]:
    """Density paired with flow ``f``: ``h_{alpha,n}`` or, swapped, ``h_{3-alpha,n}``."""
    if pairing not in PAIRINGS:
        raise ValueError(f"unknown pairing {pairing!r}")
    if pairing == "swapped" and f.alpha:
        return 3 - f.alpha, f.n
    return f.alpha, f.n


def tau_symmetry_residual(state: LatticeState, P: DressingPair | None, f1, f2,
                          variant: str = "printed", offset: int = 0,
                          pairing: str = "same") -> float:
    """``||d h_{f1} / d t_{f2 + offset} - d h_{f2} / d t_{f1 + offset}||``.

    ``pairing="swapped"`` pairs the log flows ``(1,n)``, ``(2,n)`` with the
    densities built from the opposite logarithm.
    """
    f1, f2 = FlowSpec(*f1), FlowSpec(*f2)
    if f1 == f2:
        return 0.0
    a = density_rate(state, density_index(f1, pairing), FlowSpec(f2.alpha, f2.n + offset), variant)
    b = density_rate(state, density_index(f2, pairing), FlowSpec(f1.alpha, f1.n + offset), variant)
    return (a - b).norm()


def _simpson_cumulative(values: list, dt: float) -> list:
    """Cumulative integrals at even indices (composite Simpson)."""
    out = [values[0] * 0.0]
    for i in range(2, len(values), 2):
        out.append(out[-1] + (values[i - 2] + values[i - 1] * 4 + values[i]) * (dt / 3))
    return out


@dataclass(frozen=True)
class TauReport:
    closedness: float
    v_relation: float
    printed_relations: float

    @property
    def residual(self) -> float:
        return max(self.closedness, self.v_relation)


def log_tau_rate(u: CoeffFn) -> CoeffFn:
    """``d log tau / d t_{0,0} = (Lambda - 1)^-1 u / eps`` up to an x-constant."""
    return invert_one_minus_shift(u) * (-1.0 / u.grid.epsilon)


def tau_report(traj: Trajectory, pairs=(((0, 0), (0, 1)),), stride: int = 10) -> TauReport:
    """Tau-function checks along a ``t_{0,0}`` trajectory with uniform steps.

    * closedness: tau symmetry of each pair at every ``stride``-th state;
    * v-relation: ``log tau`` rebuilt by Simpson quadrature of
      ``(Lambda - 1)^-1 u / eps`` must give
      ``v(t) - v(0) = eps (Lambda + Lambda^-1 - 2)(log tau(t) - log tau(0))``;
    * printed relations ``v = eps d_t log(tau(x+eps)/tau)`` and
      ``u = log(tau(x+eps) tau(x-eps)/tau^2)`` read literally (report only).
    """
    states, ts = traj.states, traj.ts
    if len(states) < 3:
        raise ValueError("trajectory too short")
    dts = np.diff(ts)
    dt = float(dts[0])
    if not np.allclose(dts, dt):
        raise ValueError("trajectory steps must be uniform")
    closed = 0.0
    for s in states[::stride]:
        for p, q in pairs:
            closed = max(closed, tau_symmetry_residual(s, None, p, q))
    rates = [log_tau_rate(s.u) for s in states]
    logtau = _simpson_cumulative(rates, dt)
    eps = states[0].grid.epsilon
    vrel = 0.0
    printed = 0.0
    for i, lt in zip(range(0, len(states), 2), logtau):
        s = states[i]
        lap = shift(lt, 1) + shift(lt, -1) - lt * 2
        vrel = max(vrel, (s.v - states[0].v - lap * eps).norm())
        printed = max(printed, (s.u - states[0].u - lap).norm(),
                      (s.v - (shift(rates[i], 1) - rates[i]) * eps).norm())
    return TauReport(closed, vrel, printed)


def tau_relations_residual(traj: Trajectory, **kw) -> float:
    return tau_report(traj, **kw).residual
