"""Command-line driver: verification suites, evolutions and dressing dumps.

    python -m mextoda verify --suite dressing --out report.json
    python -m mextoda evolve --flow 0,0 --dt 0.01 --steps 100 --out traj.csv
    python -m mextoda dress --out dressing.json
    python -m mextoda report report.json
    python -m mextoda --print-config

Exit codes: 0 all checks pass, 1 a check failed, 2 usage error,
3 numeric precondition failure (resonance, secular exponent, caps).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import addsym, hamiltonian as ham
from .dressing import (
    DressingPair,
    conjugation_residual,
    dressing_residual,
    log_minus,
    log_plus,
    solve_dressing,
)
from .fields import CoeffFn, GridSpec, MethError, ddx, random_field
from .hierarchy import (
    FlowSpec,
    LatticeState,
    evolve,
    flow_commutator_residual,
    lax_rhs,
    sato_residual,
    two_representation_residual,
)
from .opalg import DiffOp, INF, MixedOp, commutator, op_norm, trusted_band

log = logging.getLogger("mextoda")

SUITES = ("dressing", "hierarchy", "hamiltonian", "addsym", "block-table", "all")
ALL_FLOWS = [FlowSpec(a, n) for a in range(3) for n in range(3)]


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Flat run configuration; every field can be set from a JSON file or the command line."""

    epsilon: float = 0.1
    J: int = 8
    Jmax: int = 48
    Dx: int = 6
    band_cap: int = 12
    dmax: int = 2
    K: int = 10
    mmax: int = 3
    lmax: int = 3
    seed: int = 0
    nseeds: int = 1
    amplitude: float = 0.2
    state: str = ""
    h: float = 1e-3
    dt: float = 0.01
    conservation_steps: int = 100
    tau_steps: int = 50
    grad_modes: int = 16
    tol_dressing: float = 1e-8
    tol_log: float = 1e-8
    tol_anomaly: float = 1e-6
    tol_two_rep: float = 1e-8
    tol_spatial: float = 1e-9
    tol_fd: float = 5e-5
    tol_hamiltonian: float = 1e-7
    tol_tau: float = 1e-7
    tol_tau_traj: float = 1e-5
    tol_conservation: float = 1e-7
    tol_secular: float = 1e-7
    tol_os: float = 1e-7
    tol_addsym_fd: float = 1e-4

    def __post_init__(self):
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if f.name.startswith("tol_") and not val > 0:
                raise UsageError(f"{f.name} must be positive")
        for name in ("K", "mmax", "lmax", "nseeds", "band_cap", "grad_modes"):
            if getattr(self, name) <= 0 and name != "K":
                raise UsageError(f"{name} must be positive")
        if self.K < 0:
            raise UsageError("K must be non-negative")
        try:
            self.grid
        except ValueError as e:
            raise UsageError(str(e)) from e

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.epsilon, self.J, self.Jmax, self.Dx, self.band_cap, self.dmax)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_sources(cls, path: str | None, overrides: dict) -> "RunConfig":
        values = {}
        if path:
            with open(path) as fh:
                values.update(json.load(fh))
        values.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)


def states(cfg: RunConfig) -> list[LatticeState]:
    """Loaded state, or ``nseeds`` random zero-mean states from ``seed``."""
    grid = cfg.grid
    if cfg.state:
        with open(cfg.state) as fh:
            return [LatticeState.from_json(json.load(fh), grid)]
    out = []
    for i in range(cfg.nseeds):
        rng = np.random.default_rng(cfg.seed + i)
        out.append(LatticeState(random_field(grid, rng, cfg.amplitude), random_field(grid, rng, cfg.amplitude)))
    return out


# --- reports ---------------------------------------------------------------------

@dataclass
class Check:
    name: str
    anchor: str
    residual: float
    tolerance: float | None
    ledger: float = 0.0
    wall: float = 0.0
    note: str = ""

    @property
    def status(self) -> str:
        if self.tolerance is None:
            return "info"
        return "pass" if self.residual <= self.tolerance else "fail"

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["status"] = self.status
        out["residual"] = _num(self.residual)
        return out


def _num(x):
    return x if np.isfinite(x) else str(x)


class Runner:
    """Collects checks; exceptions inside a check turn it into a failure."""

    def __init__(self):
        self.checks: list[Check] = []

    def run(self, name, anchor, tol, fn, note=""):
        t0 = time.perf_counter()
        try:
            out = fn()
        except MethError as e:
            out = (INF, 0.0, f"{type(e).__name__}: {e}")
        if not isinstance(out, tuple):
            out = (out,)
        res = float(out[0])
        ledger = float(out[1]) if len(out) > 1 else 0.0
        note = out[2] if len(out) > 2 and out[2] else note
        c = Check(name, anchor, res, tol, ledger, time.perf_counter() - t0, note)
        log.info("%-48s %-5s %.3e", name, c.status, res)
        self.checks.append(c)
        return c

    def report(self, suite: str, cfg: RunConfig) -> dict:
        checks = sorted(self.checks, key=lambda c: c.name)
        counts = {s: sum(c.status == s for c in checks) for s in ("pass", "fail", "info")}
        return {
            "suite": suite,
            "config": cfg.to_json(),
            "checks": [c.to_json() for c in checks],
            "summary": counts,
        }


# --- suites -----------------------------------------------------------------------

def _trusted(A) -> float:
    return op_norm(A, trusted_band(A))


def _outside(A: MixedOp, lo, hi) -> float:
    P = A.diff
    out = 0.0
    if P.kmin < lo:
        out = max(out, op_norm(P, (P.kmin, lo - 1)))
    if P.kmax > hi:
        out = max(out, op_norm(P, (hi + 1, P.kmax)))
    return out


def suite_dressing(cfg: RunConfig, R: Runner):
    for i, s in enumerate(states(cfg)):
        tag = f"seed{cfg.seed + i}"
        P = solve_dressing(s.u, s.v, cfg.K)
        r1, r2 = conjugation_residual(P)
        R.run(f"dressing/conj_S/{tag}", "S Lambda S^-1 = L", cfg.tol_dressing, lambda: (r1, P.ledger))
        R.run(f"dressing/conj_Sbar/{tag}", "Sbar Lambda^-1 Sbar^-1 = L", cfg.tol_dressing, lambda: (r2, P.ledger))
        R.run(f"dressing/equation/{tag}", "S Lambda = L S, Sbar Lambda^-1 = L Sbar", cfg.tol_dressing,
              lambda: (dressing_residual(P), P.ledger))
        Lm = MixedOp.lift(P.L)
        lp, lm = log_plus(P), log_minus(P)
        R.run(f"log/commute_plus/{tag}", "[log_+ L, L] = 0", cfg.tol_log,
              lambda: (_trusted(commutator(lp, Lm, truncate=True)), lp.ledger))
        R.run(f"log/commute_minus/{tag}", "[log_- L, L] = 0", cfg.tol_log,
              lambda: (_trusted(commutator(lm, Lm, truncate=True)), lm.ledger))
        R.run(f"log/band_plus/{tag}", "log_+ L difference part strictly negative", cfg.tol_log,
              lambda: _outside(lp, -INF, -1))
        R.run(f"log/band_minus/{tag}", "log_- L difference part non-negative", cfg.tol_log,
              lambda: _outside(lm, 0, INF))


def _spatial_residual(s: LatticeState) -> float:
    r = lax_rhs(s, None, FlowSpec(1, 0))
    eps = s.grid.epsilon
    return max((r.du - ddx(s.u) * (2 * eps)).norm(), (r.dv - ddx(s.v) * (2 * eps)).norm())


def _anomaly(s, f):
    r = lax_rhs(s, None, f, check=False)
    return r.anomaly, r.ledger


def suite_hierarchy(cfg: RunConfig, R: Runner):
    for i, s in enumerate(states(cfg)):
        tag = f"seed{cfg.seed + i}"
        P = solve_dressing(s.u, s.v, cfg.K)
        for f in ALL_FLOWS:
            R.run(f"lax/anomaly/{f.alpha}_{f.n}/{tag}", "Lax flows close on (u, v)", cfg.tol_anomaly,
                  lambda f=f: _anomaly(s, f))
            R.run(f"lax/two_projections/{f.alpha}_{f.n}/{tag}", "[B_+, L] = -[B_-, L]", cfg.tol_two_rep,
                  lambda f=f: two_representation_residual(s, P, f))
        R.run(f"lax/spatial_flow/{tag}", "t_{1,0} is the spatial flow", cfg.tol_spatial,
              lambda: _spatial_residual(s))
        pairs = [((0, 0), (0, 1)), ((0, 0), (1, 0)), ((0, 1), (1, 0))]
        for a, b in pairs:
            R.run(f"lax/commute/{a[0]}_{a[1]}-{b[0]}_{b[1]}/{tag}", "hierarchy flows commute", cfg.tol_fd,
                  lambda a=a, b=b: flow_commutator_residual(s, FlowSpec(*a), FlowSpec(*b), cfg.h))
        for f in (FlowSpec(0, 0), FlowSpec(0, 1), FlowSpec(1, 0)):
            R.run(f"sato/{f.alpha}_{f.n}/{tag}", "Sato equations", cfg.tol_fd,
                  lambda f=f: max(sato_residual(s, f, cfg.h)))


H_FLOWS = (FlowSpec(0, 0), FlowSpec(0, 1), FlowSpec(1, 0), FlowSpec(2, 0))


def _calibrated(s, f):
    c = ham.calibrate(s, f)
    return c.residual, 0.0, c.describe()


def _conservation(cfg: RunConfig, s: LatticeState):
    keys = [(b, n) for b in range(3) for n in range(3)]
    obs = {f"H_{b}_{n}": (lambda st, b=b, n=n: ham.hamiltonian(st, b, n)) for b, n in keys}
    traj = evolve(s, FlowSpec(0, 0), cfg.dt, cfg.conservation_steps, observables=obs)
    out = {}
    for k, vals in traj.observables.items():
        vals = np.asarray(vals)
        out[k] = float(np.abs(vals - vals[0]).max() / max(abs(vals[0]), 1.0))
    return out


def suite_hamiltonian(cfg: RunConfig, R: Runner):
    sts = states(cfg)
    for i, s in enumerate(sts):
        tag = f"seed{cfg.seed + i}"
        for f in H_FLOWS:
            R.run(f"hamiltonian/match/{f.alpha}_{f.n}/{tag}", "flows are pb1-Hamiltonian",
                  cfg.tol_hamiltonian, lambda f=f: _calibrated(s, f))
        for n in (1, 2):
            R.run(f"recursion/branch0/n{n}/{tag}", "bi-Hamiltonian recursion (calibrated index)",
                  cfg.tol_hamiltonian, lambda n=n: ham.recursion_residual(s, None, 0, n, offset=1))
            R.run(f"recursion/branch0_literal/n{n}/{tag}", "bi-Hamiltonian recursion (literal)", None,
                  lambda n=n: ham.recursion_residual(s, None, 0, n))
            for br, var in ((1, "printed"), (2, "printed"), (2, "substituted")):
                for o in (0, 1):
                    R.run(f"recursion/branch{br}_{var}_offset{o}/n{n}/{tag}", "bi-Hamiltonian recursion",
                          None, lambda n=n, br=br, var=var, o=o: ham.recursion_residual(s, None, br, n, var, o))
        flows = [(0, 0), (0, 1), (1, 0), (2, 0)]
        for j, a in enumerate(flows):
            for b in flows[j + 1:]:
                nm = f"{a[0]}_{a[1]}-{b[0]}_{b[1]}"
                R.run(f"tau/symmetry/{nm}/{tag}", "tau symmetry", cfg.tol_tau,
                      lambda a=a, b=b: ham.tau_symmetry_residual(s, None, a, b))
                R.run(f"tau/symmetry_swapped/{nm}/{tag}", "tau symmetry, log densities exchanged", None,
                      lambda a=a, b=b: ham.tau_symmetry_residual(s, None, a, b, pairing="swapped"))
        for b in range(3):
            for n in range(4):
                R.run(f"secular/h_{b}_{n}/{tag}", "densities are periodic", cfg.tol_secular,
                      lambda b=b, n=n: ham.density(s, None, b, n).secular_norm())
    s = sts[0]
    traj = evolve(s, FlowSpec(0, 0), cfg.dt, cfg.tau_steps, observables={})
    rep = ham.tau_report(traj)
    R.run("tau/closedness", "tau function exists", cfg.tol_tau_traj, lambda: rep.closedness)
    R.run("tau/v_relation", "tau function reconstructs v", cfg.tol_tau_traj, lambda: rep.v_relation)
    R.run("tau/printed_relations", "tau function relations as displayed", None, lambda: rep.printed_relations)
    drift = _conservation(cfg, s)
    for k, d in drift.items():
        R.run(f"conservation/{k}", "Hamiltonians conserved along t_{0,0}", cfg.tol_conservation, lambda d=d: d)


def _addsym_flows(cfg: RunConfig):
    return [(m, l) for m in range(cfg.mmax + 1) for l in range(cfg.lmax + 1)]


def _reduction(P, os, m, l):
    r = addsym.additional_flow_rhs(P, os, m, l)
    note = "" if addsym.is_periodic_flow(m, l) else "x-secular velocity"
    return max(r.anomaly, r.two_rep), r.ledger, note


def suite_addsym(cfg: RunConfig, R: Runner):
    sts = states(cfg)
    for i, s in enumerate(sts):
        tag = f"seed{cfg.seed + i}"
        P = solve_dressing(s.u, s.v, cfg.K)
        os_ = addsym.orlov_schulman(P, {}, state=s)
        can = addsym.canonical_residuals(os_, P)
        for k, v in can.items():
            tol = cfg.tol_os if k in ("L_M", "L_Mbar", "MmMbar_L", "logp_M_minus_Sinv",
                                      "logm_Mbar_minus_Sbarinv") else None
            R.run(f"os/{k}/{tag}", "Orlov-Schulman relations", tol, lambda v=v: (v, os_.ledger))
        for m, l in _addsym_flows(cfg):
            R.run(f"additional/reduction/{m}_{l}/{tag}", "additional flows preserve the reduction",
                  cfg.tol_os, lambda m=m, l=l: _reduction(P, os_, m, l))
            for f in (FlowSpec(0, 0), FlowSpec(0, 1), FlowSpec(1, 0)):
                R.run(f"additional/commute/{m}_{l}-{f.alpha}_{f.n}/{tag}",
                      "additional flows commute with the hierarchy", cfg.tol_addsym_fd,
                      lambda m=m, l=l, f=f: addsym.hierarchy_commutation_residual(P, os_, (m, l), f, cfg.h))
        for var in addsym.GAMMA_VARIANTS:
            o = addsym.orlov_schulman(P, {(0, 1): 0.2}, var, state=s)
            for n in range(3):
                R.run(f"os/flows_of_M/{var}/{n}/{tag}", "dM/dt_{0,n} = [B_+, M]",
                      cfg.tol_os if var == "flow" else None,
                      lambda o=o, n=n: addsym.flowsofM_residual(o, FlowSpec(0, n)))
        o = addsym.orlov_schulman(P, {(0, 1): 0.2}, state=s)
        for var in addsym.T11_VARIANTS:
            R.run(f"additional/t11_formula/{var}/{tag}", "explicit t*_{1,1} flow",
                  cfg.tol_os if var == "printed" else None,
                  lambda var=var: addsym.t11_flow_formula_residual(P, o, var))
    s = sts[0]
    for ml in ((0, 1), (1, 0), (1, 1)):
        def gen(ml=ml):
            c = addsym.additional_pb1_residual(s, *ml, K=cfg.K, J=cfg.grad_modes)
            return c.residual, 0.0, f"H*_{ml[0]},{ml[1] + c.offset} * {c.scale_name}"
        R.run(f"additional/hamiltonian/{ml[0]}_{ml[1]}", "additional flows are pb1-Hamiltonian",
              cfg.tol_addsym_fd, gen)
    probe = addsym.divergence_probe(s)
    R.run("additional/divergence_probe/2_0", "(M - Mbar)^2 partial sums K = 6, 8, 10", None,
          lambda: (probe[-1] / probe[0], 0.0, " ".join(f"{p:.3e}" for p in probe)))


def block_pairs(cfg: RunConfig):
    idx = _addsym_flows(cfg)
    out = []
    for a in idx:
        for b in idx:
            if a < b and a[0] + b[0] <= 4 and a[1] + b[1] <= 4 and a[0] + b[0] >= 1:
                out.append((a, b))
    return out


def block_table(cfg: RunConfig) -> list[dict]:
    s = states(cfg)[0]
    P = solve_dressing(s.u, s.v, cfg.K)
    os_ = addsym.orlov_schulman(P, {}, state=s)
    rows = []
    for a, b in block_pairs(cfg):
        pred = addsym.structure_constant(a, b)
        row = {"ml": f"{a[0]},{a[1]}", "nk": f"{b[0]},{b[1]}",
               "target": f"{a[0] + b[0] - 1},{a[1] + b[1] - 1}", "predicted": pred,
               "measured": "", "residual": "", "status": ""}
        try:
            c, res = addsym.measured_constant(os_, a, b, cfg.h)
            full = addsym.block_bracket_residual(P, os_, a, b, cfg.h)
            row.update(measured=f"{c:.12g}", residual=f"{full:.3e}",
                       status="pass" if full <= cfg.tol_addsym_fd else "fail")
        except addsym.DivergentProduct:
            row["status"] = "divergent"
        except addsym.SecularFlow:
            row["status"] = "secular"
        rows.append(row)
    return rows


def suite_block(cfg: RunConfig, R: Runner, rows=None):
    rows = block_table(cfg) if rows is None else rows
    for r in rows:
        res = float(r["residual"]) if r["residual"] else INF
        R.run(f"block/{r['ml']}-{r['nk']}", "Block algebra relations", cfg.tol_addsym_fd,
              lambda res=res: res, note=r["status"])
    return rows


SUITE_FNS = {
    "dressing": suite_dressing,
    "hierarchy": suite_hierarchy,
    "hamiltonian": suite_hamiltonian,
    "addsym": suite_addsym,
}


# --- dressing dump -------------------------------------------------------------------

def dressing_to_json(P: DressingPair, state: LatticeState) -> dict:
    r1, r2 = conjugation_residual(P)
    out = {
        "K": P.order,
        "state": state.to_json(),
        "S": P.S.to_json(),
        "Sinv": P.Sinv.to_json(),
        "residuals": {"conj_S": r1, "conj_Sbar": r2, "equation": dressing_residual(P),
                      "equation_full": dressing_residual(P, full=True),
                      "ledger": P.ledger},
    }
    if P.has_bar:
        out.update(G=P.G.to_json(), Ginv=P.Ginv.to_json(), phi=P.phi.to_json())
    return out


def dressing_from_json(obj: dict, grid: GridSpec) -> DressingPair:
    K = obj["K"]
    state = LatticeState.from_json(obj["state"], grid)
    S = DiffOp.from_json(obj["S"], grid).with_trust((-K, INF))
    Sinv = DiffOp.from_json(obj["Sinv"], grid).with_trust((-K, INF))
    G = Ginv = phi = None
    if "G" in obj:
        G = DiffOp.from_json(obj["G"], grid).with_trust((-INF, K))
        Ginv = DiffOp.from_json(obj["Ginv"], grid).with_trust((-INF, K))
        phi = CoeffFn.from_json(obj["phi"], grid)
    return DressingPair(S, Sinv, G, Ginv, phi, K, state.L, {})


# --- commands ---------------------------------------------------------------------------

def _write_json(obj, path):
    text = json.dumps(obj, indent=1, sort_keys=True)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _write_csv(rows, header, path):
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_verify(cfg: RunConfig, suite: str, out: str | None = None, table: str | None = None) -> int:
    if suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    R = Runner()
    names = list(SUITE_FNS) if suite == "all" else ([suite] if suite in SUITE_FNS else [])
    for name in names:
        SUITE_FNS[name](cfg, R)
    if suite in ("block-table", "all"):
        rows = suite_block(cfg, R)
        if suite == "block-table" or table:
            header = ["ml", "nk", "target", "predicted", "measured", "residual", "status"]
            _write_csv([[r[k] for k in header] for r in rows], header,
                       table if table else (out if suite == "block-table" else None))
    report = R.report(suite, cfg)
    if suite != "block-table" or table:
        _write_json(report, out)
    return 1 if report["summary"]["fail"] else 0


def cmd_evolve(cfg: RunConfig, flow: FlowSpec, dt: float, steps: int, out: str | None,
               final: str | None = None) -> int:
    s = states(cfg)[0]
    obs = {f"H_{b}_{n}": (lambda st, b=b, n=n: ham.hamiltonian(st, b, n))
           for b in range(3) for n in range(3)}
    traj = evolve(s, flow, dt, steps, observables=obs)
    _write_csv(list(traj.rows()), traj.header(), out)
    if final is None and out not in (None, "-"):
        final = out.rsplit(".", 1)[0] + ".final.json"
    if final:
        _write_json(traj.states[-1].to_json(), final)
    return 0


def cmd_dress(cfg: RunConfig, out: str | None) -> int:
    s = states(cfg)[0]
    try:
        P = solve_dressing(s.u, s.v, cfg.K)
    except MethError:
        P = solve_dressing(s.u, s.v, cfg.K, bar=False)
    dump = dressing_to_json(P, s)
    _write_json(dump, out)
    r = dump["residuals"]
    print(f"K={P.order}  conj_S={r['conj_S']:.3e}  conj_Sbar={r['conj_Sbar']:.3e}  "
          f"equation={r['equation']:.3e}  untruncated={r['equation_full']:.3e}  ledger={r['ledger']:.3e}", file=sys.stderr)
    return 0


def cmd_report(path: str) -> int:
    with open(path) as fh:
        rep = json.load(fh)
    rows = rep["checks"]
    w = max([len(c["name"]) for c in rows] + [4])
    print(f"{'name':<{w}}  {'status':<6} {'residual':>10} {'tol':>9}  note")
    for c in rows:
        res = c["residual"]
        res = f"{res:.3e}" if isinstance(res, float) else str(res)
        tol = "-" if c["tolerance"] is None else f"{c['tolerance']:.0e}"
        print(f"{c['name']:<{w}}  {c['status']:<6} {res:>10} {tol:>9}  {c['note']}")
    s = rep["summary"]
    print(f"suite {rep['suite']}: {s['pass']} pass, {s['fail']} fail, {s['info']} info")
    return 1 if s["fail"] else 0


# --- argument parsing ---------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config_args(p):
    p.add_argument("--config", help="JSON file with flat config keys")
    for f in dataclasses.fields(RunConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None,
                       type=type(f.default) if f.default is not None else str)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mextoda", description="Numerical checks of the modified extended Toda hierarchy")
    p.add_argument("--print-config", action="store_true", help="print the default config and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd")
    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", default="dressing")
    v.add_argument("--out", default=None, help="report path (JSON; CSV for block-table)")
    v.add_argument("--table", default=None, help="block-table CSV path when running 'all'")
    _config_args(v)
    e = sub.add_parser("evolve", help="integrate one flow with RK4")
    e.add_argument("--flow", default="0,0")
    e.add_argument("--steps", type=int, default=10)
    e.add_argument("--out", default=None, help="trajectory CSV")
    e.add_argument("--final", default=None, help="final state JSON")
    _config_args(e)
    d = sub.add_parser("dress", help="solve and dump the dressing operators")
    d.add_argument("--out", default=None)
    _config_args(d)
    r = sub.add_parser("report", help="print a JSON report as a table")
    r.add_argument("path")
    return p


def _config(args) -> RunConfig:
    names = [f.name for f in dataclasses.fields(RunConfig)]
    return RunConfig.from_sources(args.config, {k: getattr(args, k) for k in names})


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.print_config:
            _write_json(RunConfig().to_json(), None)
            return 0
        if args.cmd is None:
            raise UsageError("missing command")
        if args.cmd == "report":
            return cmd_report(args.path)
        cfg = _config(args)
        if args.cmd == "verify":
            return cmd_verify(cfg, args.suite, args.out, args.table)
        if args.cmd == "evolve":
            try:
                flow = FlowSpec.parse(args.flow)
            except ValueError as err:
                raise UsageError(f"bad --flow {args.flow!r}: {err}") from err
            if args.steps < 0:
                raise UsageError("--steps must be non-negative")
            return cmd_evolve(cfg, flow, cfg.dt, args.steps, args.out, args.final)
        return cmd_dress(cfg, args.out)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except MethError as err:
        print(f"numeric precondition failed: {type(err).__name__}: {err}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
