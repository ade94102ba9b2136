"""Difference operators in the shift and their extension by powers of eps*d/dx.

Normal ordering: coefficients stand left of ``Lambda^k`` and of
``(eps d)^d``.  Commutation rules used throughout::

    Lambda^k f = f(x + k eps) Lambda^k
    (eps d) f  = f (eps d) + eps f_x

Every operator carries a *trusted interval* ``(tlo, thi)``: stored
coefficients equal those of the exact (possibly infinite) operator for
``tlo <= k <= thi``; infinite ends mean the exact operator has no tail
there.  Products propagate the interval, so residual checks can be
restricted to coefficients that truncation cannot have touched.
"""
from __future__ import annotations

import json
import math
from typing import Iterable

import numpy as np

from .fields import (
    CoeffFn,
    DegreeOverflow,
    GridSpec,
    MethError,
    CDTYPE,
    PI_LD,
    RDTYPE,
    _bilinear_fourier,
    _pad_degree,
    _pad_modes,
    binomial_shift_matrix,
    ddx_array,
    dual_product,
    effective_degree,
    grid_values,
    to_grid,
    translate_array,
)

INF = math.inf


class BandOverflow(MethError):
    pass


class DerivationOverflow(MethError):
    pass


def _degree_per_band(data: np.ndarray) -> np.ndarray:
    """Effective x-degree of every band; -1 for identically zero bands."""
    mags = np.abs(data).max(axis=(0, 3))  # (nk, D+1)
    top = mags.max() if mags.size else 0.0
    out = np.full(data.shape[1], -1)
    if top == 0.0:
        return out
    for k in range(data.shape[1]):
        nz = np.nonzero(mags[k] > 1e-14 * top)[0]
        if nz.size:
            out[k] = nz[-1]
        elif mags[k].max() > 0:
            out[k] = 0
    return out


class DiffOp:
    """Laurent polynomial ``sum_k c_k(x) Lambda^k`` over a finite band.

    ``data`` has shape ``(T, nk, D + 1, 2 J + 1)`` with band index
    ``k = kmin + i``; the leading axis is the tangent axis of
    :mod:`mextoda.fields`.
    """

    __slots__ = ("kmin", "data", "grid", "trust", "ledger")

    def __init__(self, kmin: int, data, grid: GridSpec, trust=(-INF, INF), ledger: float = 0.0):
        arr = np.asarray(data, dtype=CDTYPE)
        if arr.ndim == 3:
            arr = arr[None]
        if arr.ndim != 4:
            raise ValueError("DiffOp data must be (T, nk, D+1, 2J+1)")
        # drop identically zero edge bands
        nzb = np.nonzero(np.any(arr != 0, axis=(0, 2, 3)))[0]
        if nzb.size == 0:
            arr = np.zeros((arr.shape[0], 1, 1, 1), dtype=CDTYPE)
            kmin = 0
        else:
            arr = arr[:, nzb[0]: nzb[-1] + 1]
            kmin = kmin + int(nzb[0])
            D = effective_degree(arr)
            arr = arr[:, :, : D + 1]
        if not arr.flags.writeable:
            arr = np.array(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "kmin", int(kmin))
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "trust", (float(trust[0]), float(trust[1])))
        object.__setattr__(self, "ledger", float(ledger))

    def __setattr__(self, name, value):
        raise AttributeError("DiffOp is immutable")

    # --- construction --------------------------------------------------
    @classmethod
    def from_coeffs(cls, coeffs: dict, grid: GridSpec, trust=(-INF, INF)) -> "DiffOp":
        """Build from ``{k: CoeffFn or scalar}``."""
        if not coeffs:
            return cls.zero(grid)
        fns = {k: (c if isinstance(c, CoeffFn) else CoeffFn.const(c, grid)) for k, c in coeffs.items()}
        T = max(f.data.shape[0] for f in fns.values())
        D = max(f.xdeg for f in fns.values())
        J = max(f.J for f in fns.values())
        kmin, kmax = min(fns), max(fns)
        arr = np.zeros((T, kmax - kmin + 1, D + 1, 2 * J + 1), dtype=CDTYPE)
        ledger = 0.0
        for k, f in fns.items():
            blk = _pad_modes(_pad_degree(f.data, D), J)
            arr[: blk.shape[0], k - kmin] = blk
            ledger += f.ledger
        return cls(kmin, arr, grid, trust, ledger)

    @classmethod
    def zero(cls, grid: GridSpec) -> "DiffOp":
        return cls(0, np.zeros((1, 1, 1, 1), dtype=CDTYPE), grid)

    @classmethod
    def identity(cls, grid: GridSpec) -> "DiffOp":
        return cls.shift_op(0, grid)

    @classmethod
    def shift_op(cls, k: int, grid: GridSpec) -> "DiffOp":
        return cls(k, np.ones((1, 1, 1, 1), dtype=CDTYPE), grid)

    # --- shape -----------------------------------------------------------
    @property
    def kmax(self) -> int:
        return self.kmin + self.data.shape[1] - 1

    @property
    def band(self) -> tuple[int, int]:
        return self.kmin, self.kmax

    @property
    def ntan(self) -> int:
        return self.data.shape[0] - 1

    @property
    def xdeg(self) -> int:
        return self.data.shape[2] - 1

    @property
    def J(self) -> int:
        return (self.data.shape[3] - 1) // 2

    def is_zero(self) -> bool:
        return not np.any(self.data)

    def coeff(self, k: int) -> CoeffFn:
        if k < self.kmin or k > self.kmax:
            return CoeffFn(np.zeros((self.data.shape[0], 1, 1)), self.grid)
        return CoeffFn(self.data[:, k - self.kmin], self.grid, self.ledger)

    def coeffs(self) -> dict[int, CoeffFn]:
        return {k: self.coeff(k) for k in range(self.kmin, self.kmax + 1)}

    def value(self) -> "DiffOp":
        return DiffOp(self.kmin, self.data[:1], self.grid, self.trust, self.ledger)

    def with_trust(self, trust) -> "DiffOp":
        return DiffOp(self.kmin, self.data, self.grid, trust, self.ledger)

    def restrict(self, lo: int, hi: int) -> "DiffOp":
        """Keep bands ``lo..hi``; what is cut off becomes untrusted."""
        lo_, hi_ = max(lo, self.kmin), min(hi, self.kmax)
        if lo_ > hi_:
            return DiffOp(0, np.zeros((self.data.shape[0], 1, 1, 1)), self.grid,
                          _cut_trust(self, lo, hi), self.ledger)
        arr = self.data[:, lo_ - self.kmin: hi_ - self.kmin + 1]
        return DiffOp(lo_, arr, self.grid, _cut_trust(self, lo, hi), self.ledger)

    # --- linear structure -------------------------------------------------
    def _combine(self, other: "DiffOp", sign: float) -> "DiffOp":
        kmin = min(self.kmin, other.kmin)
        kmax = max(self.kmax, other.kmax)
        D = max(self.xdeg, other.xdeg)
        J = max(self.J, other.J)
        T = max(self.data.shape[0], other.data.shape[0])
        if self.data.shape[0] != other.data.shape[0] and min(self.data.shape[0], other.data.shape[0]) != 1:
            raise ValueError("tangent counts differ")
        arr = np.zeros((T, kmax - kmin + 1, D + 1, 2 * J + 1), dtype=CDTYPE)
        a = _pad_modes(_pad_degree(self.data, D), J)
        b = _pad_modes(_pad_degree(other.data, D), J)
        arr[: a.shape[0], self.kmin - kmin: self.kmax - kmin + 1] += a
        arr[: b.shape[0], other.kmin - kmin: other.kmax - kmin + 1] += sign * b
        trust = (max(self.trust[0], other.trust[0]), min(self.trust[1], other.trust[1]))
        return DiffOp(kmin, arr, self.grid, trust, self.ledger + other.ledger)

    def __add__(self, other):
        if not isinstance(other, DiffOp):
            other = DiffOp.identity(self.grid) * other
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, DiffOp):
            other = DiffOp.identity(self.grid) * other
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return DiffOp(self.kmin, -self.data, self.grid, self.trust, self.ledger)

    def __mul__(self, other):
        if isinstance(other, DiffOp):
            return op_mul(self, other)
        if isinstance(other, CoeffFn):
            return op_mul(self, DiffOp.from_coeffs({0: other}, self.grid))
        return DiffOp(self.kmin, self.data * other, self.grid, self.trust, self.ledger)

    def __rmul__(self, other):
        if isinstance(other, CoeffFn):
            return op_mul(DiffOp.from_coeffs({0: other}, self.grid), self)
        return DiffOp(self.kmin, self.data * other, self.grid, self.trust, self.ledger)

    def __truediv__(self, other):
        return self * (1.0 / other)

    def ddx(self) -> "DiffOp":
        """Coefficient-wise x-derivative."""
        return DiffOp(self.kmin, ddx_array(self.data), self.grid, self.trust, self.ledger)

    def secular_part(self) -> "DiffOp":
        arr = np.array(self.data)
        arr[:, :, 0] = 0
        return DiffOp(self.kmin, arr, self.grid, self.trust, self.ledger)

    def __repr__(self):
        return (f"DiffOp(band={self.band}, xdeg={self.xdeg}, J={self.J}, ntan={self.ntan}, "
                f"trust={self.trust})")

    def to_json(self) -> dict:
        return {
            "band": [self.kmin, self.kmax],
            "coeffs": {str(k): c.to_json() for k, c in self.coeffs().items()},
        }

    @classmethod
    def from_json(cls, obj: dict, grid: GridSpec) -> "DiffOp":
        return cls.from_coeffs({int(k): CoeffFn.from_json(c, grid) for k, c in obj["coeffs"].items()}, grid)


def _cut_trust(A: DiffOp, lo: int, hi: int) -> tuple[float, float]:
    """Trust after discarding bands outside ``[lo, hi]``."""
    tlo, thi = A.trust
    if A.kmin < lo or tlo < lo and tlo != -INF:
        tlo = max(tlo, lo) if tlo != -INF or A.kmin < lo else tlo
    if A.kmin < lo:
        tlo = max(tlo, lo)
    if A.kmax > hi:
        thi = min(thi, hi)
    return tlo, thi


def product_trust(A: DiffOp, B: DiffOp) -> tuple[float, float]:
    """Interval rule for the trusted band of ``A * B``.

    Coefficient ``k`` of the product is exact unless some pair ``(k1, k - k1)``
    couples an untrusted tail of one factor with a possibly nonzero
    coefficient of the other.
    """
    (la, ha), (lb, hb) = A.band, B.band
    (ta0, ta1), (tb0, tb1) = A.trust, B.trust
    # bounds of the possible support of the exact operators
    pa_lo = -INF if ta0 > -INF else la
    pa_hi = INF if ta1 < INF else ha
    pb_lo = -INF if tb0 > -INF else lb
    pb_hi = INF if tb1 < INF else hb
    lo, hi = -INF, INF
    if ta0 > -INF:
        lo = max(lo, ta0 + pb_hi)
    if tb0 > -INF:
        lo = max(lo, tb0 + pa_hi)
    if ta1 < INF:
        hi = min(hi, ta1 + pb_lo)
    if tb1 < INF:
        hi = min(hi, tb1 + pa_lo)
    return lo, hi


def _mul_kernel(adata: np.ndarray, akmin: int, bdata: np.ndarray, bkmin: int,
                lo: int, hi: int, eps: float, Jcap: int) -> tuple[np.ndarray, float]:
    """Normal-ordered product of band arrays restricted to output bands ``lo..hi``.

    ``adata`` is ``(Ta, na, Da, nma)``, ``bdata`` ``(Tb, nb, Db, nmb)``; the
    leading axes broadcast.
    """
    Ta, na, Da, nma = adata.shape
    Tb, nb, Db, nmb = bdata.shape
    T = max(Ta, Tb)
    Jout = min((nma - 1) // 2 + (nmb - 1) // 2, Jcap)
    out = np.zeros((T, hi - lo + 1, Da + Db - 1, 2 * Jout + 1), dtype=CDTYPE)
    dropped = 0.0
    Jb = (nmb - 1) // 2
    jb = np.arange(-Jb, Jb + 1)
    for ia in range(na):
        a = adata[:, ia]
        if not np.any(a):
            continue
        k1 = akmin + ia
        # B bands whose product with band k1 lands in lo..hi
        b0 = max(0, lo - k1 - bkmin)
        b1 = min(nb - 1, hi - k1 - bkmin)
        if b0 > b1:
            continue
        bs = bdata[:, b0: b1 + 1]
        shift = RDTYPE(k1) * RDTYPE(eps)
        bs = bs * np.exp(1j * jb.astype(RDTYPE) * shift)
        if Db > 1:
            bs = np.einsum("ed,tbdj->tbej", binomial_shift_matrix(Db - 1, shift), bs)
        prod, dr = _bilinear_fourier(a[:, None], bs, Jcap)
        dropped += dr
        o0 = k1 + bkmin + b0 - lo
        out[:, o0: o0 + (b1 - b0 + 1)] += _pad_modes(prod, Jout)
    return out, dropped


def _check_degrees(A: DiffOp, B: DiffOp, lo: int, hi: int):
    dA = _degree_per_band(A.data)
    dB = _degree_per_band(B.data)
    Dx = A.grid.Dx
    for ia, da in enumerate(dA):
        if da < 0:
            continue
        k1 = A.kmin + ia
        b0 = max(0, lo - k1 - B.kmin)
        b1 = min(len(dB) - 1, hi - k1 - B.kmin)
        if b0 > b1:
            continue
        if da + dB[b0: b1 + 1].max() > Dx:
            raise DegreeOverflow(f"operator product reaches x-degree {da + dB[b0:b1 + 1].max()} > Dx={Dx}")


def op_mul(A: DiffOp, B: DiffOp, band: tuple[int, int] | None = None,
           truncate: bool = False) -> DiffOp:
    """Normal-ordered product ``A * B`` of difference operators.

    ``band`` restricts the computed output bands; otherwise the full product
    is formed and must fit in ``[-band_cap, band_cap]`` unless ``truncate``
    is set, in which case it is clipped there.  Either way anything clipped
    shrinks the trusted interval.
    """
    grid = A.grid
    full = (A.kmin + B.kmin, A.kmax + B.kmax)
    cap = grid.band_cap
    if band is None:
        if full[0] < -cap or full[1] > cap:
            if not truncate:
                raise BandOverflow(f"product band {full} exceeds cap +-{cap}")
            band = (-cap, cap)
        else:
            band = full
    lo, hi = max(full[0], band[0]), min(full[1], band[1])
    trust = product_trust(A, B)
    if lo > full[0]:
        trust = (max(trust[0], lo), trust[1])
    if hi < full[1]:
        trust = (trust[0], min(trust[1], hi))
    if lo > hi:
        return DiffOp(0, np.zeros((max(A.data.shape[0], B.data.shape[0]), 1, 1, 1)), grid, trust,
                      A.ledger + B.ledger)
    _check_degrees(A, B, lo, hi)

    def kernel(a, b):
        return _mul_kernel(a, A.kmin, b, B.kmin, lo, hi, grid.epsilon, grid.Jmax)

    out, dropped = dual_product(kernel, A.data, B.data)
    out = out[:, :, : grid.Dx + 1]
    return DiffOp(lo, out, grid, trust, A.ledger + B.ledger + dropped)


class MixedOp:
    """``sum_d P_d (eps d)^d`` with difference-operator coefficients ``P_d``."""

    __slots__ = ("parts", "grid")

    def __init__(self, parts: dict[int, DiffOp], grid: GridSpec):
        parts = {int(d): p for d, p in parts.items() if d == 0 or not p.is_zero()}
        if 0 not in parts:
            parts[0] = DiffOp.zero(grid)
        if max(parts) > grid.dmax:
            raise DerivationOverflow(f"derivation order {max(parts)} exceeds D_max={grid.dmax}")
        object.__setattr__(self, "parts", dict(sorted(parts.items())))
        object.__setattr__(self, "grid", grid)

    def __setattr__(self, name, value):
        raise AttributeError("MixedOp is immutable")

    @classmethod
    def lift(cls, A) -> "MixedOp":
        if isinstance(A, MixedOp):
            return A
        return cls({0: A}, A.grid)

    @classmethod
    def eps_d(cls, grid: GridSpec, coeff=1.0) -> "MixedOp":
        """``coeff * (eps d)``."""
        return cls({1: DiffOp.identity(grid) * coeff}, grid)

    @property
    def order(self) -> int:
        return max(self.parts)

    @property
    def diff(self) -> DiffOp:
        """The derivation-free part ``P_0``."""
        return self.parts[0]

    @property
    def ledger(self) -> float:
        return sum(p.ledger for p in self.parts.values())

    def part(self, d: int) -> DiffOp:
        return self.parts.get(d, DiffOp.zero(self.grid))

    def _combine(self, other, sign):
        other = _as_mixed(other, self.grid)
        keys = set(self.parts) | set(other.parts)
        out = {}
        for d in keys:
            a, b = self.parts.get(d), other.parts.get(d)
            if a is None:
                out[d] = b * sign
            elif b is None:
                out[d] = a
            else:
                out[d] = a + b * sign
        return MixedOp(out, self.grid)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return MixedOp({d: -p for d, p in self.parts.items()}, self.grid)

    def __mul__(self, other):
        if isinstance(other, (MixedOp, DiffOp)):
            return mixed_mul(self, _as_mixed(other, self.grid))
        return MixedOp({d: p * other for d, p in self.parts.items()}, self.grid)

    def __rmul__(self, other):
        if isinstance(other, DiffOp):
            return mixed_mul(MixedOp.lift(other), self)
        return MixedOp({d: p * other for d, p in self.parts.items()}, self.grid)

    def __repr__(self):
        return "MixedOp(" + ", ".join(f"d={d}: {p!r}" for d, p in self.parts.items()) + ")"

    def to_json(self) -> dict:
        return {"parts": {str(d): p.to_json() for d, p in self.parts.items()}}

    @classmethod
    def from_json(cls, obj: dict, grid: GridSpec) -> "MixedOp":
        return cls({int(d): DiffOp.from_json(p, grid) for d, p in obj["parts"].items()}, grid)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _as_mixed(A, grid) -> MixedOp:
    if isinstance(A, MixedOp):
        return A
    if isinstance(A, DiffOp):
        return MixedOp.lift(A)
    return MixedOp.lift(DiffOp.identity(grid) * A)


def mixed_mul(A: MixedOp, B: MixedOp, band=None, truncate: bool = False) -> MixedOp:
    """Product of mixed operators.

    ``(eps d)^d Q = sum_i C(d, i) eps^i (d^i Q) (eps d)^(d - i)`` moves
    derivations to the right; shifts commute with ``eps d``.
    """
    grid = A.grid
    eps = grid.epsilon
    out: dict[int, DiffOp] = {}
    for d, P in A.parts.items():
        if P.is_zero():
            continue
        for e, Q in B.parts.items():
            if Q.is_zero():
                continue
            Qi = Q
            for i in range(d + 1):
                order = d - i + e
                if i:
                    Qi = Qi.ddx()
                if Qi.is_zero():
                    break
                if order > grid.dmax:
                    raise DerivationOverflow(f"product needs derivation order {order} > {grid.dmax}")
                term = op_mul(P, Qi, band=band, truncate=truncate) * (math.comb(d, i) * RDTYPE(eps) ** i)
                out[order] = out[order] + term if order in out else term
    return MixedOp(out, grid)


def commutator(A, B, band=None, truncate: bool = False):
    """``A B - B A``; returns a DiffOp when both arguments are DiffOps."""
    if isinstance(A, DiffOp) and isinstance(B, DiffOp):
        return op_mul(A, B, band, truncate) - op_mul(B, A, band, truncate)
    A, B = _as_mixed(A, B.grid), _as_mixed(B, A.grid)
    return mixed_mul(A, B, band, truncate) - mixed_mul(B, A, band, truncate)


def _minus_diff(P: DiffOp) -> DiffOp:
    if P.kmin >= 0:
        return DiffOp(0, np.zeros((P.data.shape[0], 1, 1, 1)), P.grid, P.trust, P.ledger)
    return DiffOp(P.kmin, P.data[:, : min(-P.kmin, P.data.shape[1])], P.grid, P.trust, P.ledger)


def project_minus(A):
    """Strictly negative shift powers of the derivation-free part."""
    if isinstance(A, DiffOp):
        return _minus_diff(A)
    return MixedOp({0: _minus_diff(A.diff)}, A.grid)


def project_plus(A):
    """``A - A_-``: non-negative shift powers and every derivation term."""
    if isinstance(A, DiffOp):
        return A - _minus_diff(A)
    parts = dict(A.parts)
    parts[0] = A.diff - _minus_diff(A.diff)
    return MixedOp(parts, A.grid)


def residue(A) -> CoeffFn:
    """Coefficient of ``Lambda^0`` in the derivation-free part."""
    P = A if isinstance(A, DiffOp) else A.diff
    return P.coeff(0)


def coeff_norms(P: DiffOp, npts: int | None = None) -> np.ndarray:
    """Sup norm of every band's value slice on a uniform grid."""
    npts = max(npts or 4 * P.grid.Jmax, 2 * P.J + 1)
    return np.abs(grid_values(P.data[0], npts)).max(axis=-1).astype(float)


def op_norm(A, band: tuple[float, float] | None = None) -> float:
    """Max coefficient sup norm over stored ``(d, k)``, optionally within ``band``."""
    best = 0.0
    parts = [A] if isinstance(A, DiffOp) else list(A.parts.values())
    for P in parts:
        if P.is_zero():
            continue
        norms = coeff_norms(P)
        ks = np.arange(P.kmin, P.kmax + 1)
        if band is not None:
            norms = norms[(ks >= band[0]) & (ks <= band[1])]
        if norms.size:
            best = max(best, float(norms.max()))
    return best


def trusted_band(A) -> tuple[float, float]:
    """Intersection of the trusted intervals of every part."""
    if isinstance(A, DiffOp):
        return A.trust
    lo, hi = -INF, INF
    for P in A.parts.values():
        lo, hi = max(lo, P.trust[0]), min(hi, P.trust[1])
    return lo, hi


def op_power(A: DiffOp, n: int, band=None, truncate: bool = True) -> DiffOp:
    out = DiffOp.identity(A.grid)
    for _ in range(n):
        out = op_mul(out, A, band=band, truncate=truncate)
    return out


def lax_operator(u: CoeffFn, ev: CoeffFn) -> DiffOp:
    """``Lambda + u + ev Lambda^-1`` (``ev`` is the coefficient e^v itself)."""
    return DiffOp.from_coeffs({1: 1.0, 0: u, -1: ev}, u.grid)


def from_terms(terms: Iterable[tuple[int, CoeffFn]], grid: GridSpec) -> DiffOp:
    acc: dict[int, CoeffFn] = {}
    for k, c in terms:
        acc[k] = acc[k] + c if k in acc else c
    return DiffOp.from_coeffs(acc, grid)
