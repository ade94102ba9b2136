"""Coefficient ring: band-limited periodic functions times polynomials in x.

A :class:`CoeffFn` stores ``sum_d x**d * sum_j f[d, j] * exp(i j x)`` on the
period ``[0, 2*pi)``.  Every array carries a leading *tangent* axis: slice 0
is the value, slices ``1..T-1`` are directional derivatives.  Linear
operations act slice-wise; the nonlinear ones (``mul_fn``, ``exp_fn``) apply
the product and chain rules, which is how exact variational derivatives are
obtained further up the stack.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

# working precision: extended (80-bit) where the platform provides it; the
# secular dressing coefficients reach 1e7 and their cancellations need it
CDTYPE = np.clongdouble
RDTYPE = np.longdouble
PI_LD = 4 * np.arctan(RDTYPE(1))
PERIOD = 2 * np.pi

# top degree blocks below this fraction of the largest block are roundoff
TRIM_RTOL = 1e-14
RESONANCE_TOL = 1e-12


class MethError(Exception):
    """Base class for numeric precondition failures."""


class DegreeOverflow(MethError):
    pass


class SecularExponent(MethError):
    pass


class ResonantMode(MethError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Discretisation parameters shared by every object of one computation.

    ``band_cap`` and ``dmax`` bound difference-operator bands and derivation
    orders; they live here so that a single object configures a run.
    """

    epsilon: float = 0.1
    J: int = 8
    Jmax: int = 48
    Dx: int = 6
    band_cap: int = 12
    dmax: int = 2

    def __post_init__(self):
        if not 0 < self.epsilon < PERIOD:
            raise ValueError(f"epsilon must lie in (0, 2pi), got {self.epsilon}")
        if not 0 <= self.J <= self.Jmax:
            raise ValueError("need 0 <= J <= Jmax")
        if self.Dx < 0 or self.band_cap < 1 or self.dmax < 0:
            raise ValueError("caps must be non-negative")

    @property
    def period(self) -> float:
        return PERIOD


def _fast_len(n: int) -> int:
    """Smallest 2^a 3^b 5^c >= n."""
    best = 1 << max(0, (n - 1).bit_length())
    p5 = 1
    while p5 < 2 * n:
        p35 = p5
        while p35 < 2 * n:
            m = p35
            while m < n:
                m *= 2
            best = min(best, m)
            p35 *= 3
        p5 *= 5
    return best


def to_grid(arr: np.ndarray, N: int) -> np.ndarray:
    """Values on ``x_n = 2 pi n / N`` of the modes stored along the last axis."""
    J = (arr.shape[-1] - 1) // 2
    if N < 2 * J + 1:
        raise ValueError("grid too coarse for the stored modes")
    pad = np.zeros(arr.shape[:-1] + (N,), dtype=CDTYPE)
    pad[..., : J + 1] = arr[..., J:]
    if J:
        pad[..., N - J:] = arr[..., :J]
    return np.fft.ifft(pad, axis=-1) * N


def from_grid(vals: np.ndarray, J: int) -> tuple[np.ndarray, float]:
    """Modes ``|j| <= J`` of grid values, plus the L2 mass of the rest."""
    N = vals.shape[-1]
    c = np.fft.fft(vals, axis=-1) / N
    out = np.empty(vals.shape[:-1] + (2 * J + 1,), dtype=CDTYPE)
    out[..., J:] = c[..., : J + 1]
    if J:
        out[..., :J] = c[..., N - J:]
    rest = c[..., J + 1: N - J]
    dropped = float(np.sqrt(np.sum(np.abs(rest) ** 2))) if rest.size else 0.0
    return out, dropped


def _pad_modes(arr: np.ndarray, J: int) -> np.ndarray:
    J0 = (arr.shape[-1] - 1) // 2
    if J0 == J:
        return arr
    if J0 > J:
        return arr[..., J0 - J: J0 + J + 1]
    out = np.zeros(arr.shape[:-1] + (2 * J + 1,), dtype=CDTYPE)
    out[..., J - J0: J + J0 + 1] = arr
    return out


def _pad_degree(arr: np.ndarray, D: int) -> np.ndarray:
    D0 = arr.shape[-2] - 1
    if D0 >= D:
        return arr
    out = np.zeros(arr.shape[:-2] + (D + 1, arr.shape[-1]), dtype=CDTYPE)
    out[..., : D0 + 1, :] = arr
    return out


def effective_degree(arr: np.ndarray) -> int:
    """Highest degree block (axis -2) that is not roundoff-level."""
    mags = np.abs(arr).reshape(-1, arr.shape[-2], arr.shape[-1])
    per_block = mags.max(axis=(0, 2)) if mags.size else np.zeros(arr.shape[-2])
    top = per_block.max() if per_block.size else 0.0
    if top == 0.0:
        return 0
    for d in range(len(per_block) - 1, 0, -1):
        if per_block[d] > TRIM_RTOL * top:
            return d
    return 0


def binomial_shift_matrix(D: int, a: float) -> np.ndarray:
    """``T[e, d] = C(d, e) a^(d-e)``: coefficients of ``(x + a)^d`` in ``x^e``."""
    a = RDTYPE(a)
    T = np.zeros((D + 1, D + 1), dtype=RDTYPE)
    for d in range(D + 1):
        for e in range(d + 1):
            T[e, d] = math.comb(d, e) * a ** (d - e)
    return T


class CoeffFn:
    """Immutable polynomial-times-Fourier function.

    ``data`` has shape ``(T, xdeg + 1, 2 J + 1)``; see the module docstring
    for the tangent axis.  ``ledger`` accumulates the L2 mass dropped by
    truncations anywhere in the construction history.
    """

    __slots__ = ("data", "grid", "ledger")

    def __init__(self, data, grid: GridSpec, ledger: float = 0.0, *, real: bool = False,
                 trim: bool = True):
        arr = np.array(data, dtype=CDTYPE)
        if arr.ndim == 1:
            arr = arr[None, None, :]
        elif arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[-1] % 2 != 1:
            raise ValueError("coefficient array must have an odd number of modes")
        if trim:
            arr = arr[:, : effective_degree(arr) + 1]
        J = (arr.shape[-1] - 1) // 2
        if J > grid.Jmax:
            arr = _pad_modes(arr, grid.Jmax)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "ledger", float(ledger))
        if real and not self.is_real():
            raise ValueError("coefficients are not conjugate-symmetric")

    def __setattr__(self, name, value):
        raise AttributeError("CoeffFn is immutable")

    # --- constructors -------------------------------------------------
    @classmethod
    def const(cls, c, grid: GridSpec) -> "CoeffFn":
        return cls(np.array([[c]], dtype=CDTYPE), grid)

    @classmethod
    def zero(cls, grid: GridSpec) -> "CoeffFn":
        return cls.const(0.0, grid)

    @classmethod
    def x(cls, grid: GridSpec) -> "CoeffFn":
        return cls(np.array([[0.0], [1.0]], dtype=CDTYPE), grid)

    @classmethod
    def fourier(cls, modes: dict[int, complex], grid: GridSpec) -> "CoeffFn":
        J = max([abs(j) for j in modes] + [0])
        arr = np.zeros(2 * J + 1, dtype=CDTYPE)
        for j, c in modes.items():
            arr[j + J] += c
        return cls(arr, grid)

    @classmethod
    def from_values(cls, values, grid: GridSpec, J: int | None = None) -> "CoeffFn":
        """Periodic function from samples on the uniform grid of ``len(values)`` points."""
        values = np.asarray(values, dtype=CDTYPE)
        J = grid.Jmax if J is None else J
        J = min(J, (values.shape[-1] - 1) // 2)
        modes, dropped = from_grid(values, J)
        return cls(modes, grid, dropped)

    # --- shape ----------------------------------------------------------
    @property
    def xdeg(self) -> int:
        return self.data.shape[1] - 1

    @property
    def J(self) -> int:
        return (self.data.shape[2] - 1) // 2

    @property
    def ntan(self) -> int:
        return self.data.shape[0] - 1

    @property
    def modes(self) -> np.ndarray:
        """Value slice, shape ``(xdeg + 1, 2 J + 1)``."""
        return self.data[0]

    def value(self) -> "CoeffFn":
        return CoeffFn(self.data[:1], self.grid, self.ledger)

    def tangent(self, i: int) -> "CoeffFn":
        return CoeffFn(self.data[1 + i: 2 + i], self.grid)

    def is_real(self, atol: float = 1e-12) -> bool:
        m = self.data
        return bool(np.allclose(m, np.conj(m[..., ::-1]), atol=atol, rtol=0))

    def _new(self, arr, ledger=None, trim=True) -> "CoeffFn":
        return CoeffFn(arr, self.grid, self.ledger if ledger is None else ledger, trim=trim)

    # --- linear structure ------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, CoeffFn):
            other = CoeffFn.const(other, self.grid)
        a, b = _align(self.data, other.data)
        return self._new(a + b, self.ledger + other.ledger)

    __radd__ = __add__

    def __neg__(self):
        return self._new(-self.data)

    def __sub__(self, other):
        return self + (-other if isinstance(other, CoeffFn) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, CoeffFn):
            return mul_fn(self, other)
        return self._new(self.data * other)

    def __rmul__(self, other):
        return self._new(self.data * other)

    def __truediv__(self, other):
        return self._new(self.data / other)

    def secular_part(self) -> "CoeffFn":
        """The x^d blocks with d >= 1 (zero if none)."""
        arr = np.array(self.data)
        arr[:, 0] = 0
        return self._new(arr)

    def periodic_part(self) -> "CoeffFn":
        return self._new(self.data[:, :1])

    def norm(self, npts: int | None = None) -> float:
        """Sup norm of the value slice on a uniform grid of ``[0, 2 pi)``."""
        npts = npts or 4 * self.grid.Jmax
        npts = max(npts, 2 * self.J + 1)
        return float(np.max(np.abs(grid_values(self.data[0], npts))))

    def __repr__(self):
        return f"CoeffFn(xdeg={self.xdeg}, J={self.J}, ntan={self.ntan})"

    # --- serialisation -------------------------------------------------
    def to_json(self) -> dict:
        m = self.modes
        return {
            "xdeg": self.xdeg,
            "J": self.J,
            "modes": [[[_ld_str(c.real), _ld_str(c.imag)] for c in row] for row in m],
        }

    @classmethod
    def from_json(cls, obj: dict, grid: GridSpec) -> "CoeffFn":
        arr = np.array([[RDTYPE(re) + 1j * RDTYPE(im) for re, im in row] for row in obj["modes"]],
                       dtype=CDTYPE)
        return cls(arr.reshape(obj["xdeg"] + 1, 2 * obj["J"] + 1), grid)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _ld_str(x) -> str:
    """Shortest string that round-trips a long double exactly."""
    return np.format_float_scientific(RDTYPE(x), unique=True)


def _align_shape(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pad two coefficient arrays to a common degree and mode count."""
    D = max(a.shape[-2], b.shape[-2]) - 1
    J = max(a.shape[-1], b.shape[-1]) // 2
    return _pad_modes(_pad_degree(a, D), J), _pad_modes(_pad_degree(b, D), J)


def _align(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Broadcast two coefficient arrays to common tangent, degree and mode shape."""
    a, b = _align_shape(a, b)
    if a.shape[0] != b.shape[0]:
        if a.shape[0] == 1:
            a = np.concatenate([a, np.zeros((b.shape[0] - 1,) + a.shape[1:], CDTYPE)])
        elif b.shape[0] == 1:
            b = np.concatenate([b, np.zeros((a.shape[0] - 1,) + b.shape[1:], CDTYPE)])
        else:
            raise ValueError("tangent counts differ")
    return a, b


def translate_array(arr: np.ndarray, a: float) -> np.ndarray:
    """Coefficients of ``f(x + a)`` for coefficient array ``arr`` (..., D+1, 2J+1)."""
    D = arr.shape[-2] - 1
    J = (arr.shape[-1] - 1) // 2
    phase = np.exp(1j * np.arange(-J, J + 1, dtype=RDTYPE) * RDTYPE(a))
    out = arr * phase
    if D:
        out = np.einsum("ed,...dj->...ej", binomial_shift_matrix(D, a), out)
    return out


def translate(f: CoeffFn, a: float) -> CoeffFn:
    """``f(x + a)`` for any real ``a``."""
    return f._new(translate_array(f.data, a), trim=False)


def shift(f: CoeffFn, k: int) -> CoeffFn:
    """``(Lambda^k f)(x) = f(x + k eps)``, exact."""
    if k == 0:
        return f
    return translate(f, RDTYPE(k) * RDTYPE(f.grid.epsilon))


def ddx_array(arr: np.ndarray) -> np.ndarray:
    D = arr.shape[-2] - 1
    J = (arr.shape[-1] - 1) // 2
    out = arr * (1j * np.arange(-J, J + 1))
    if D:
        out[..., :D, :] += arr[..., 1:, :] * np.arange(1, D + 1)[:, None]
    return out


def ddx(f: CoeffFn) -> CoeffFn:
    """Exact x-derivative."""
    return f._new(ddx_array(f.data))


def _bilinear_fourier(x: np.ndarray, y: np.ndarray, Jcap: int) -> tuple[np.ndarray, float]:
    """Exact product of coefficient arrays, truncated to ``|j| <= Jcap``.

    Leading axes broadcast.  Returns the product and the dropped L2 mass.
    """
    Jx = (x.shape[-1] - 1) // 2
    Jy = (y.shape[-1] - 1) // 2
    Jfull = Jx + Jy
    N = _fast_len(2 * Jfull + 1)
    X = to_grid(x, N)
    Y = to_grid(y, N)
    Dx_, Dy_ = X.shape[-2], Y.shape[-2]
    lead = np.broadcast_shapes(X.shape[:-2], Y.shape[:-2])
    Z = np.zeros(lead + (Dx_ + Dy_ - 1, N), dtype=CDTYPE)
    for d in range(Dx_):
        Z[..., d: d + Dy_, :] += X[..., d: d + 1, :] * Y
    return from_grid(Z, min(Jfull, Jcap))


def dual_product(kernel, a: np.ndarray, b: np.ndarray):
    """Apply a bilinear ``kernel`` with product-rule semantics on axis 0.

    ``kernel(x, y)`` must broadcast over leading axes and return
    ``(array, dropped_mass)``.
    """
    Ta, Tb = a.shape[0], b.shape[0]
    if Ta == 1 or Tb == 1:
        return kernel(a, b)
    if Ta != Tb:
        raise ValueError("tangent counts differ")
    out, dropped = kernel(a[:1], b)
    tail, dropped2 = kernel(a[1:], b[:1])
    out = np.array(out)
    out[1:] += tail
    return out, dropped + dropped2


def mul_fn(f: CoeffFn, g: CoeffFn) -> CoeffFn:
    """Pointwise product; modes beyond ``Jmax`` are dropped into the ledger."""
    grid = f.grid
    if f.xdeg + g.xdeg > grid.Dx:
        raise DegreeOverflow(f"x-degree {f.xdeg}+{g.xdeg} exceeds Dx={grid.Dx}")
    out, dropped = dual_product(lambda x, y: _bilinear_fourier(x, y, grid.Jmax), f.data, g.data)
    return CoeffFn(out, grid, f.ledger + g.ledger + dropped)


def _exp_values(f: CoeffFn) -> tuple[np.ndarray, int]:
    N = _fast_len(max(8 * f.grid.Jmax, 2 * f.grid.Jmax + 1))
    return np.exp(to_grid(f.data[0, 0], N)), N


def exp_fn(f: CoeffFn) -> CoeffFn:
    """``exp(f)`` by collocation; refuses secular exponents."""
    if f.xdeg > 0:
        raise SecularExponent("exponential of an x-secular function")
    vals, N = _exp_values(f)
    modes, dropped = from_grid(vals, f.grid.Jmax)
    e = CoeffFn(modes, f.grid, f.ledger + dropped)
    if not f.ntan:
        return e
    t = mul_fn(e, CoeffFn(f.data[1:], f.grid, trim=False))
    a, b = _align_shape(e.data, t.data)
    return CoeffFn(np.concatenate([a, b]), f.grid, t.ledger)


def log_fn(f: CoeffFn) -> CoeffFn:
    """Principal logarithm of a nowhere-vanishing periodic function."""
    if f.xdeg > 0 or f.ntan:
        raise SecularExponent("log needs a periodic value-only function")
    N = _fast_len(max(8 * f.grid.Jmax, 2 * f.grid.Jmax + 1))
    vals = to_grid(f.data[0, 0], N)
    modes, dropped = from_grid(np.log(vals), f.grid.Jmax)
    return CoeffFn(modes, f.grid, f.ledger + dropped)


def _one_minus_shift_solve(arr: np.ndarray, eps: float, Dcap: int) -> np.ndarray:
    """Solve ``g(x) - g(x + eps) = f(x)`` coefficient-wise (zero-mode gauge)."""
    T, D1, nm = arr.shape
    D = D1 - 1
    J = (nm - 1) // 2
    eps = RDTYPE(eps)
    js = np.arange(-J, J + 1)
    q = np.exp(1j * js.astype(RDTYPE) * eps)
    nz = js != 0
    if np.any(np.abs(1 - q[nz]) < RESONANCE_TOL):
        raise ResonantMode("epsilon is commensurate with a retained frequency")
    out = np.zeros((T, D + 2, nm), dtype=CDTYPE)
    # oscillating modes: (1-q) g_e - q sum_{d>e} C(d,e) eps^(d-e) g_d = f_e
    for e in range(D, -1, -1):
        acc = np.array(arr[:, e, :])
        for d in range(e + 1, D + 1):
            acc = acc + q * math.comb(d, e) * eps ** (d - e) * out[:, d, :]
        out[:, e, nz] = acc[:, nz] / (1 - q[nz])
    # zero mode: polynomial P, zero constant term, with P(x) - P(x+eps) = f0(x)
    f0 = arr[:, :, J]
    A = np.zeros((D + 1, D + 1), dtype=RDTYPE)
    for m in range(1, D + 2):
        for e in range(m):
            A[e, m - 1] = -math.comb(m, e) * eps ** (m - e)
    # A is upper triangular: back substitution keeps extended precision
    P = np.zeros((T, D + 1), dtype=CDTYPE)
    for r in range(D, -1, -1):
        P[:, r] = (f0[:, r] - P[:, r + 1:] @ A[r, r + 1:]) / A[r, r]
    out[:, 0, J] = 0.0
    out[:, 1: D + 2, J] = P
    return out


def invert_one_minus_shift(f: CoeffFn) -> CoeffFn:
    """``g`` with ``(1 - Lambda) g = f``.

    Oscillating modes are divided by ``1 - exp(i j eps)``; the zero mode of
    each degree block becomes a polynomial one degree higher.  The constant
    term of the result is fixed to zero.
    """
    out = _one_minus_shift_solve(f.data, f.grid.epsilon, f.grid.Dx)
    g = CoeffFn(out, f.grid, f.ledger)
    if g.xdeg > f.grid.Dx:
        raise DegreeOverflow(f"(1-Lambda)^-1 raises x-degree to {g.xdeg} > Dx={f.grid.Dx}")
    return g


def _x_power_averages(D: int, J: int) -> np.ndarray:
    """``avg[d, j] = (1/2pi) int_0^{2pi} x^d e^{ijx} dx``."""
    avg = np.zeros((D + 1, 2 * J + 1), dtype=CDTYPE)
    per = 2 * PI_LD
    for j in range(-J, J + 1):
        if j == 0:
            for d in range(D + 1):
                avg[d, J] = per ** d / (d + 1)
            continue
        integral = 0.0  # int x^0 e^{ijx} over a period
        avg[0, j + J] = 0.0
        for d in range(1, D + 1):
            integral = (per ** d - d * integral) / (1j * j)
            avg[d, j + J] = integral / per
    return avg


def mean(f: CoeffFn) -> complex:
    """Average of the value over ``[0, 2 pi)``, secular blocks included."""
    return complex(mean_all(f)[0])


def mean_all(f: CoeffFn) -> np.ndarray:
    """Period averages of every tangent slice."""
    avg = _x_power_averages(f.xdeg, f.J)
    return np.einsum("tdj,dj->t", f.data, avg)


def evaluate(f: CoeffFn, xs) -> np.ndarray:
    """Value slice at the points ``xs`` by direct summation."""
    xs = np.atleast_1d(np.asarray(xs, dtype=RDTYPE))
    J = f.J
    E = np.exp(1j * np.outer(xs, np.arange(-J, J + 1, dtype=RDTYPE)))
    per_deg = E @ f.modes.T  # (npts, D+1)
    powers = xs[:, None] ** np.arange(f.xdeg + 1)
    return np.sum(per_deg * powers, axis=1)


def grid_values(arr: np.ndarray, npts: int) -> np.ndarray:
    """Values of coefficient array(s) ``(..., D+1, 2J+1)`` on the uniform ``npts`` grid."""
    xs = 2 * PI_LD * np.arange(npts, dtype=RDTYPE) / npts
    vals = to_grid(arr, npts)
    powers = xs ** np.arange(arr.shape[-2])[:, None]
    return np.sum(vals * powers, axis=-2)


def eval_fn(f: CoeffFn, x0: float) -> complex:
    return complex(evaluate(f, [x0])[0])


def random_field(grid: GridSpec, rng: np.random.Generator, amplitude: float = 0.2,
                 J: int | None = None) -> CoeffFn:
    """Real zero-mean field with ``|a_j| <= amplitude * |j|^-2`` for ``1 <= |j| <= J``."""
    J = grid.J if J is None else J
    arr = np.zeros(2 * J + 1, dtype=CDTYPE)
    for j in range(1, J + 1):
        r = amplitude * j ** -2.0 * rng.uniform(0, 1)
        c = r * np.exp(1j * rng.uniform(0, 2 * np.pi))
        arr[J + j] = c
        arr[J - j] = np.conj(c)
    return CoeffFn(arr, grid, real=True)
