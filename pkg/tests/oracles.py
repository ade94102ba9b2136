"""Pointwise reference implementations used as test oracles.

Nothing here touches the package: functions are plain Python callables,
difference operators are dicts ``{k: callable}`` and products are formed
pointwise, ``(A B)_k(x) = sum_{i+j=k} a_i(x) b_j(x + i eps)``.
"""
import cmath
import math

EPS = 0.1

# trig-polynomial test state: u = sum U[j] e^{ijx}, v = sum V[j] e^{ijx}
U = {1: 0.1, -1: 0.1, 2: -0.025j, -2: 0.025j}           # 0.2 cos x + 0.05 sin 2x
V = {1: -0.05j, -1: 0.05j, 3: -0.02, -3: -0.02}         # 0.1 sin x - 0.04 cos 3x


def trig(modes):
    def f(x):
        return sum(c * cmath.exp(1j * j * x) for j, c in modes.items())
    return f


def u_fn(x):
    return trig(U)(x)


def v_fn(x):
    return trig(V)(x)


def ev_fn(x):
    return cmath.exp(v_fn(x))


def lax_op(u=u_fn, ev=ev_fn):
    return {1: lambda x: 1.0, 0: u, -1: ev}


def mul(A, B, eps=EPS):
    out = {}
    for i, a in A.items():
        for j, b in B.items():
            prev = out.get(i + j)
            out[i + j] = (lambda x, a=a, b=b, i=i, prev=prev:
                          (prev(x) if prev else 0) + a(x) * b(x + i * eps))
    return out


def power(A, n):
    out = {0: lambda x: 1.0}
    for _ in range(n):
        out = mul(out, A)
    return out


def scale(A, c):
    return {k: (lambda x, a=a: c * a(x)) for k, a in A.items()}


def plus(A):
    return {k: a for k, a in A.items() if k >= 0}


def commutator(A, B):
    AB, BA = mul(A, B), mul(B, A)
    keys = set(AB) | set(BA)
    zero = lambda x: 0.0
    return {k: (lambda x, p=AB.get(k, zero), q=BA.get(k, zero): p(x) - q(x)) for k in keys}


def period_integral(f, n=256):
    """Trapezoid rule over [0, 2 pi): exact for trig polynomials of degree < n."""
    h = 2 * math.pi / n
    return sum(f(i * h) for i in range(n)) * h


def toda_flow(n):
    """``(du, dv)`` of ``dL/dt = [(L^{n+1}/(n+1)!)_+, L]`` as callables."""
    L = lax_op()
    B = plus(scale(power(L, n + 1), 1.0 / math.factorial(n + 1)))
    C = commutator(B, L)
    return C[0], (lambda x: C[-1](x) / ev_fn(x))


def toda00(x, eps=EPS):
    """Hand formula: du = e^{v(x+eps)} - e^{v(x)}, dv = u(x) - u(x-eps)."""
    return ev_fn(x + eps) - ev_fn(x), u_fn(x) - u_fn(x - eps)


def h0(n):
    """``Res L^{n+1} / (n+1)!``."""
    P = power(lax_op(), n + 1)
    return lambda x: P[0](x) / math.factorial(n + 1)


def w1(x, eps=EPS):
    """First dressing coefficient: ``(1 - Lambda) w_1 = u`` mode by mode."""
    return sum(c * cmath.exp(1j * j * x) / (1 - cmath.exp(1j * j * eps)) for j, c in U.items())


def dudx(x):
    return sum(1j * j * c * cmath.exp(1j * j * x) for j, c in U.items())


def dvdx(x):
    return sum(1j * j * c * cmath.exp(1j * j * x) for j, c in V.items())
