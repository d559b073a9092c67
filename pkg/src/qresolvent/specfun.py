"""Bessel/Hankel functions of integer order and Gauss-Legendre quadrature.

Values come from scipy.special (AMOS).  This module adds range guards,
integer-order handling, explicit values on the negative real axis and
recurrence-based derivatives.

Negative real arguments sit on the branch cut of Y_n and the Hankel
functions.  They are resolved with the continuation identities

    H1_n(e^{i pi} x) = -H2_{-n}(x),    H2_n(e^{-i pi} x) = -H1_{-n}(x),

so hankel1 takes the upper-lip value and hankel2 the lower-lip value.
bessel_y follows hankel1 (upper lip) so that H1 = J + iY holds everywhere.
Arguments within a relative 1e-13 of the negative axis are snapped onto it.

Accuracy is about 1e-13 relative wherever the function is not near a zero
(order and argument inside the supported range).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, SingularityError

MAX_ORDER = 2000
MAX_ARG = 1.0e4
_CUT_TOL = 1.0e-13


def _prepare(n, z):
    n_arr = np.asarray(n)
    if not np.issubdtype(n_arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(n_arr, 1), 0)):
            raise DomainError("only integer orders are supported")
        n_arr = n_arr.astype(np.int64)
    z_arr = np.asarray(z, dtype=np.complex128)
    if not np.all(np.isfinite(z_arr)):
        raise DomainError("argument must be finite")
    if np.any(np.abs(n_arr) > MAX_ORDER):
        raise DomainError(f"order exceeds supported range |n| <= {MAX_ORDER}")
    if np.any(np.abs(z_arr) > MAX_ARG):
        raise DomainError(f"argument exceeds supported range |z| <= {MAX_ARG:g}")
    n_arr, z_arr = np.broadcast_arrays(n_arr, z_arr)
    return n_arr, z_arr


def _finish(out, scalar):
    if not np.all(np.isfinite(out)):
        raise DomainError("result is not finite (overflow at this order/argument)")
    return complex(out) if scalar else out


def _is_scalar(n, z):
    return np.ndim(n) == 0 and np.ndim(z) == 0


def _on_cut(z):
    return (z.real < 0) & (np.abs(z.imag) <= _CUT_TOL * np.abs(z))


def _parity(n):
    return np.where(n % 2 == 0, 1.0, -1.0)


def bessel_j(n, z):
    """J_n(z) for integer n.  Entire in z; J_{-n} = (-1)^n J_n exactly."""
    scalar = _is_scalar(n, z)
    n, z = _prepare(n, z)
    m = np.abs(n)
    out = special.jv(m, z) * np.where(n < 0, _parity(m), 1.0)
    # real axis: drop the spurious imaginary roundoff scipy can return
    real = z.imag == 0
    out = np.where(real, out.real + 0j, out)
    return _finish(out, scalar)


def hankel1(n, z):
    """H1_n(z) = J_n(z) + i Y_n(z); the negative real axis is the upper lip."""
    scalar = _is_scalar(n, z)
    n, z = _prepare(n, z)
    if np.any(z == 0):
        raise SingularityError("Hankel function is singular at z = 0")
    m = np.abs(n)
    sign = np.where(n < 0, _parity(m), 1.0)
    cut = _on_cut(z)
    zz = np.where(cut, -z.real + 0j, z)
    # H1_{-n}(z) = (-1)^n H1_n(z); on the cut -H2_{-n}(x) = -(-1)^n conj(H1_n(x))
    base = special.hankel1(m, zz)
    out = np.where(cut, -_parity(m) * np.conj(base), base) * sign
    return _finish(out, scalar)


def hankel2(n, z):
    """H2_n(z) = J_n(z) - i Y_n(z); the negative real axis is the lower lip."""
    scalar = _is_scalar(n, z)
    n, z = _prepare(n, z)
    if np.any(z == 0):
        raise SingularityError("Hankel function is singular at z = 0")
    m = np.abs(n)
    sign = np.where(n < 0, _parity(m), 1.0)
    cut = _on_cut(z)
    zz = np.where(cut, -z.real + 0j, z)
    base = special.hankel2(m, zz)
    out = np.where(cut, -_parity(m) * np.conj(base), base) * sign
    return _finish(out, scalar)


def bessel_y(n, z):
    """Y_n(z) = (H1_n(z) - J_n(z)) / i, upper lip on the negative real axis."""
    scalar = _is_scalar(n, z)
    n, z = _prepare(n, z)
    if np.any(z == 0):
        raise SingularityError("Y_n is singular at z = 0")
    out = (hankel1(n, z) - bessel_j(n, z)) / 1j
    real = (z.imag == 0) & (z.real > 0)
    out = np.where(real, out.real + 0j, out)
    return _finish(out, scalar)


def _deriv(f, n, z):
    scalar = _is_scalar(n, z)
    n, z = _prepare(n, z)
    # the shifted orders must stay in range too
    if np.any(np.abs(n) + 1 > MAX_ORDER):
        raise DomainError(f"derivative needs order |n|+1 <= {MAX_ORDER}")
    out = 0.5 * (f(n - 1, z) - f(n + 1, z))
    return _finish(out, scalar)


def bessel_j_deriv(n, z):
    """J_n'(z) = (J_{n-1}(z) - J_{n+1}(z)) / 2."""
    return _deriv(bessel_j, n, z)


def hankel1_deriv(n, z):
    """H1_n'(z) = (H1_{n-1}(z) - H1_{n+1}(z)) / 2."""
    return _deriv(hankel1, n, z)


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and positive weights on [a, b]."""

    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise ValueError("nodes and weights must be nonempty 1-D arrays of equal length")
        if not self.a < self.b:
            raise ValueError("grid domain needs a < b")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if nodes[0] <= self.a or nodes[-1] >= self.b:
            raise ValueError("nodes must lie inside (a, b)")
        if abs(weights.sum() - (self.b - self.a)) > 1e-12 * max(1.0, self.b - self.a):
            raise ValueError("weights must sum to b - a")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size

    def integrate(self, values):
        return np.asarray(values) @ self.weights


def gauss_legendre(order, a=-1.0, b=1.0):
    """Gauss-Legendre rule with `order` points on [a, b].

    Exact for polynomials of degree up to 2*order - 1.
    """
    if int(order) != order or order < 1:
        raise ValueError("order must be a positive integer")
    if not a < b:
        raise ValueError("need a < b")
    t, w = np.polynomial.legendre.leggauss(int(order))
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b) + half * t
    weights = half * w
    # leggauss sums to 2 only to ~1e-15 per point; renormalize to the exact length
    weights = weights * ((b - a) / weights.sum())
    return QuadratureGrid(nodes, weights, float(a), float(b))


def lagrange_matrix(nodes, targets):
    """Interpolation matrix L[p, j] = l_j(targets[p]) through `nodes`.

    Barycentric form with weights computed in log space, so it is stable for
    a few hundred Gauss-Legendre nodes.
    """
    nodes = np.asarray(nodes, dtype=float)
    targets = np.asarray(targets, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    bw = np.prod(np.sign(diff), axis=1) * np.exp(logw - logw.max())
    d = targets[:, None] - nodes[None, :]
    hit = d == 0
    d[hit] = 1.0
    c = bw[None, :] / d
    L = c / c.sum(axis=1, keepdims=True)
    rows = np.any(hit, axis=1)
    L[rows] = hit[rows].astype(float)
    return L


def panel_rule(K, panel, order, breaks=()):
    """Composite Gauss-Legendre rule on [0, K] with an embedded coarse rule.

    Panels have width at most `panel`; every value in `breaks` inside (0, K)
    is also a panel edge, so integrals truncated there are exact subsums.
    The coarse rule is the interpolatory rule on every other Gauss node of a
    panel; its difference from the full rule serves as an error estimate.

    Returns (nodes, weights, coarse_weights).
    """
    if not (K > 0 and panel > 0):
        raise ValueError("need K > 0 and panel > 0")
    cuts = sorted({0.0, float(K)} | {float(b) for b in breaks if 0 < b < K})
    edges = [0.0]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        m = max(1, int(math.ceil((hi - lo) / panel - 1e-9)))
        edges.extend(np.linspace(lo, hi, m + 1)[1:])
    edges = np.array(edges)
    t, w = np.polynomial.legendre.leggauss(order)
    sub = t[::2]
    V = np.vander(sub, increasing=True).T
    moments = np.array([(1 - (-1) ** (j + 1)) / (j + 1) for j in range(sub.size)])
    wc = np.zeros_like(w)
    wc[::2] = np.linalg.solve(V, moments)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t).ravel()
    return nodes, (half[:, None] * w).ravel(), (half[:, None] * wc).ravel()
