"""Circular dielectric cylinder (scalar, longitudinal E) with sources inside.

Inside the cylinder the resolvent kernel is the interior free kernel
-(i/4) H0(k sqrt(eps) |p - p'|) plus a regular correction

    dg(p, p') = (i/4) sum_n W_n(k) J_n(ks rho) J_n(ks rho') e^{in(phi - phi')},

with ks = k sqrt(eps) and W_n the per-mode reflection weight fixed by
continuity of the field and its radial derivative at rho = a.  W_{-n} = W_n,
so the sum is evaluated over n >= 0 with cosines.

Negative real k is evaluated on the upper lip of the Hankel branch cut (see
specfun), which is the convention under which dg(p, p'; -k) = conj dg(p, p'; k).
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from . import specfun as sf
from .errors import ConvergenceError, DomainError, ResonanceError, SingularityError, TruncationError, ValidationError
from .specfun import gauss_legendre, panel_rule

DENOM_TOL = 1e-12
TAIL_TOL = 1e-10
GUARD = 1e-6


@dataclass(frozen=True)
class CylinderConfig:
    """Cylinder of permittivity `epsilon` and radius `a` at wavenumber k.

    `modes` is the azimuthal cutoff N; it defaults to ceil(|k| sqrt(eps) a) + 8
    and may not be set lower than that.  k may be negative or complex for
    analytic continuation.
    """

    epsilon: float
    a: float = 1.0
    k: complex = 1.0
    modes: int = None

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon >= 1.0):
            raise ValidationError("cylinder permittivity must be a finite real >= 1")
        if not (math.isfinite(self.a) and self.a > 0):
            raise ValidationError("cylinder radius must be positive")
        if not np.isfinite(self.k) or self.k == 0:
            raise ValidationError("wavenumber must be finite and nonzero")
        floor = self.min_modes
        if self.modes is None:
            object.__setattr__(self, "modes", floor)
        elif int(self.modes) != self.modes or self.modes < floor:
            raise ValidationError(f"mode cutoff must be an integer >= {floor}")

    @property
    def min_modes(self):
        return int(math.ceil(abs(self.k) * math.sqrt(self.epsilon) * self.a)) + 8

    @property
    def sqrt_eps(self):
        return math.sqrt(self.epsilon)

    @property
    def ks(self):
        return self.k * self.sqrt_eps

    @property
    def nu(self):
        return -self.k**2 * (self.epsilon - 1.0)

    def with_k(self, k, modes=None):
        return replace(self, k=k, modes=modes)


@dataclass(frozen=True)
class PolarPoint:
    rho: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.rho) and self.rho >= 0):
            raise ValidationError("rho must be finite and nonnegative")

    @property
    def xy(self):
        return self.rho * math.cos(self.phi), self.rho * math.sin(self.phi)


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Gauss-Legendre in rho (weights include rho) times a uniform phi grid."""

    rho: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    radius: float
    n_radial: int
    n_azimuthal: int

    @property
    def x(self):
        return self.rho * np.cos(self.phi)

    @property
    def y(self):
        return self.rho * np.sin(self.phi)


def polar_grid(radius, n_radial, n_azimuthal):
    g = gauss_legendre(n_radial, 0.0, radius)
    phi = 2 * np.pi * np.arange(n_azimuthal) / n_azimuthal
    R, P = np.meshgrid(g.nodes, phi, indexing="ij")
    W = (g.weights * g.nodes)[:, None] * np.full(n_azimuthal, 2 * np.pi / n_azimuthal)[None, :]
    return PolarGrid(R.ravel(), P.ravel(), W.ravel(), float(radius), n_radial, n_azimuthal)


@dataclass(frozen=True, eq=False)
class ModeCoefficients:
    """Per-mode amplitudes for orders n = -N..N (field scale nu factored out)."""

    n: np.ndarray
    A: np.ndarray
    B: np.ndarray
    f: np.ndarray
    system_residual: float


def _coords(p):
    if isinstance(p, PolarPoint):
        return np.asarray(p.rho, float), np.asarray(p.phi, float)
    rho, phi = p
    return np.asarray(rho, float), np.asarray(phi, float)


def _chord(p, q):
    r1, f1 = _coords(p)
    r2, f2 = _coords(q)
    d2 = r1**2 + r2**2 - 2 * r1 * r2 * np.cos(f1 - f2)
    return np.sqrt(np.maximum(d2, 0.0))


def green_free_2d(p, pp, k):
    """-(i/4) H0(k |p - p'|).  Points may be PolarPoint or (rho, phi) arrays."""
    d = _chord(p, pp)
    if np.any(d == 0):
        raise SingularityError("free 2D kernel is singular at coincident points")
    out = -0.25j * sf.hankel1(0, k * d)
    return complex(out) if np.ndim(out) == 0 else out


def _wn_parts(n, cfg):
    n = np.asarray(n)
    ka = cfg.k * cfg.a
    ksa = cfg.ks * cfg.a
    s = cfg.sqrt_eps
    h_o, dh_o = sf.hankel1(n, ka), sf.hankel1_deriv(n, ka)
    h_i, dh_i = sf.hankel1(n, ksa), sf.hankel1_deriv(n, ksa)
    j_i, dj_i = sf.bessel_j(n, ksa), sf.bessel_j_deriv(n, ksa)
    # overflow at high order is caught by the finiteness check in wn
    with np.errstate(over="ignore", invalid="ignore"):
        num = dh_o * h_i - s * h_o * dh_i
        den = dh_o * j_i - s * h_o * dj_i
        scale = np.abs(dh_o * j_i) + s * np.abs(h_o * dj_i)
    return num, den, scale


def wn(n, cfg, with_denominator=False):
    """Reflection weight W_n(k) of mode n.

    Raises ResonanceError when the denominator is below 1e-12 of the size of
    its two terms.
    """
    num, den, scale = _wn_parts(n, cfg)
    if cfg.epsilon == 1.0:
        # the numerator is a Wronskian-type difference of identical products
        num = np.zeros_like(num)
    if np.any(np.abs(den) <= DENOM_TOL * scale):
        raise ResonanceError(f"internal resonance: W_n denominator vanishes at k = {cfg.k}")
    out = num / den
    if not np.all(np.isfinite(out)):
        raise DomainError("W_n is not representable at this order (floating-point overflow)")
    if np.ndim(out) == 0:
        out = complex(out)
        den = complex(den)
    if with_denominator:
        return out, np.abs(den)
    return out


def _dg_sum(cfg, rho, rhop, dphi, N):
    n = np.arange(N + 1)
    W = np.asarray(wn(n, cfg))
    # radii repeat on polar grids; evaluate the Bessel factors once per radius
    radii, inv = np.unique(np.concatenate((rho, rhop)), return_inverse=True)
    J = sf.bessel_j(n[:, None], cfg.ks * radii[None, :])
    Jr, Jp = J[:, inv[: rho.size]], J[:, inv[rho.size :]]
    mult = np.where(n == 0, 1.0, 2.0)[:, None]
    terms = mult * W[:, None] * (Jr * Jp) * np.cos(n[:, None] * dphi[None, :])
    terms = np.where(Jr * Jp == 0, 0.0, terms)
    total = 0.25j * terms.sum(axis=0)
    tail = 0.25 * (np.abs(terms[-1]) + np.abs(terms[-2]))
    return total, tail


def delta_g(p, pp, cfg, max_raise=8):
    """Regular part of the interior resolvent kernel.

    The mode sum starts at the configured cutoff N.  Points whose last two
    terms exceed 1e-10 of the sum are re-summed with N grown by
    max(8, N // 2); after `max_raise` extensions TruncationError is raised.
    Near the boundary the terms decay like (rho rho' / a^2)^n, so such
    points need many modes.
    """
    rho, phi = _coords(p)
    rhop, phip = _coords(pp)
    if np.any(rho > cfg.a * (1 + 1e-12)) or np.any(rhop > cfg.a * (1 + 1e-12)):
        raise ValidationError("points must lie inside the cylinder")
    shape = np.broadcast(rho, rhop, phi, phip).shape
    if cfg.epsilon == 1.0:
        out = np.zeros(shape, dtype=np.complex128)
        return complex(out) if out.ndim == 0 else out
    rho, rhop, dphi = (np.broadcast_to(v, shape).ravel() for v in (rho, rhop, phi - phip))
    out = np.zeros(rho.size, dtype=np.complex128)
    todo = np.arange(rho.size)
    N = cfg.modes
    for _ in range(max_raise + 1):
        try:
            total, tail = _dg_sum(cfg, rho[todo], rhop[todo], dphi[todo], N)
        except DomainError as exc:
            raise TruncationError(f"delta_g needs more than {N} modes here; points too close to the boundary") from exc
        ok = tail <= TAIL_TOL * np.maximum(np.abs(total), 1e-300)
        out[todo[ok]] = total[ok]
        todo = todo[~ok]
        if todo.size == 0:
            out = out.reshape(shape)
            return complex(out) if out.ndim == 0 else out
        N = min(N + max(8, N // 2), sf.MAX_ORDER - 1)
    raise TruncationError(f"delta_g mode sum not converged up to N = {N}")


def cylinder_resolvent(p, pp, cfg):
    """Interior resolvent kernel: -(i/4) H0(ks |p - p'|) + delta_g."""
    d = _chord(p, pp)
    if np.any(d < GUARD * cfg.a):
        raise SingularityError("kernel evaluation closer than 1e-6 a to its singular diagonal")
    out = -0.25j * sf.hankel1(0, cfg.ks * d) + delta_g(p, pp, cfg)
    return complex(out) if np.ndim(out) == 0 else out


def source_projections(cfg, grid, u0, n):
    """f_n = int J_n(ks rho') e^{-in phi'} U0(rho') d^2 rho' by quadrature."""
    u0 = np.asarray(u0, dtype=np.complex128)
    J = sf.bessel_j(n[:, None], cfg.ks * grid.rho[None, :])
    E = np.exp(-1j * n[:, None] * grid.phi[None, :])
    return (J * E) @ (grid.weights * u0)


def mode_coefficients(cfg, grid, u0):
    """Solve the per-mode 2x2 interface systems for A_n, B_n, n = -N..N."""
    if grid.radius != cfg.a:
        raise ValidationError("source grid must cover the cylinder cross-section")
    n = np.arange(-cfg.modes, cfg.modes + 1)
    f = source_projections(cfg, grid, u0, n)
    ka = cfg.k * cfg.a
    ksa = cfg.ks * cfg.a
    s = cfg.sqrt_eps
    j_i, dj_i = sf.bessel_j(n, ksa), sf.bessel_j_deriv(n, ksa)
    h_i, dh_i = sf.hankel1(n, ksa), sf.hankel1_deriv(n, ksa)
    h_o, dh_o = sf.hankel1(n, ka), sf.hankel1_deriv(n, ka)
    # [[J, -H], [s J', -H']] [A, B]^T = (i/4) f [H_i, s H_i']^T
    det = -j_i * dh_o + s * dj_i * h_o
    scale = np.abs(j_i * dh_o) + s * np.abs(dj_i * h_o)
    if np.any(np.abs(det) <= DENOM_TOL * scale):
        raise ResonanceError(f"mode system is singular at k = {cfg.k}")
    r1 = 0.25j * f * h_i
    r2 = 0.25j * f * s * dh_i
    A = (r1 * (-dh_o) + h_o * r2) / det
    B = (j_i * r2 - s * dj_i * r1) / det
    res = np.maximum(np.abs(A * j_i - B * h_o - r1), np.abs(A * s * dj_i - B * dh_o - r2))
    norm = np.maximum(np.abs(r1), np.abs(r2))
    rel = float(np.max(np.where(norm > 0, res / np.where(norm > 0, norm, 1.0), res)))
    return ModeCoefficients(n, A, B, f, rel)


def incident_integral(cfg, grid, u0, rho, phi, derivative=False):
    """-(i/4) int H0(ks |p - p'|) U0(p') d^2p' by direct quadrature (or its d/drho)."""
    rho = np.atleast_1d(np.asarray(rho, float))
    phi = np.atleast_1d(np.asarray(phi, float))
    u = np.asarray(u0, dtype=np.complex128) * grid.weights
    dphi = phi[:, None] - grid.phi[None, :]
    d2 = rho[:, None] ** 2 + grid.rho[None, :] ** 2 - 2 * rho[:, None] * grid.rho[None, :] * np.cos(dphi)
    d = np.sqrt(np.maximum(d2, 0.0))
    if np.any(d < GUARD * cfg.a):
        raise SingularityError("evaluation point coincides with a quadrature node")
    ks = cfg.ks
    if derivative:
        ddr = (rho[:, None] - grid.rho[None, :] * np.cos(dphi)) / d
        kern = 0.25j * ks * special.hankel1(1, ks * d) * ddr
    else:
        kern = -0.25j * special.hankel1(0, ks * d)
    return kern @ u


def field_from_modes(cfg, coeffs, grid, u0, rho, phi):
    """Scattered field from the mode amplitudes (inside and outside)."""
    rho = np.atleast_1d(np.asarray(rho, float))
    phi = np.atleast_1d(np.asarray(phi, float))
    out = np.zeros(rho.shape, dtype=np.complex128)
    E = np.exp(1j * coeffs.n[None, :] * phi[:, None])
    inside = rho <= cfg.a
    if np.any(inside):
        Jn = sf.bessel_j(coeffs.n[None, :], cfg.ks * rho[inside, None])
        out[inside] = incident_integral(cfg, grid, u0, rho[inside], phi[inside]) + (Jn * E[inside]) @ coeffs.A
    if np.any(~inside):
        Hn = sf.hankel1(coeffs.n[None, :], cfg.k * rho[~inside, None])
        out[~inside] = (Hn * E[~inside]) @ coeffs.B
    return cfg.nu * out


def field_from_kernel(cfg, grid, u0, rho, phi):
    """Scattered field nu int Gamma(p, p') U0(p') d^2p' with the pointwise kernel."""
    rho = np.atleast_1d(np.asarray(rho, float))
    phi = np.atleast_1d(np.asarray(phi, float))
    u = np.asarray(u0, dtype=np.complex128) * grid.weights
    out = np.empty(rho.shape, dtype=np.complex128)
    for i in range(rho.size):
        kern = cylinder_resolvent((rho[i], phi[i]), (grid.rho, grid.phi), cfg)
        out[i] = kern @ u
    return cfg.nu * out


def boundary_continuity_residual(cfg, grid, u0, n_phi=64):
    """Field and radial-derivative jumps at rho = a, relative to their magnitudes.

    The inside field combines the direct quadrature of the interior free
    kernel with the truncated mode sum; the outside field is the truncated
    outgoing series.  Both residuals shrink as the cutoff N grows.
    """
    u0 = np.asarray(u0, dtype=np.complex128)
    if not np.any(u0):
        return 0.0, 0.0
    coeffs = mode_coefficients(cfg, grid, u0)
    phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    rho = np.full(n_phi, cfg.a)
    n = coeffs.n
    E = np.exp(1j * n[None, :] * phi[:, None])
    ksa = cfg.ks * cfg.a
    ka = cfg.k * cfg.a
    u_in = incident_integral(cfg, grid, u0, rho, phi) + E @ (coeffs.A * sf.bessel_j(n, ksa))
    du_in = incident_integral(cfg, grid, u0, rho, phi, derivative=True) + E @ (
        coeffs.A * cfg.ks * sf.bessel_j_deriv(n, ksa)
    )
    u_out = E @ (coeffs.B * sf.hankel1(n, ka))
    du_out = E @ (coeffs.B * cfg.k * sf.hankel1_deriv(n, ka))
    r_val = np.max(np.abs(u_in - u_out)) / np.max(np.abs(u_in))
    r_der = np.max(np.abs(du_in - du_out)) / np.max(np.abs(du_in))
    return float(r_val), float(r_der)


def addition_theorem_residual(k, points, N):
    """|sum_{|n|<=N} J_n(k rho) J_n(k rho') e^{in(phi-phi')} - J0(k |p - p'|)|."""
    p, pp = points
    r1, f1 = _coords(p)
    r2, f2 = _coords(pp)
    n = np.arange(-N, N + 1)
    s = np.sum(sf.bessel_j(n, k * r1) * sf.bessel_j(n, k * r2) * np.exp(1j * n * (f1 - f2)))
    return float(abs(s - sf.bessel_j(0, k * _chord(p, pp))))


def free_commutator_delta_check(sigma, K, order=24):
    """Weak-form check of int_0^K Im g(p, p') k dk = -(pi/2) delta(p - p').

    The cutoff integral is paired with a normalized Gaussian of width sigma
    centred at p.  Using int_0^K k J0(kr) dk = K J1(Kr) / r this reduces to
    -(pi/2) K int_0^inf phi(r) J1(K r) dr, computed by panel quadrature.
    Returns |value - target| / |target| with target -(pi/2) phi(0).
    Raises ConvergenceError when the value still moves by more than 1% between
    the cutoffs 0.8 K and K.
    """
    if not (sigma > 0 and K > 0):
        raise ValidationError("sigma and K must be positive")

    def weak(kc):
        R = 12.0 * sigma
        n_panels = int(math.ceil(R * kc / math.pi)) + 8
        edges = np.linspace(0.0, R, n_panels + 1)
        t, w = np.polynomial.legendre.leggauss(order)
        half = 0.5 * np.diff(edges)
        r = ((0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * t).ravel()
        wr = (half[:, None] * w).ravel()
        phi = np.exp(-(r**2) / (2 * sigma**2)) / (2 * np.pi * sigma**2)
        return -0.5 * np.pi * kc * np.sum(wr * phi * special.j1(kc * r))

    target = -0.5 * np.pi / (2 * np.pi * sigma**2)
    value = weak(K)
    if abs(value - weak(0.8 * K)) > 0.01 * abs(value):
        raise ConvergenceError("cutoff too small for the test width (oscillatory tail above 1%)")
    return float(abs(value - target) / abs(target))


def gaussian_weight(sigma, n_radial=64, order=None):
    """Total weight of the normalized Gaussian test function on a polar grid."""
    R = 12.0 * sigma
    g = gauss_legendre(n_radial, 0.0, R)
    return float(np.sum(g.weights * g.nodes * 2 * np.pi * np.exp(-g.nodes**2 / (2 * sigma**2)) / (2 * np.pi * sigma**2)))


# fast real-k tables for the noise integral


def _bessel_tables(nmax, x, need_y=True):
    """J_n(x), Y_n(x) for n = 0..nmax+1 and real x > 0 (arrays of shape (nmax+2, len(x))).

    J by Miller's backward recurrence normalized with J0 + 2 sum J_2k = 1,
    Y by upward recurrence from Y0, Y1.
    """
    x = np.asarray(x, dtype=float)
    top = nmax + 1
    big = max(top, float(x.max()))
    m = int(big + math.sqrt(160.0 * big)) + 20
    m += m % 2
    J = np.empty((top + 1, x.size))
    jp1 = np.zeros_like(x)
    j = np.full_like(x, 1e-280)
    norm = np.zeros_like(x)
    for n in range(m, 0, -1):
        if n <= top:
            J[n] = j
        if n % 2 == 0:
            norm += 2.0 * j
        jm1 = (2.0 * n / x) * j - jp1
        jp1, j = j, jm1
        over = np.abs(j) > 1e250
        if np.any(over):
            f = np.where(over, 1e-250, 1.0)
            j *= f
            jp1 *= f
            norm *= f
            lo = max(n, 0)
            if lo <= top:
                J[lo:] *= f[None, :]
    J[0] = j
    norm += j
    J /= norm[None, :]
    if not need_y:
        return J, None
    Y = np.empty_like(J)
    Y[0] = special.y0(x)
    if top >= 1:
        Y[1] = special.y1(x)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, top):
            Y[n + 1] = (2.0 * n / x) * Y[n] - Y[n - 1]
    return J, Y


def _deriv_table(T):
    D = np.empty_like(T[:-1])
    D[0] = -T[1]
    D[1:] = 0.5 * (T[:-2] - T[2:])
    return D


def _integrand_block(cfg, k, rho, rhop, dphi, nmax):
    """dg(k) for an array of real positive k with modes 0..nmax."""
    s = cfg.sqrt_eps
    a = cfg.a
    Jo, Yo = _bessel_tables(nmax, k * a)
    Ji, Yi = _bessel_tables(nmax, k * s * a)
    Jr, _ = _bessel_tables(nmax, k * s * rho, need_y=False)
    Jp, _ = _bessel_tables(nmax, k * s * rhop, need_y=False)
    Ho = Jo + 1j * Yo
    Hi = Ji + 1j * Yi
    dHo, dHi, dJi = _deriv_table(Ho), _deriv_table(Hi), _deriv_table(Ji)
    Ho, Hi, Ji, Jr, Jp = Ho[:-1], Hi[:-1], Ji[:-1], Jr[:-1], Jp[:-1]
    with np.errstate(over="ignore", invalid="ignore"):
        W = (dHo * Hi - s * Ho * dHi) / (dHo * Ji - s * Ho * dJi)
        n = np.arange(nmax + 1)[:, None]
        mult = np.where(n == 0, 1.0, 2.0)
        jj = Jr * Jp
        terms = np.where(jj == 0, 0.0, mult * W * jj * np.cos(n * dphi))
    if not np.all(np.isfinite(terms)):
        raise ConvergenceError("non-finite mode term in the noise integrand")
    total = 0.25j * terms.sum(axis=0)
    tail = 0.25 * (np.abs(terms[-1]) + np.abs(terms[-2]))
    return total, tail


def delta_g_real_k(p, pp, cfg, k):
    """dg(p, p'; k) on an array of real positive k via recurrence tables.

    The cutoff is chosen per block from ks * max(rho, rho') and validated by
    the same last-two-terms tail test as delta_g.
    """
    rho, phi = (float(v) for v in _coords(p))
    rhop, phip = (float(v) for v in _coords(pp))
    k = np.asarray(k, dtype=float)
    out = np.empty(k.shape, dtype=np.complex128)
    order = np.argsort(k)
    ks_sorted = k[order]
    reach = max(rho, rhop) * cfg.sqrt_eps
    block = 512
    for start in range(0, k.size, block):
        idx = order[start : start + block]
        kmax = ks_sorted[min(start + block, k.size) - 1]
        x = kmax * reach
        nmax = int(x + 6.0 * x ** (1.0 / 3.0)) + 16
        for _ in range(6):
            total, tail = _integrand_block(cfg, k[idx], rho, rhop, phi - phip, nmax)
            if np.all(tail <= TAIL_TOL * np.maximum(np.abs(total), 1e-300)):
                break
            nmax += 16
        else:
            raise TruncationError("noise integrand mode sum did not converge")
        out[idx] = total
    return out


@dataclass(frozen=True)
class NoiseIntegral:
    """Damped k-integral of dg k with its quadrature error and reference scale."""

    value: complex
    error: float
    reference: float
    eta: float
    cutoff: float

    @property
    def lower_bound(self):
        return max(abs(self.value) - self.error, 0.0)

    @property
    def ratio(self):
        return abs(self.value) / self.reference


def cylinder_noise_schedule(p, pp, cfg, etas, cutoff_factor=40.0, panel=0.25, order=16):
    """cylinder_noise_integral along a damping schedule, cutoff K = factor / eta.

    The integrand is sampled once on [0, max K] and reused for every eta.
    """
    etas = [float(e) for e in etas]
    if not all(e > 0 for e in etas):
        raise ValidationError("damping must be positive")
    cutoffs = [cutoff_factor / e for e in etas]
    kmax = max(cutoffs)
    nodes, w, wc = panel_rule(kmax, panel, order, breaks=cutoffs)
    d = float(_chord(p, pp))
    if d < GUARD * cfg.a:
        raise SingularityError("noise integral needs distinct points")
    if cfg.epsilon == 1.0:
        f = np.zeros_like(nodes, dtype=np.complex128)
    else:
        f = delta_g_real_k(p, pp, cfg, nodes)
    gref = np.abs(0.25 * special.hankel1(0, nodes * d) * nodes)
    out = []
    for eta, K in zip(etas, cutoffs):
        m = nodes <= K
        damp = nodes[m] * np.exp(-eta * nodes[m])
        g = f[m].imag * damp
        value = 2j * np.sum(w[m] * g)
        coarse = 2j * np.sum(wc[m] * g)
        ref = float(np.sum(w[m] * gref[m] * np.exp(-eta * nodes[m])))
        res = NoiseIntegral(complex(value), float(abs(value - coarse)), ref, eta, K)
        if cfg.epsilon != 1.0 and res.error > 0.1 * abs(res.value):
            raise ConvergenceError(
                f"cylinder noise integral not converged at eta={eta} (estimate {res.error:.2e}, value {abs(value):.2e})"
            )
        out.append(res)
    return out


def cylinder_noise_integral(p, pp, cfg, K, eta):
    """2i int_0^K Im dg(p, p'; k) k e^{-eta k} dk, the damped integral of dg k over [-K, K].

    The fold onto [0, K] uses dg(p, p'; -k) = conj dg(p, p'; k).
    """
    if not K > 0:
        raise ValidationError("cutoff must be positive")
    return cylinder_noise_schedule(p, pp, cfg, [eta], cutoff_factor=K * eta)[0]
