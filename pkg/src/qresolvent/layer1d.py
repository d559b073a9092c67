"""Planar dielectric layer on [0, l] at normal incidence.

The scattered field satisfies U'' + k^2 eps U = nu U0 inside the layer with
nu = -k^2 (eps - 1), and is outgoing outside.  Its resolvent kernel is the
interior free kernel plus multiply reflected waves with interior reflection
coefficient -r at both faces, where r = (1 - sqrt(eps)) / (1 + sqrt(eps)).
"""

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError, ResonanceError, ValidationError
from .specfun import QuadratureGrid, lagrange_matrix, panel_rule

RESONANCE_TOL = 1e-12


@dataclass(frozen=True)
class LayerConfig:
    """Layer of permittivity `epsilon` and thickness `length` at wavenumber k.

    k is normally real and positive; negative or complex values are accepted
    for analytic continuation (conjugation checks, pole refinement).
    """

    epsilon: float
    length: float = 1.0
    k: complex = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon >= 1.0):
            raise ValidationError("layer permittivity must be a finite real >= 1")
        if not (math.isfinite(self.length) and self.length > 0):
            raise ValidationError("layer length must be positive")
        if not cmath.isfinite(self.k) or self.k == 0:
            raise ValidationError("wavenumber must be finite and nonzero")

    @property
    def sqrt_eps(self):
        return math.sqrt(self.epsilon)

    @property
    def r(self):
        s = self.sqrt_eps
        return (1.0 - s) / (1.0 + s)

    @property
    def nu(self):
        return -self.k**2 * (self.epsilon - 1.0)

    @property
    def phi(self):
        return self.k * self.length

    @property
    def phi_eps(self):
        return self.k * self.sqrt_eps * self.length

    def with_k(self, k):
        return replace(self, k=k)


@dataclass(frozen=True)
class BoundaryCoefficients:
    """Amplitudes of A e^{iksx} + B e^{-iksx} inside, C e^{ikx} right, D e^{-ikx} left."""

    A: complex
    B: complex
    C: complex
    D: complex


@dataclass(frozen=True)
class Pole:
    n: int
    k: complex
    residual: float


@dataclass(frozen=True)
class PoleSet:
    poles: tuple

    def __iter__(self):
        return iter(self.poles)

    def __len__(self):
        return len(self.poles)

    @property
    def k(self):
        return np.array([p.k for p in self.poles])


def green_free_1d(x, xp, k):
    """Free-space 1D kernel e^{ik|x-x'|} / (2ik)."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    out = np.exp(1j * k * np.abs(x - xp)) / (2j * k)
    return complex(out) if out.ndim == 0 else out


def _denominator(cfg, k=None):
    k = cfg.k if k is None else k
    return 1.0 - cfg.r**2 * np.exp(2j * k * cfg.sqrt_eps * cfg.length)


def boundary_solve(cfg, f_plus, f_minus):
    """Interior and exterior amplitudes for the source projections f_+, f_-.

    f_pm = nu / (2ik) * integral of e^{+-ik sqrt(eps) x'} U0(x') over the layer.
    """
    den = _denominator(cfg)
    if abs(den) < RESONANCE_TOL:
        raise ResonanceError(f"k = {cfg.k} is at a slab resonance (|1 - r^2 e^(2i Phi_eps)| = {abs(den):.2e})")
    s = cfg.sqrt_eps
    r = cfg.r
    e = np.exp(1j * cfg.phi_eps)
    xi = r * e**2 / den
    A = -xi / s * (f_plus / e**2 - r * f_minus)
    B = xi / s * (r * f_plus - f_minus)
    D = A + B + f_plus / s
    C = (A * e + B / e + e * f_minus / s) / np.exp(1j * cfg.phi)
    return BoundaryCoefficients(complex(A), complex(B), complex(C), complex(D))


def boundary_system_residual(cfg, coeffs, f_plus, f_minus):
    """Largest residual of the four interface equations."""
    s = cfg.sqrt_eps
    e = np.exp(1j * cfg.phi_eps)
    ep = np.exp(1j * cfg.phi)
    A, B, C, D = coeffs.A, coeffs.B, coeffs.C, coeffs.D
    res = [
        A + B - D + f_plus / s,
        s * (A - B) + D - f_plus,
        A * e + B / e - C * ep + e * f_minus / s,
        s * (A * e - B / e) - C * ep + e * f_minus,
    ]
    return float(max(abs(v) for v in res))


def _kernel_parts(cfg, k, x, xp):
    # direct and reflected parts; k may be an array broadcasting with x, x'
    ks = k * cfg.sqrt_eps
    l = cfg.length
    r = cfg.r
    pre = 1.0 / (2j * ks)
    direct = pre * np.exp(1j * ks * np.abs(x - xp))
    refl = (
        -r * np.exp(1j * ks * (x + xp))
        + r**2 * np.exp(1j * ks * (x - xp + 2 * l))
        + r**2 * np.exp(-1j * ks * (x - xp - 2 * l))
        - r * np.exp(-1j * ks * (x + xp - 2 * l))
    )
    return direct, pre * refl / _denominator(cfg, k)


def _check_inside(cfg, x, xp):
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if np.any((x < 0) | (x > cfg.length) | (xp < 0) | (xp > cfg.length)):
        raise ValidationError("points must lie inside the layer [0, l]")
    return x, xp


def layer_resolvent_kernel(cfg, x, xp):
    """Resolvent kernel of the layer: interior free kernel plus reflections."""
    x, xp = _check_inside(cfg, x, xp)
    direct, refl = _kernel_parts(cfg, cfg.k, x, xp)
    out = direct + refl
    return complex(out) if out.ndim == 0 else out


def reflected_kernel(cfg, x, xp, k=None):
    """Resolvent kernel minus its interior free-space term (optionally at an array of k)."""
    x, xp = _check_inside(cfg, x, xp)
    out = _kernel_parts(cfg, cfg.k if k is None else np.asarray(k), x, xp)[1]
    return complex(out) if np.ndim(out) == 0 else out


def layer_poles(cfg, n_min, n_max, tol=1e-12, max_iter=50):
    """Resonances r^2 e^{2ik sqrt(eps) l} = 1 for n in [n_min, n_max].

    Seeds k_n = (n pi + i ln|r|) / (sqrt(eps) l) are refined by Newton steps.
    """
    r2 = cfg.r**2
    if r2 == 0:
        raise ValidationError("no poles without index contrast (epsilon = 1)")
    sl = cfg.sqrt_eps * cfg.length
    poles = []
    for n in range(int(n_min), int(n_max) + 1):
        k = complex(n * math.pi, math.log(abs(cfg.r))) / sl
        for _ in range(max_iter):
            F = r2 * cmath.exp(2j * k * sl) - 1.0
            if abs(F) < tol:
                break
            k -= F / (2j * sl * r2 * cmath.exp(2j * k * sl))
        else:
            raise ConvergenceError(f"Newton iteration for pole n={n} did not converge")
        residual = abs(r2 * cmath.exp(2j * k * sl) - 1.0)
        poles.append(Pole(n, k, residual))
    return PoleSet(tuple(poles))


def folded_integral(integrand, K, eta, panel=0.5, order=16):
    """2i * int_0^K Im(f(k)) k e^{-eta k} dk and an error estimate.

    `integrand(k)` returns f on an array of positive k; the fold uses
    f(-k) = conj(f(k)) so the symmetric integral over [-K, K] reduces to the
    imaginary part on [0, K].  The estimate is the embedded coarse rule.
    """
    kk, ww, wc = panel_rule(K, panel, order)
    g = np.asarray(integrand(kk)).imag * kk * np.exp(-eta * kk)
    value = 2j * np.sum(ww * g)
    return complex(value), float(abs(value - 2j * np.sum(wc * g)))


def layer_noise_integral(cfg, x, xp, K, eta):
    """Damped integral of the reflected kernel times k over [-K, K].

    Raises ConvergenceError when the quadrature error estimate exceeds 10% of
    the returned magnitude.
    """
    if not (K > 0 and eta > 0):
        raise ValidationError("cutoff and damping must be positive")
    if cfg.r == 0:
        return 0j

    def f(kk):
        return reflected_kernel(cfg, x, xp, k=kk)

    # panels resolve the fastest oscillation e^{ik sqrt(eps) (x + x' + 2l)}
    period = 2 * math.pi / (cfg.sqrt_eps * (x + xp + 2 * cfg.length))
    value, err = folded_integral(f, K, eta, panel=min(0.5, period))
    if err > 0.1 * abs(value):
        raise ConvergenceError(f"layer noise integral not converged (estimate {err:.2e}, value {abs(value):.2e})")
    return value


def reference_scale(K, eta):
    """int_0^K |g k| e^{-eta k} dk for the free kernel, where |g k| = 1/2."""
    return 0.5 * (-math.expm1(-eta * K)) / eta


def _interior_integrals(cfg, grid, u0, x, order=48):
    """I_<(x) = int_0^x e^{iks(x-x')} U0, I_>(x) = int_x^l e^{iks(x'-x)} U0."""
    ks = cfg.k * cfg.sqrt_eps
    t, w = np.polynomial.legendre.leggauss(order)
    u0 = np.asarray(u0, dtype=np.complex128)

    def piece(lo, hi, sign):
        half = 0.5 * (hi - lo)
        xs = (0.5 * (hi + lo))[:, None] + half[:, None] * t[None, :]
        vals = lagrange_matrix(grid.nodes, xs.ravel()) @ u0
        ph = np.exp(1j * ks * sign * (x[:, None] - xs))
        return np.sum(half[:, None] * w[None, :] * ph * vals.reshape(xs.shape), axis=1)

    zero = np.zeros_like(x)
    ell = np.full_like(x, cfg.length)
    return piece(zero, x, 1.0), piece(x, ell, -1.0)


def source_projections(cfg, grid, u0):
    """f_pm = nu / (2ik) * int e^{+-ik sqrt(eps) x'} U0(x') dx'."""
    ks = cfg.k * cfg.sqrt_eps
    u0 = np.asarray(u0, dtype=np.complex128)
    pre = cfg.nu / (2j * cfg.k)
    fp = pre * np.sum(grid.weights * np.exp(1j * ks * grid.nodes) * u0)
    fm = pre * np.sum(grid.weights * np.exp(-1j * ks * grid.nodes) * u0)
    return complex(fp), complex(fm)


def scattered_field(cfg, grid, u0, x, derivative=False):
    """Scattered field (or its x-derivative) for an incident field sampled on `grid`.

    The incident field is interpolated from the grid nodes, so it should be
    smooth on [0, l].  Points outside the layer use the outgoing exterior
    amplitudes; -inf and +inf return the amplitudes D and C themselves.
    """
    if not isinstance(grid, QuadratureGrid) or grid.a != 0 or grid.b != cfg.length:
        raise ValidationError("incident field must be sampled on a grid over [0, l]")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u0 = np.asarray(u0, dtype=np.complex128)
    if not np.any(u0):
        return np.zeros(x.shape, dtype=np.complex128)
    coeffs = boundary_solve(cfg, *source_projections(cfg, grid, u0))
    k = cfg.k
    ks = k * cfg.sqrt_eps
    out = np.zeros(x.shape, dtype=np.complex128)

    inside = (x >= 0) & (x <= cfg.length)
    if np.any(inside):
        xi = x[inside]
        lo, hi = _interior_integrals(cfg, grid, u0, xi)
        if derivative:
            part = 0.5 * cfg.nu * (lo - hi)
            hom = 1j * ks * (coeffs.A * np.exp(1j * ks * xi) - coeffs.B * np.exp(-1j * ks * xi))
        else:
            part = cfg.nu / (2j * ks) * (lo + hi)
            hom = coeffs.A * np.exp(1j * ks * xi) + coeffs.B * np.exp(-1j * ks * xi)
        out[inside] = part + hom

    right = x > cfg.length
    left = x < 0
    fin = np.isfinite(x)
    out[right & ~fin] = coeffs.C
    out[left & ~fin] = coeffs.D
    rr = right & fin
    ll = left & fin
    if derivative:
        out[rr] = 1j * k * coeffs.C * np.exp(1j * k * x[rr])
        out[ll] = -1j * k * coeffs.D * np.exp(-1j * k * x[ll])
    else:
        out[rr] = coeffs.C * np.exp(1j * k * x[rr])
        out[ll] = coeffs.D * np.exp(-1j * k * x[ll])
    return out


def continuity_residual(cfg, grid, u0):
    """Jumps of the field and of its derivative across x = 0 and x = l."""
    l = cfg.length
    inner = scattered_field(cfg, grid, u0, [0.0, l])
    inner_d = scattered_field(cfg, grid, u0, [0.0, l], derivative=True)
    coeffs = boundary_solve(cfg, *source_projections(cfg, grid, u0))
    k = cfg.k
    outer = np.array([coeffs.D, coeffs.C * np.exp(1j * k * l)])
    outer_d = np.array([-1j * k * coeffs.D, 1j * k * coeffs.C * np.exp(1j * k * l)])
    return float(np.max(np.abs(inner - outer))), float(np.max(np.abs(inner_d - outer_d)))
