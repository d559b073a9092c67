"""Nystrom discretization of symmetric Fredholm kernels.

The kernel g(x, x') is sampled on a quadrature grid, G_ij = g(x_i, x_j), and
integrals become G @ W with W = diag(weights).  Eigenfunctions are normalized
in the bilinear (unconjugated) sense sum_i u_n(x_i) u_m(x_i) w_i = delta_nm,
which is the natural pairing for complex symmetric, non-Hermitian kernels.

Besides the resolvent itself, this module checks the matrix forms of the
quantum identities built on it: commutator closure, noise restoration, the
noise-mode commutators and the vacuum-noise intensity split.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .errors import DegeneracyWarning, SingularResolventError, ValidationError
from .specfun import QuadratureGrid, gauss_legendre, lagrange_matrix

SYMMETRY_TOL = 1e-12
RETAIN_TOL = 1e-12
DEGENERACY_TOL = 1e-8
POLE_GUARD = 1e-8


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    grid: QuadratureGrid
    entries: np.ndarray
    k: float
    green: Optional[Callable] = field(default=None, repr=False)

    @property
    def nodes(self):
        return self.grid.nodes

    @property
    def weights(self):
        return self.grid.weights

    def __len__(self):
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Retained eigenpairs of G W, nu_n = 1 / lambda_n.

    Columns of `vectors` are the eigenfunctions sampled at the grid nodes,
    ordered by decreasing |lambda_n|.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray
    condition: float

    @property
    def lambdas(self):
        return 1.0 / self.eigenvalues

    def orthogonality_residual(self):
        """max over m != n of |sum_i u_n u_m w_i| (bilinear, no conjugation)."""
        gram = self.vectors.T @ (self.weights[:, None] * self.vectors)
        off = gram - np.diag(np.diag(gram))
        return float(np.max(np.abs(off))) if off.size > 1 else 0.0


@dataclass(frozen=True, eq=False)
class ResolventMatrix:
    entries: np.ndarray
    nu: complex
    parent: KernelMatrix
    method: str = "nystrom"


@dataclass(frozen=True)
class CommutatorScale:
    """Prefactor kappa = hbar c k^2 / (pi eps) of the field commutator."""

    epsilon: float
    k: float
    hbar: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "k", "hbar", "c"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"CommutatorScale.{name} must be positive")

    @property
    def kappa(self):
        return self.hbar * self.c * self.k**2 / (math.pi * self.epsilon)


def _sample(green, x, y, k):
    X, Y = np.meshgrid(x, y, indexing="ij")
    try:
        out = np.asarray(green(X, Y, k), dtype=np.complex128)
    except (TypeError, ValueError):
        out = None
    if out is None or out.shape != X.shape:
        out = np.vectorize(lambda a, b: complex(green(a, b, k)), otypes=[np.complex128])(X, Y)
    return out


def build_kernel(green, grid, k, symmetry_tol=SYMMETRY_TOL):
    """Sample green(x, x', k) on the grid nodes.

    `green` should broadcast over numpy arrays; scalar-only callables are
    vectorized automatically.  Raises ValidationError if the sampled matrix
    is not symmetric to `symmetry_tol` (relative to its largest entry).
    """
    if len(grid) == 0:
        raise ValidationError("grid is empty")
    G = _sample(green, grid.nodes, grid.nodes, k)
    if not np.all(np.isfinite(G)):
        raise ValidationError("kernel has non-finite samples (singular diagonal?)")
    scale = max(1.0, float(np.max(np.abs(G))))
    asym = float(np.max(np.abs(G - G.T)))
    if asym > symmetry_tol * scale:
        raise ValidationError(f"sampled kernel is not symmetric (max |G - G^T| = {asym:.3e})")
    G.flags.writeable = False
    return KernelMatrix(grid, G, float(k), green)


def _min_separation(lam):
    d = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(lam.size, np.inf))
    return float(np.min(d / np.abs(lam)[:, None]))


def _clusters(lam):
    """Group indices of eigenvalues closer than DEGENERACY_TOL (relative)."""
    n = lam.size
    close = np.abs(lam[:, None] - lam[None, :]) <= DEGENERACY_TOL * np.abs(lam)[:, None]
    seen = np.zeros(n, dtype=bool)
    out = []
    for i in range(n):
        if seen[i]:
            continue
        group = [i]
        seen[i] = True
        stack = [i]
        while stack:
            j = stack.pop()
            for m in np.flatnonzero(close[j] & ~seen):
                seen[m] = True
                group.append(int(m))
                stack.append(int(m))
        out.append(sorted(group))
    return out


def _bilinear_orthogonalize(V, w):
    # any basis of a degenerate eigenspace is valid; pick one with V^T W V diagonal
    M = V.T @ (w[:, None] * V)
    M = 0.5 * (M + M.T)
    _, Q = linalg.eig(M)
    Q = Q / np.sqrt(np.einsum("im,im->m", Q, Q))[None, :]
    return V @ Q


def eigen_decompose(kernel):
    """Eigenpairs of the weighted matrix G W with bilinear normalization.

    Modes with |lambda| <= 1e-12 max|lambda| are dropped.  Pairs closer than
    1e-8 (relative) or nearly self-orthogonal vectors emit DegeneracyWarning.
    """
    w = kernel.weights
    lam, V = linalg.eig(kernel.entries * w[None, :])
    keep = np.abs(lam) > RETAIN_TOL * np.max(np.abs(lam))
    lam, V = lam[keep], V[:, keep]
    order = np.lexsort((lam.imag, lam.real, -np.round(np.abs(lam), 14)))
    lam, V = lam[order], V[:, order]

    clusters = _clusters(lam)
    if any(len(c) > 1 for c in clusters):
        sep = _min_separation(lam)
        warnings.warn(DegeneracyWarning(f"near-degenerate eigenvalues, separation {sep:.3e}", 1.0 / sep))
        for c in clusters:
            if len(c) > 1:
                V[:, c] = _bilinear_orthogonalize(V[:, c], w)

    norm2 = np.einsum("im,i,im->m", V, w, V)
    # |u^T W u| / (u^H W u) -> 0 for self-orthogonal (defective) directions
    herm = np.einsum("im,i,im->m", V.conj(), w, V).real
    cos = np.abs(norm2) / herm
    condition = float(1.0 / np.min(cos)) if cos.size else 1.0
    if cos.size and np.min(cos) < DEGENERACY_TOL:
        warnings.warn(DegeneracyWarning(f"nearly self-orthogonal eigenvector, condition {condition:.3e}", condition))

    U = V / np.sqrt(norm2)[None, :]
    # fix the sign ambiguity of sqrt for reproducible output
    j = np.argmax(np.abs(U), axis=0)
    U = U * np.where(U[j, np.arange(U.shape[1])].real < 0, -1.0, 1.0)[None, :]
    return SpectralData(1.0 / lam, U, np.asarray(w), condition)


def _pole_guard(kernel, nu):
    if nu == 0:
        return
    lam = linalg.eigvals(kernel.entries * kernel.weights[None, :])
    lam = lam[np.abs(lam) > RETAIN_TOL * np.max(np.abs(lam))]
    nus = 1.0 / lam
    rel = np.abs(nu - nus) / np.abs(nus)
    i = int(np.argmin(rel))
    if rel[i] <= POLE_GUARD:
        raise SingularResolventError(
            f"nu = {nu} lies within relative {rel[i]:.2e} of eigenvalue {nus[i]}", nearest=complex(nus[i])
        )


def _subinterval_grid(grid, per_interval):
    edges = np.concatenate(([grid.a], grid.nodes, [grid.b]))
    t, w = np.polynomial.legendre.leggauss(per_interval)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    wf = (half[:, None] * w[None, :]).ravel()
    return x, wf


def _corrected_resolvent(kernel, nu, per_interval):
    # Gamma = G + D with D = nu (g o g) + nu g o D.  D is smooth in its first
    # argument, so interpolate it with the node polynomial and integrate
    # against the kinked kernel on a fine grid split at every node.
    if kernel.green is None:
        raise ValidationError("corrected resolvent needs the kernel callable")
    x = kernel.nodes
    xf, wf = _subinterval_grid(kernel.grid, per_interval)
    Gf = _sample(kernel.green, x, xf, kernel.k)
    L = lagrange_matrix(x, xf)
    P = (Gf * wf[None, :]) @ L
    Q = (Gf * wf[None, :]) @ Gf.T
    Q = 0.5 * (Q + Q.T)
    n = x.size
    D = nu * linalg.solve(np.eye(n) - nu * P, Q)
    return kernel.entries + 0.5 * (D + D.T)


def resolvent_matrix(kernel, nu, method="nystrom", per_interval=12, check_poles=True):
    """Discrete resolvent Gamma at spectral parameter nu.

    method="nystrom" returns Gamma = (I - nu G W)^{-1} G, the exact resolvent of
    the discretized operator.  All matrix identities hold for it to roundoff.

    method="corrected" approximates the continuous resolvent kernel at the
    nodes with product integration across the kernel's diagonal kink; it
    converges much faster for kernels with a |x - x'| cusp.
    """
    nu = complex(nu)
    if check_poles:
        _pole_guard(kernel, nu)
    if nu == 0:
        return ResolventMatrix(np.array(kernel.entries), nu, kernel, method)
    if method == "nystrom":
        n = len(kernel)
        A = np.eye(n) - nu * kernel.entries * kernel.weights[None, :]
        gamma = linalg.solve(A, kernel.entries)
        gamma = 0.5 * (gamma + gamma.T)
    elif method == "corrected":
        gamma = _corrected_resolvent(kernel, nu, per_interval)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ResolventMatrix(gamma, nu, kernel, method)


def _nu_real(nu):
    if abs(complex(nu).imag) > 0:
        raise ValidationError("spectral parameter must be real here")
    return float(complex(nu).real)


def hilbert_schmidt_residual(res):
    """max |(Gamma - G) - nu Gamma W G|."""
    G = res.parent.entries
    W = res.parent.weights
    r = (res.entries - G) - res.nu * (res.entries * W[None, :]) @ G
    return float(np.max(np.abs(r)))


def resolvent_consistency_residual(res):
    """max |(I - nu G W)(I + nu Gamma W) - I|."""
    G = res.parent.entries
    W = res.parent.weights
    n = len(res.parent)
    prod = (np.eye(n) - res.nu * G * W[None, :]) @ (np.eye(n) + res.nu * res.entries * W[None, :])
    return float(np.max(np.abs(prod - np.eye(n))))


def solve_fredholm(kernel, nu, rhs):
    """E = E0 + nu Gamma W E0, the solution of E - nu G W E = E0."""
    rhs = np.asarray(rhs, dtype=np.complex128)
    if rhs.shape[0] != len(kernel):
        raise ValidationError("rhs must be sampled on the kernel grid")
    res = resolvent_matrix(kernel, nu)
    return rhs + res.nu * res.entries @ (kernel.weights * rhs.T).T


def fredholm_residual(kernel, nu, rhs, solution):
    """max |E - nu G W E - E0|."""
    W = kernel.weights
    r = solution - nu * kernel.entries @ (W * solution.T).T - rhs
    return float(np.max(np.abs(r)))


def commutator_closure_residual(kernel, nu, relative=False):
    """max |R Im(G) R^H - Im(Gamma)| with R = I + nu Gamma W, for real nu.

    This is the discrete statement that the resolvent solution alone carries
    the commutator Im(Gamma) instead of the free-space Im(G).  With
    relative=True the result is divided by max |Im(Gamma)|.
    """
    nu = _nu_real(nu)
    res = resolvent_matrix(kernel, nu)
    n = len(kernel)
    R = np.eye(n) + nu * res.entries * kernel.weights[None, :]
    lhs = R @ kernel.entries.imag @ R.conj().T
    err = float(np.max(np.abs(lhs - res.entries.imag)))
    if relative:
        return err / float(np.max(np.abs(res.entries.imag)))
    return err


def noise_commutator_matrix(kernel, nu, scale):
    """N_ij = -kappa Im(Gamma_ij - G_ij), the noise-field commutator."""
    res = resolvent_matrix(kernel, nu)
    N = -scale.kappa * (res.entries - kernel.entries).imag
    return 0.5 * (N + N.T)


def restoration_residual(kernel, nu):
    """max |Im(Gamma) - Im(Gamma - G) - Im(G)| (zero up to roundoff)."""
    res = resolvent_matrix(kernel, nu)
    gamma = res.entries
    return float(np.max(np.abs(gamma.imag - (gamma - kernel.entries).imag - kernel.entries.imag)))


def noise_mode_commutators(spectral, nu, scale):
    """c_n = -kappa nu Im(1 / ((nu_n - nu) nu_n)) for every retained mode."""
    nu = _nu_real(nu)
    nus = spectral.eigenvalues
    rel = np.abs(nu - nus) / np.abs(nus)
    if nu != 0 and np.min(rel) <= POLE_GUARD:
        i = int(np.argmin(rel))
        raise SingularResolventError(f"nu = {nu} is at eigenvalue {nus[i]}", nearest=complex(nus[i]))
    return -scale.kappa * nu * (1.0 / ((nus - nu) * nus)).imag


def mode_expansion_discrepancy(spectral, kernel, nu, scale):
    """Compare the noise commutator with its diagonal mode expansion.

    Returns max_ij |N_ij - sum_n c_n u_n(x_i) conj(u_n(x_j))|.  This vanishes
    only when the eigenfunctions can be taken real; for complex u_n the
    cross terms u_n u_m* do not cancel, so the result measures the mismatch.
    """
    N = noise_commutator_matrix(kernel, nu, scale)
    c = noise_mode_commutators(spectral, nu, scale)
    U = spectral.vectors
    recon = (U * c[None, :]) @ U.conj().T
    return float(np.max(np.abs(N - recon)))


@dataclass(frozen=True)
class NoiseIntensity:
    """Per-node intensities: coherent |R E0|^2 plus vacuum noise.

    `noise_normal` is <F^H F> in the noise-mode vacuum with modes of negative
    commutator treated as creation operators; `noise_antinormal` is <F F^H>.
    The totals add the coherent term to each.
    """

    coherent: np.ndarray
    noise_normal: np.ndarray
    noise_antinormal: np.ndarray

    @property
    def total_normal(self):
        return self.coherent + self.noise_normal

    @property
    def total_antinormal(self):
        return self.coherent + self.noise_antinormal


def vacuum_noise_intensity(kernel, nu, scale, e0=None):
    """Split of the observable intensity into coherent and noise parts.

    The real symmetric noise commutator N = sum_k mu_k v_k v_k^T is realized by
    independent bosonic modes, annihilators for mu_k > 0 and creators for
    mu_k < 0.  In their vacuum <F_i^H F_i> = sum_{mu<0} |mu_k| v_k(i)^2 and
    <F_i F_i^H> = sum_{mu>0} mu_k v_k(i)^2; both are returned.
    """
    N = noise_commutator_matrix(kernel, nu, scale)
    mu, V = linalg.eigh(N)
    V2 = V**2
    normal = V2 @ np.where(mu < 0, -mu, 0.0)
    antinormal = V2 @ np.where(mu > 0, mu, 0.0)
    if e0 is None:
        coherent = np.zeros(len(kernel))
    else:
        field_ = solve_fredholm(kernel, nu, e0)
        coherent = np.abs(field_) ** 2
    return NoiseIntensity(coherent, normal, antinormal)


def _interpolate_modes(spectral, kernel, x):
    # Nystrom interpolation u_n(x) = nu_n sum_j g(x, x_j) w_j u_n(x_j)
    Gx = _sample(kernel.green, x, kernel.nodes, kernel.k)
    return (Gx * kernel.weights[None, :]) @ spectral.vectors * spectral.eigenvalues[None, :]


def identity_a8_residual(spectral, kernel, reference_order=None, modes=None):
    """Residual of (1/nu_n - 1/nu_m*) <u_n, u_m*> = 2i <u_n, Im g, u_m*>.

    With reference_order=None both sides are evaluated on the kernel grid,
    where the identity is exact up to roundoff.  Otherwise the leading `modes`
    eigenfunctions are Nystrom-interpolated onto a Gauss-Legendre reference
    grid of that order and both integrals are evaluated there, so the
    residual measures how well the discrete modes satisfy the continuous
    identity.
    """
    lam = spectral.lambdas
    U = spectral.vectors
    if modes is not None:
        lam, U = lam[:modes], U[:, :modes]
        spectral = SpectralData(spectral.eigenvalues[:modes], U, spectral.weights, spectral.condition)
    if reference_order is None:
        w = kernel.weights
        img = kernel.entries.imag
    else:
        if kernel.green is None:
            raise ValidationError("reference evaluation needs the kernel callable")
        ref = gauss_legendre(reference_order, kernel.grid.a, kernel.grid.b)
        U = _interpolate_modes(spectral, kernel, ref.nodes)
        w = ref.weights
        img = _sample(kernel.green, ref.nodes, ref.nodes, kernel.k).imag
    S = U.conj().T @ (w[:, None] * U)  # S[m, n] = sum u_m* u_n w
    T = U.conj().T @ ((w[:, None] * img * w[None, :]) @ U)
    lhs = (lam[None, :] - lam.conj()[:, None]) * S
    return float(np.max(np.abs(lhs - 2j * T)))


def spectral_reconstruction_error(spectral, kernel, n_modes):
    """max |G - sum_{n < n_modes} u_n u_n^T / nu_n|."""
    U = spectral.vectors[:, :n_modes]
    lam = spectral.lambdas[:n_modes]
    return float(np.max(np.abs(kernel.entries - (U * lam[None, :]) @ U.T)))
