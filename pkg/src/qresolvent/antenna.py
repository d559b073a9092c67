"""Two-element quantum dipole antenna as a symmetric four-port.

Ports are ordered (x1, x2, y1, y2): two feed lines and two emitters.  The
scattering matrix has the Z2 x Z2 group pattern

    [[r, t1, t2, t3],
     [t1, r, t3, t2],
     [t2, t3, r, t1],
     [t3, t2, t1, r]]

so its eigenvalues are r + s1 t1 + s2 t2 + s1 s2 t3 for s1, s2 = +-1 and it
is unitary exactly when all four have unit modulus.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .errors import CapacityError, ValidationError

UNITARITY_TOL = 1e-10
DEFAULT_NMAX = 4

RELATIONS = (
    "|r|^2 + |t1|^2 + |t2|^2 + |t3|^2 = 1",
    "Re(r t1* + t2 t3*) = 0",
    "Re(r t2* + t1 t3*) = 0",
    "Re(r t3* + t1 t2*) = 0",
)


def _pattern(r, t1, t2, t3):
    return np.array(
        [[r, t1, t2, t3], [t1, r, t3, t2], [t2, t3, r, t1], [t3, t2, t1, r]],
        dtype=np.complex128,
    )


def relation_residuals(r, t1, t2, t3):
    """Residuals of the four coupling relations and of full 4x4 unitarity."""
    c = np.conj
    rel = [
        abs(abs(r) ** 2 + abs(t1) ** 2 + abs(t2) ** 2 + abs(t3) ** 2 - 1.0),
        abs((r * c(t1) + t2 * c(t3)).real),
        abs((r * c(t2) + t1 * c(t3)).real),
        abs((r * c(t3) + t1 * c(t2)).real),
    ]
    S = _pattern(r, t1, t2, t3)
    unit = float(np.max(np.abs(S @ S.conj().T - np.eye(4))))
    return dict(zip(RELATIONS, map(float, rel))), unit


@dataclass(frozen=True)
class BlockPair:
    A: np.ndarray
    B: np.ndarray

    def assemble(self):
        return np.block([[self.A, self.B], [self.B, self.A]])


@dataclass(frozen=True)
class SMatrix4:
    r: complex
    t1: complex
    t2: complex
    t3: complex

    @property
    def matrix(self):
        return _pattern(self.r, self.t1, self.t2, self.t3)

    @property
    def blocks(self):
        A = np.array([[self.r, self.t1], [self.t1, self.r]], dtype=np.complex128)
        B = np.array([[self.t2, self.t3], [self.t3, self.t2]], dtype=np.complex128)
        return BlockPair(A, B)

    @property
    def eigenvalues(self):
        return {
            (s1, s2): self.r + s1 * self.t1 + s2 * self.t2 + s1 * s2 * self.t3 for s1 in (1, -1) for s2 in (1, -1)
        }


def make_smatrix(r, t1, t2, t3, tol=UNITARITY_TOL):
    """Validated scattering matrix; ValidationError names each violated relation."""
    vals = [complex(v) for v in (r, t1, t2, t3)]
    if not all(math.isfinite(v.real) and math.isfinite(v.imag) for v in vals):
        raise ValidationError("scattering parameters must be finite")
    rel, unit = relation_residuals(*vals)
    bad = [f"{name} violated by {res:.3e}" for name, res in rel.items() if res > tol]
    if bad or unit > tol:
        msg = "; ".join(bad) if bad else f"matrix not unitary (residual {unit:.3e})"
        raise ValidationError(msg)
    return SMatrix4(*vals)


def smatrix_from_phases(p_pp, p_pm, p_mp, p_mm):
    """Unitary pattern matrix with eigenvalues e^{i p} on the four (s1, s2) sectors."""
    lam = {k: np.exp(1j * p) for k, p in zip(((1, 1), (1, -1), (-1, 1), (-1, -1)), (p_pp, p_pm, p_mp, p_mm))}
    coef = {}
    for name, f in (("r", lambda a, b: 1), ("t1", lambda a, b: a), ("t2", lambda a, b: b), ("t3", lambda a, b: a * b)):
        coef[name] = sum(f(a, b) * v for (a, b), v in lam.items()) / 4
    return make_smatrix(coef["r"], coef["t1"], coef["t2"], coef["t3"])


def random_smatrix(rng):
    """Uniformly random eigenphases give a random valid scattering matrix."""
    return smatrix_from_phases(*rng.uniform(0, 2 * np.pi, size=4))


def noise_commutators(s):
    """[f_i, f_j^+] = (A A^+)_ij for the noise operators f = A y_in.

    The diagonal is |r|^2 + |t1|^2 = 1 - |t2|^2 - |t3|^2 and the off-diagonal
    2 Re(r t1*) = -(t2 t3* + t3 t2*) for a unitary matrix.
    """
    A = s.blocks.A
    return (A @ A.conj().T).real


@dataclass(frozen=True, eq=False)
class FockState:
    """Finite superposition of occupation-number states of `modes` bosonic modes."""

    modes: int
    amplitudes: Dict[Tuple[int, ...], complex] = field(default_factory=dict)
    n_max: int = DEFAULT_NMAX

    def __post_init__(self):
        amps = {}
        for occ, a in self.amplitudes.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != self.modes or any(n < 0 for n in occ):
                raise ValidationError(f"bad occupation tuple {occ}")
            if any(n > self.n_max for n in occ):
                raise CapacityError(f"occupation {occ} exceeds the truncation n_max = {self.n_max}")
            if a != 0:
                amps[occ] = amps.get(occ, 0j) + complex(a)
        object.__setattr__(self, "amplitudes", dict(sorted(amps.items())))

    @classmethod
    def basis(cls, occupation, n_max=DEFAULT_NMAX):
        return cls(len(occupation), {tuple(occupation): 1.0}, n_max)

    @classmethod
    def vacuum(cls, modes, n_max=DEFAULT_NMAX):
        return cls(modes, {(0,) * modes: 1.0}, n_max)

    def norm(self):
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalized(self):
        n = self.norm()
        if n == 0:
            raise ValidationError("cannot normalize the zero state")
        return FockState(self.modes, {k: v / n for k, v in self.amplitudes.items()}, self.n_max)

    def amplitude(self, occupation):
        return self.amplitudes.get(tuple(occupation), 0j)

    def inner(self, other):
        return sum(np.conj(a) * other.amplitude(k) for k, a in self.amplitudes.items())

    def photon_numbers(self):
        return sorted({sum(k) for k in self.amplitudes})

    def sector(self, fixed, keep):
        """Components whose modes `fixed` are empty, restricted to modes `keep`."""
        out = {}
        for occ, a in self.amplitudes.items():
            if all(occ[i] == 0 for i in fixed):
                out[tuple(occ[i] for i in keep)] = a
        return FockState(len(keep), out, self.n_max)


def _expand(matrix, state, n_max):
    # replace each input creation operator by sum_m M[j, m] out_m^+
    out = {}
    modes = state.modes
    for occ, amp in state.amplitudes.items():
        poly = {(0,) * modes: amp / math.sqrt(math.prod(math.factorial(n) for n in occ))}
        for j, n in enumerate(occ):
            for _ in range(n):
                nxt = {}
                for exps, c in poly.items():
                    for m in range(modes):
                        coef = matrix[j, m]
                        if coef == 0:
                            continue
                        e = list(exps)
                        e[m] += 1
                        e = tuple(e)
                        nxt[e] = nxt.get(e, 0j) + c * coef
                poly = nxt
        for exps, c in poly.items():
            out[exps] = out.get(exps, 0j) + c * math.sqrt(math.prod(math.factorial(n) for n in exps))
    return FockState(modes, {k: v for k, v in out.items() if abs(v) > 0}, n_max)


def transform_state(s, state):
    """Propagate a four-mode input state (x1, x2, y1, y2) through the antenna.

    The matrix maps incoming to outgoing creation operators, so each incoming
    creation operator is rewritten with its inverse, conj(S) (S is symmetric
    and unitary), and the polynomial is expanded over the vacuum.
    """
    if state.modes != 4:
        raise ValidationError("antenna states have four modes (x1, x2, y1, y2)")
    top = max(state.photon_numbers(), default=0)
    if top > state.n_max:
        raise CapacityError(f"{top} photons exceed the truncation n_max = {state.n_max}")
    return _expand(np.conj(s.matrix), state, state.n_max)


def emission_state(out_state):
    """Emitter (y1, y2) part of an output state with the feed lines in vacuum."""
    return out_state.sector(fixed=(0, 1), keep=(2, 3))


def feed_state(out_state):
    """Feed-line (x1, x2) part of an output state with the emitters in vacuum."""
    return out_state.sector(fixed=(2, 3), keep=(0, 1))


def far_zone_phase(theta, kd, beta):
    """Half the inter-element phase, (kd cos(theta) + beta) / 2."""
    return 0.5 * (kd * np.cos(theta) + beta)


def to_far_zone(state, theta, kd, beta):
    """Move the angular dependence of the array factor into a two-mode state.

    The amplitude of |m n> is multiplied by e^{i (m - n) phi_h / 2} with
    phi_h = (kd cos(theta) + beta) / 2, so the two-photon components |20>,
    |02> acquire e^{+-i phi_h}.  This is the phase assignment under which the
    array factor becomes y1 + y2 and the pair pattern is
    4 sin^4(theta) cos^2(phi_h).
    """
    if state.modes != 2:
        raise ValidationError("far-zone transform acts on two-mode emitter states")
    psi = 0.5 * far_zone_phase(theta, kd, beta)
    amps = {(m, n): a * np.exp(1j * (m - n) * psi) for (m, n), a in state.amplitudes.items()}
    return FockState(2, amps, state.n_max)


@dataclass(frozen=True, eq=False)
class AngularPattern:
    theta: np.ndarray
    kd: float
    beta: float
    g1: np.ndarray = None
    g2: np.ndarray = None


def _lower(vec, order):
    # apply (y1 + y2)^order to a dict state
    for _ in range(order):
        nxt = {}
        for (m, n), a in vec.items():
            if m:
                key = (m - 1, n)
                nxt[key] = nxt.get(key, 0j) + a * math.sqrt(m)
            if n:
                key = (m, n - 1)
                nxt[key] = nxt.get(key, 0j) + a * math.sqrt(n)
        vec = nxt
    return vec


def _correlation(state, theta, kd, beta, order):
    theta = np.asarray(theta, dtype=float)
    if state.modes != 2:
        raise ValidationError("correlation patterns need a two-mode emitter state")
    comps = list(state.amplitudes.items())
    psi = 0.5 * far_zone_phase(theta, kd, beta)
    targets = {}
    rows = []
    for (occ, a) in comps:
        low = _lower({occ: 1.0}, order)
        rows.append(low)
        for key in low:
            targets.setdefault(key, len(targets))
    if not targets:
        return np.zeros(theta.shape)
    V = np.zeros((len(targets), len(comps)), dtype=np.complex128)
    for c, low in enumerate(rows):
        for key, v in low.items():
            V[targets[key], c] = v
    amps = np.array([a for _, a in comps])
    dm = np.array([occ[0] - occ[1] for occ, _ in comps], dtype=float)
    phases = np.exp(1j * dm[:, None] * psi.ravel()[None, :])
    vec = V @ (amps[:, None] * phases)
    val = np.sum(np.abs(vec) ** 2, axis=0).reshape(theta.shape)
    return np.sin(theta) ** (2 * order) * val


def g1_pattern(state, theta, kd, beta):
    """G1(theta) = sin^2(theta) <AF^+ AF> with AF = y1 + y2 in the far-zone picture."""
    theta = np.asarray(theta, dtype=float)
    return AngularPattern(theta, float(kd), float(beta), g1=_correlation(state, theta, kd, beta, 1))


def g2_pattern(state, theta, kd, beta):
    """G2(theta) = sin^4(theta) <AF^+ AF^+ AF AF> in the far-zone picture."""
    theta = np.asarray(theta, dtype=float)
    return AngularPattern(theta, float(kd), float(beta), g2=_correlation(state, theta, kd, beta, 2))


def pattern(state, n_theta, kd, beta):
    """Both correlation functions on a uniform grid of n_theta points over [0, pi]."""
    theta = np.linspace(0.0, np.pi, int(n_theta))
    return AngularPattern(
        theta,
        float(kd),
        float(beta),
        g1=_correlation(state, theta, kd, beta, 1),
        g2=_correlation(state, theta, kd, beta, 2),
    )


def count_lobes(values, rel_floor=1e-6):
    """Number of interior local maxima above rel_floor * max."""
    v = np.asarray(values)
    floor = rel_floor * v.max()
    peaks = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]) & (v[1:-1] > floor)
    return int(np.count_nonzero(peaks))


@dataclass(frozen=True)
class OutputIntensity:
    """Per-emitter coherent intensity, the vacuum-noise term and their sum."""

    coherent: tuple
    noise: float

    @property
    def total(self):
        return tuple(c + self.noise for c in self.coherent)


def mean_output_intensity(s, feed):
    """<y_i^+ y_i> for a feed-line state `feed` (two modes) with emitters in vacuum.

    The coherent part is <(B x_in)_i^+ (B x_in)_i>.  The noise part is the
    vacuum term 1 - |r|^2 - |t1|^2 carried by the coupling to the emitter
    ports, reported separately.
    """
    if feed.modes != 2:
        raise ValidationError("feed state must have two modes (x1, x2)")
    # one-body matrix rho_kl = <x_k^+ x_l>
    rho = np.zeros((2, 2), dtype=np.complex128)
    for occ, a in feed.amplitudes.items():
        for k in range(2):
            for l in range(2):
                if occ[l] == 0:
                    continue
                new = list(occ)
                new[l] -= 1
                new[k] += 1
                b = feed.amplitude(tuple(new))
                rho[k, l] += np.conj(b) * a * math.sqrt(occ[l] * (occ[k] + (k != l)))
    B = s.blocks.B
    coherent = np.einsum("ik,kl,il->i", B.conj(), rho, B).real
    noise = 1.0 - abs(s.r) ** 2 - abs(s.t1) ** 2
    return OutputIntensity(tuple(float(c) for c in coherent), float(noise))
