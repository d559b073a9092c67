"""Command-line front end: qresolvent {layer,cylinder,antenna,verify}.

Configuration is a JSON document (--config); command-line flags override
its fields.  The output directory is taken from --out, then the
QRESOLVENT_OUT environment variable, then the config, then ./qresolvent_out.

Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence.
"""

import os

# single-threaded BLAS keeps reductions in a fixed order across runs
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import json  # noqa: E402
import math  # noqa: E402
import sys  # noqa: E402
import warnings  # noqa: E402
from dataclasses import dataclass, field, fields  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import antenna as ant  # noqa: E402
from . import cylinder2d as cyl  # noqa: E402
from . import fredholm as fh  # noqa: E402
from . import layer1d as lay  # noqa: E402
from .errors import (  # noqa: E402
    CapacityError,
    ConvergenceError,
    DegeneracyWarning,
    DomainError,
    ResonanceError,
    SingularResolventError,
    ValidationError,
)
from .io import dumps, write_csv, write_json  # noqa: E402
from .specfun import gauss_legendre  # noqa: E402

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3
OUT_ENV = "QRESOLVENT_OUT"

MATCHED = {"r": 0.0, "t1": 0.0, "t2": 1 / math.sqrt(2), "t3": [0.0, -1 / math.sqrt(2)]}

# suite name -> (tolerance, sense); "<" passes when residual < tol, ">" when value > tol
SUITE_TOLERANCES = {
    "commutator_closure": (1e-10, "<"),
    "noise_restoration": (1e-14, "<"),
    "hilbert_schmidt": (1e-12, "<"),
    "identity_a8": (1e-10, "<"),
    "addition_theorem": (1e-12, "<"),
    "branch_relation": (1e-8, "<"),
    "layer_noise_vanishing": (1e-3, "<"),
    "cylinder_noise_persistence": (1e-2, ">"),
    "delta_identity": (1e-2, "<"),
}


def parse_complex(v):
    """Accept a number, [re, im], {"re": .., "im": ..} or a Python complex literal."""
    if isinstance(v, (int, float, complex)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, dict) and set(v) <= {"re", "im"}:
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    raise ValidationError(f"cannot read {v!r} as a complex number")


@dataclass
class RunConfig:
    command: str = "verify"
    epsilon: float = 2.25
    length: float = 1.0
    radius: float = 1.0
    k: float = 2.0
    grid_order: int = None
    modes: int = None
    eta_schedule: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    cutoff_factor: float = 40.0
    layer_points: list = field(default_factory=lambda: [0.4, 0.6])
    cylinder_points: list = field(default_factory=lambda: [[0.4, 0.0], [0.6, math.pi / 3]])
    pole_range: list = field(default_factory=lambda: [-10, 10])
    smatrix: dict = field(default_factory=lambda: dict(MATCHED))
    kd: float = math.pi
    beta: float = 0.0
    theta_points: int = 721
    input_state: list = field(default_factory=lambda: [1, 1, 0, 0])
    tolerances: dict = field(default_factory=dict)
    out: str = None

    def validate(self):
        if self.command not in ("layer", "cylinder", "antenna", "verify"):
            raise ValidationError(f"unknown command {self.command!r}")
        if self.grid_order is not None and (int(self.grid_order) != self.grid_order or self.grid_order < 2):
            raise ValidationError("grid order must be an integer >= 2")
        if not self.eta_schedule or any(not (float(e) > 0) for e in self.eta_schedule):
            raise ValidationError("eta schedule must be a nonempty list of positive numbers")
        if not self.cutoff_factor > 0:
            raise ValidationError("cutoff factor must be positive")
        if int(self.theta_points) != self.theta_points or self.theta_points < 2:
            raise ValidationError("theta points must be an integer >= 2")
        for name, tol in self.tolerances.items():
            if name not in SUITE_TOLERANCES and name != "all":
                raise ValidationError(f"unknown tolerance key {name!r}")
            if not float(tol) > 0:
                raise ValidationError(f"tolerance {name!r} must be positive")
        return self


def load_config(path=None, overrides=None):
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValidationError(f"unknown config fields: {', '.join(unknown)}")
    return RunConfig(**data).validate()


def output_dir(cfg, flag=None):
    out = Path(flag or os.environ.get(OUT_ENV) or cfg.out or "qresolvent_out")
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ValidationError(f"output directory {out} is not writable")
    return out


def _tolerance(cfg, name):
    tol, sense = SUITE_TOLERANCES[name]
    if name in cfg.tolerances:
        tol = float(cfg.tolerances[name])
    elif "all" in cfg.tolerances and sense == "<":
        tol = float(cfg.tolerances["all"])
    return tol, sense


def _layer_kernel(lcfg, order):
    grid = gauss_legendre(order, 0.0, lcfg.length)
    kernel = fh.build_kernel(lay.green_free_1d, grid, lcfg.k)
    X, Y = np.meshgrid(grid.nodes, grid.nodes, indexing="ij")
    exact = lay.layer_resolvent_kernel(lcfg, X, Y)
    return kernel, exact


def run_layer(cfg, out):
    lcfg = lay.LayerConfig(float(cfg.epsilon), float(cfg.length), float(cfg.k))
    order = int(cfg.grid_order or 64)
    kernel, exact = _layer_kernel(lcfg, order)
    corrected = fh.resolvent_matrix(kernel, lcfg.nu, method="corrected").entries
    plain = fh.resolvent_matrix(kernel, lcfg.nu).entries
    X, Y = np.meshgrid(kernel.nodes, kernel.nodes, indexing="ij")
    write_csv(out / "layer_kernel.csv", ["x", "xp", "re", "im"], [X, Y, corrected.real, corrected.imag])

    poles = []
    if lcfg.epsilon > 1.0:
        for p in lay.layer_poles(lcfg, *cfg.pole_range):
            poles.append({"n": p.n, "re_k": p.k.real, "im_k": p.k.imag, "residual": p.residual})
    write_json(out / "layer_poles.json", poles)

    x, xp = (float(v) for v in cfg.layer_points)
    g_pos = lay.layer_resolvent_kernel(lcfg, x, xp)
    g_neg = lay.layer_resolvent_kernel(lcfg.with_k(-lcfg.k), x, xp)
    conj_res = abs(g_neg - np.conj(g_pos)) / abs(g_pos)
    noise = []
    for eta in cfg.eta_schedule:
        K = cfg.cutoff_factor / eta
        v = lay.layer_noise_integral(lcfg, x, xp, K, eta)
        ref = lay.reference_scale(K, eta)
        noise.append({"eta": eta, "cutoff": K, "value": v, "reference": ref, "ratio": abs(v) / ref})
    report = {
        "epsilon": lcfg.epsilon,
        "length": lcfg.length,
        "k": lcfg.k,
        "grid_order": order,
        "nystrom_max_rel_error": float(np.max(np.abs(corrected - exact) / np.abs(exact))),
        "plain_nystrom_max_rel_error": float(np.max(np.abs(plain - exact) / np.abs(exact))),
        "conjugation_check": {"residual": conj_res, "status": "PASS" if conj_res < 1e-12 else "FAIL"},
        "points": [x, xp],
        "noise": noise,
    }
    write_json(out / "layer_noise.json", report)
    return report


def run_cylinder(cfg, out):
    ccfg = cyl.CylinderConfig(float(cfg.epsilon), float(cfg.radius), float(cfg.k), cfg.modes)
    N = ccfg.modes
    n = np.arange(-N, N + 1)
    W, den = cyl.wn(n, ccfg, with_denominator=True)
    table = [{"n": int(m), "re": w.real, "im": w.imag, "denominator_magnitude": d} for m, w, d in zip(n, W, den)]
    write_json(out / "cylinder_wn.json", table)

    # the mode sum converges like (rho rho' / a^2)^n, so stay clear of the rim
    order = int(cfg.grid_order or 6)
    g = cyl.polar_grid(0.9 * ccfg.a, order, 2 * order)
    i, j = np.meshgrid(np.arange(g.rho.size), np.arange(g.rho.size), indexing="ij")
    keep = i != j
    i, j = i[keep], j[keep]
    vals = cyl.cylinder_resolvent((g.rho[i], g.phi[i]), (g.rho[j], g.phi[j]), ccfg)
    write_csv(
        out / "cylinder_kernel.csv",
        ["rho", "phi", "rhop", "phip", "re", "im"],
        [g.rho[i], g.phi[i], g.rho[j], g.phi[j], vals.real, vals.imag],
    )

    p, pp = (tuple(float(c) for c in q) for q in cfg.cylinder_points)
    branch = float(np.max(np.abs(cyl.wn(-n, ccfg) + np.conj(cyl.wn(n, ccfg.with_k(-ccfg.k))))))
    sched = cyl.cylinder_noise_schedule(p, pp, ccfg, cfg.eta_schedule, cutoff_factor=cfg.cutoff_factor)
    noise = [
        {"eta": r.eta, "cutoff": r.cutoff, "value": r.value, "error": r.error, "reference": r.reference, "ratio": r.ratio}
        for r in sched
    ]
    report = {
        "epsilon": ccfg.epsilon,
        "radius": ccfg.a,
        "k": ccfg.k,
        "modes": N,
        "branch_relation_residual": branch,
        "points": [list(p), list(pp)],
        "noise": noise,
    }
    write_json(out / "cylinder_noise.json", report)
    return report


def _smatrix(cfg):
    sm = cfg.smatrix
    if not isinstance(sm, dict) or set(sm) != {"r", "t1", "t2", "t3"}:
        raise ValidationError("smatrix needs exactly the fields r, t1, t2, t3")
    return ant.make_smatrix(*(parse_complex(sm[name]) for name in ("r", "t1", "t2", "t3")))


def run_antenna(cfg, out):
    s = _smatrix(cfg)
    occ = [int(v) for v in cfg.input_state]
    if len(occ) != 4:
        raise ValidationError("input state needs four occupations (x1, x2, y1, y2)")
    state = ant.transform_state(s, ant.FockState.basis(occ))
    pat = ant.pattern(ant.emission_state(state), cfg.theta_points, cfg.kd, cfg.beta)
    write_csv(out / "antenna_pattern.csv", ["theta_rad", "g1", "g2"], [pat.theta, pat.g1, pat.g2])
    dump = [{"occupation": list(k), "re": a.real, "im": a.imag} for k, a in state.amplitudes.items()]
    write_json(out / "antenna_state.json", dump)
    C = ant.noise_commutators(s)
    feed = ant.FockState.basis(occ[:2]) if occ[2:] == [0, 0] else None
    report = {
        "commutators": C,
        "expected_diagonal": 1 - abs(s.t2) ** 2 - abs(s.t3) ** 2,
        "expected_off_diagonal": (-s.t2 * np.conj(s.t3) - s.t3 * np.conj(s.t2)).real,
    }
    if feed is not None:
        inten = ant.mean_output_intensity(s, feed)
        report["intensity"] = {"coherent": list(inten.coherent), "noise": inten.noise, "total": list(inten.total)}
    write_json(out / "antenna_noise.json", report)
    return report


def _entry(cfg, name, value, **extra):
    tol, sense = _tolerance(cfg, name)
    ok = value < tol if sense == "<" else value > tol
    if extra.pop("require", True) is False:
        ok = False
    return {"suite": name, "status": "PASS" if ok else "FAIL", "residual": value, "tolerance": tol, "sense": sense, **extra}


def verify_report(cfg):
    """Run every invariant suite and return the report as a list of entries."""
    order = int(cfg.grid_order or 64)
    entries = []
    lcfg = lay.LayerConfig(2.25, 1.0, 2.0)
    kernel = fh.build_kernel(lay.green_free_1d, gauss_legendre(order, 0.0, 1.0), lcfg.k)
    nu = lcfg.nu
    entries.append(_entry(cfg, "commutator_closure", fh.commutator_closure_residual(kernel, nu, relative=True)))
    entries.append(_entry(cfg, "noise_restoration", fh.restoration_residual(kernel, nu)))
    entries.append(_entry(cfg, "hilbert_schmidt", fh.hilbert_schmidt_residual(fh.resolvent_matrix(kernel, nu))))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneracyWarning)
        spectral = fh.eigen_decompose(kernel)
    entries.append(_entry(cfg, "identity_a8", fh.identity_a8_residual(spectral, kernel)))

    entries.append(_entry(cfg, "addition_theorem", cyl.addition_theorem_residual(1.0, ((2.0, 1.0), (3.0, 0.0)), 40)))
    branch = 0.0
    n = np.arange(-10, 11)
    for ka in (1.0, 2.0, 3.0):
        c = cyl.CylinderConfig(2.25, 1.0, ka)
        branch = max(branch, float(np.max(np.abs(cyl.wn(-n, c) + np.conj(cyl.wn(n, c.with_k(-ka)))))))
    entries.append(_entry(cfg, "branch_relation", branch))

    etas = [float(e) for e in cfg.eta_schedule]
    x, xp = 0.4, 0.6
    lratios = []
    for eta in etas:
        K = cfg.cutoff_factor / eta
        lratios.append(abs(lay.layer_noise_integral(lcfg, x, xp, K, eta)) / lay.reference_scale(K, eta))
    monotone = all(b < a for a, b in zip(lratios, lratios[1:]))
    entries.append(_entry(cfg, "layer_noise_vanishing", lratios[-1], ratios=lratios, monotone=monotone, require=monotone))

    ccfg = cyl.CylinderConfig(2.25, 1.0, 2.0)
    sched = cyl.cylinder_noise_schedule((0.4, 0.0), (0.6, math.pi / 3), ccfg, etas, cutoff_factor=cfg.cutoff_factor)
    cratios = [r.ratio for r in sched]
    entries.append(_entry(cfg, "cylinder_noise_persistence", min(cratios), ratios=cratios))

    entries.append(_entry(cfg, "delta_identity", cyl.free_commutator_delta_check(0.1, 400.0)))
    return entries


def run_verify(cfg, out):
    report = verify_report(cfg)
    (out / "verify_report.json").write_bytes(dumps(report).encode("utf-8"))
    return report


RUNNERS = {"layer": run_layer, "cylinder": run_cylinder, "antenna": run_antenna, "verify": run_verify}


def build_parser():
    parser = argparse.ArgumentParser(prog="qresolvent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("layer", "planar layer: resolvent kernel, poles, noise integral"),
        ("cylinder", "dielectric cylinder: reflection weights, kernel, noise integral"),
        ("antenna", "two-element antenna: output state, correlation patterns, noise commutators"),
        ("verify", "run all invariant suites and write a PASS/FAIL report"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help=f"output directory (else ${OUT_ENV}, config, ./qresolvent_out)")
        p.add_argument("--grid-order", type=int, dest="grid_order")
        p.add_argument("--modes", type=int, help="azimuthal mode cutoff")
        p.add_argument("--eta-schedule", dest="eta_schedule", help="comma-separated damping values")
        p.add_argument("--theta-points", type=int, dest="theta_points")
        p.add_argument("--tolerance", type=float, help="override every residual tolerance (verify)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = {
            "command": args.command,
            "grid_order": args.grid_order,
            "modes": args.modes,
            "theta_points": args.theta_points,
        }
        if args.eta_schedule:
            try:
                overrides["eta_schedule"] = [float(v) for v in args.eta_schedule.split(",")]
            except ValueError as exc:
                raise ValidationError(f"bad eta schedule {args.eta_schedule!r}") from exc
        cfg = load_config(args.config, overrides)
        if args.tolerance is not None:
            if not args.tolerance > 0:
                raise ValidationError("tolerance must be positive")
            cfg.tolerances = {**cfg.tolerances, "all": args.tolerance}
        out = output_dir(cfg, args.out)
        RUNNERS[cfg.command](cfg, out)
    except ConvergenceError as exc:
        print(f"qresolvent: not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (ValidationError, DomainError, CapacityError, ResonanceError, SingularResolventError, TypeError) as exc:
        print(f"qresolvent: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"wrote {args.command} output to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
