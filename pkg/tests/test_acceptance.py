"""Acceptance criteria 1-11, one test each.

Every test prints a single ``criterion N: PASS|FAIL ...`` line (visible with
``pytest -s`` or in the captured output of a failure) and asserts both the
numerical condition and the runtime budget.
"""

import math
import time
import warnings

import numpy as np
import pytest

from qresolvent import antenna as ant
from qresolvent import cli
from qresolvent import cylinder2d as cyl
from qresolvent import fredholm as fh
from qresolvent import layer1d as lay
from qresolvent.errors import DegeneracyWarning
from qresolvent.specfun import gauss_legendre

LAYER = lay.LayerConfig(2.25, 1.0, 2.0)
CYL = cyl.CylinderConfig(2.25, 1.0, 2.0)
SCHEDULE = (0.2, 0.1, 0.05)
SQ2 = math.sqrt(2)


def layer_kernel(order):
    return fh.build_kernel(lay.green_free_1d, gauss_legendre(order, 0.0, 1.0), LAYER.k)


def report(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_criterion_01_commutator_closure():
    K = layer_kernel(64)
    with Timer() as t:
        r = fh.commutator_closure_residual(K, LAYER.nu, relative=True)
    assert report(1, r < 1e-10 and t.elapsed < 1.0, f"residual={r:.3e} time={t.elapsed:.3f}s")


def test_criterion_02_noise_restoration():
    K = layer_kernel(64)
    with Timer() as t:
        r = fh.restoration_residual(K, LAYER.nu)
    assert report(2, r < 1e-14 and t.elapsed < 0.1, f"residual={r:.3e} time={t.elapsed:.3f}s")


def test_criterion_03_layer_closed_form():
    with Timer() as t:
        errs = []
        for order in (32, 64, 128):
            K = layer_kernel(order)
            X, Y = np.meshgrid(K.nodes, K.nodes, indexing="ij")
            exact = lay.layer_resolvent_kernel(LAYER, X, Y)
            gamma = fh.resolvent_matrix(K, LAYER.nu, method="corrected").entries
            errs.append(float(np.max(np.abs(gamma - exact) / np.abs(exact))))
    ok = errs[2] < 1e-6 and errs[0] > errs[1] > errs[2] and t.elapsed < 5.0
    assert report(3, ok, f"errors={[f'{e:.2e}' for e in errs]} time={t.elapsed:.2f}s")


def test_criterion_04_layer_poles():
    cfg = lay.LayerConfig(4.0, 1.0, 1.0)
    with Timer() as t:
        poles = lay.layer_poles(cfg, -10, 10)
    res = max(p.residual for p in poles)
    dev = float(np.max(np.abs(poles.k.imag - math.log(1 / 3) / 2)))
    ok = len(poles) == 21 and res < 1e-12 and dev < 1e-10 and np.all(poles.k.imag < 0) and t.elapsed < 1.0
    assert report(4, ok, f"count={len(poles)} residual={res:.1e} im_dev={dev:.1e} time={t.elapsed:.3f}s")


def test_criterion_05_layer_noise_vanishing():
    with Timer() as t:
        ratios = []
        for eta in SCHEDULE:
            K = 40.0 / eta
            ratios.append(abs(lay.layer_noise_integral(LAYER, 0.4, 0.6, K, eta)) / lay.reference_scale(K, eta))
    ok = ratios[-1] < 1e-3 and ratios[0] > ratios[1] > ratios[2] and t.elapsed < 30.0
    assert report(5, ok, f"ratios={[f'{r:.2e}' for r in ratios]} time={t.elapsed:.2f}s")


def test_criterion_06_cylinder_noise_persistence():
    with Timer() as t:
        sched = cyl.cylinder_noise_schedule((0.4, 0.0), (0.6, math.pi / 3), CYL, SCHEDULE, cutoff_factor=40.0)
    ratios = [r.ratio for r in sched]
    ok = min(ratios) > 1e-2 and t.elapsed < 60.0
    assert report(6, ok, f"ratios={[f'{r:.2e}' for r in ratios]} time={t.elapsed:.2f}s")


def test_criterion_07_branch_relations():
    n = np.arange(-10, 11)
    with Timer() as t:
        worst = 0.0
        for ka in (1.0, 2.0, 3.0):
            c = cyl.CylinderConfig(2.25, 1.0, ka)
            worst = max(worst, float(np.max(np.abs(cyl.wn(-n, c) + np.conj(cyl.wn(n, c.with_k(-ka)))))))
            p, q = (0.4, 0.0), (0.6, math.pi / 3)
            worst = max(worst, abs(np.conj(cyl.delta_g(p, q, c)) - cyl.delta_g(p, q, c.with_k(-ka))))
    assert report(7, worst < 1e-8 and t.elapsed < 5.0, f"residual={worst:.2e} time={t.elapsed:.2f}s")


def test_criterion_08_mode_solution_consistency():
    with Timer() as t:
        g = cyl.polar_grid(1.0, 48, 96)
        x0, y0 = 0.3 * math.cos(0.4), 0.3 * math.sin(0.4)
        u0 = np.exp(-((g.x - x0) ** 2 + (g.y - y0) ** 2) / (2 * 0.1**2))
        co = cyl.mode_coefficients(CYL, g, u0)
        rho = np.array([0.123, 0.457, 0.81])
        phi = np.array([0.1, 2.03, 4.1])
        a = cyl.field_from_modes(CYL, co, g, u0, rho, phi)
        b = cyl.field_from_kernel(CYL, g, u0, rho, phi)
        field = float(np.max(np.abs(a - b) / np.abs(a)))
        val, der = cyl.boundary_continuity_residual(CYL.with_k(2.0, modes=CYL.min_modes + 8), g, u0)
    ok = field < 1e-6 and val < 1e-8 and der < 1e-8 and t.elapsed < 30.0
    assert report(8, ok, f"field={field:.2e} value={val:.2e} derivative={der:.2e} time={t.elapsed:.2f}s")


def test_criterion_09_addition_and_delta():
    with Timer() as t:
        add = cyl.addition_theorem_residual(1.0, ((2.0, 1.0), (3.0, 0.0)), 40)
        delta = cyl.free_commutator_delta_check(0.1, 400.0)
    ok = add < 1e-12 and delta < 1e-2 and t.elapsed < 10.0
    assert report(9, ok, f"addition={add:.2e} delta={delta:.2e} time={t.elapsed:.2f}s")


def test_criterion_10_antenna_values():
    theta = np.linspace(0, np.pi, 721)
    with Timer() as t:
        s = ant.make_smatrix(0, 0, 1 / SQ2, -1j / SQ2)
        y = ant.emission_state(ant.transform_state(s, ant.FockState.basis((1, 1, 0, 0))))
        target = ant.FockState(2, {(2, 0): 1j / SQ2, (0, 2): 1j / SQ2})
        overlap = abs(abs(y.inner(target)) - 1)
        pat_dev = 0.0
        for kd, beta in ((math.pi, 0.0), (4 * math.pi, 0.0), (2.0, math.pi / 3)):
            p = ant.pattern(y, 721, kd, beta)
            g2 = 4 * np.sin(theta) ** 4 * np.cos(0.5 * (kd * np.cos(theta) + beta)) ** 2
            pat_dev = max(pat_dev, np.max(np.abs(p.g1 - 2 * np.sin(theta) ** 2)), np.max(np.abs(p.g2 - g2)))

        rng = np.random.default_rng(2024)
        comm_dev = 0.0
        for _ in range(100):
            r = ant.random_smatrix(rng)
            C = ant.noise_commutators(r)
            diag = 1 - abs(r.t2) ** 2 - abs(r.t3) ** 2
            off = -r.t2 * np.conj(r.t3) - r.t3 * np.conj(r.t2)
            comm_dev = max(comm_dev, np.max(np.abs(C - np.array([[diag, off.real], [off.real, diag]]))), abs(off.imag))

        coef_dev = 0.0
        for a, b in ((0.3, 1.1), (2.0, -0.4)):
            u, v = np.exp(1j * a) / 2, np.exp(1j * b) / 2
            for r in (ant.make_smatrix(u, -u, v, v), ant.make_smatrix(u, u, v, -v)):
                out = ant.transform_state(r, ant.FockState.basis((1, 1, 0, 0)))
                c = np.conj
                expected = {
                    (2, 0, 0, 0): c(SQ2 * r.r * r.t1),
                    (0, 2, 0, 0): c(SQ2 * r.r * r.t1),
                    (1, 1, 0, 0): c(r.r**2 + r.t1**2),
                    (0, 0, 2, 0): c(SQ2 * r.t2 * r.t3),
                    (0, 0, 0, 2): c(SQ2 * r.t2 * r.t3),
                    (0, 0, 1, 1): c(r.t2**2 + r.t3**2),
                }
                keys = set(out.amplitudes) | set(expected)
                coef_dev = max(coef_dev, max(abs(out.amplitude(k) - expected.get(k, 0)) for k in keys))
    ok = max(overlap, pat_dev, comm_dev, coef_dev) < 1e-12 and t.elapsed < 5.0
    detail = f"phase={overlap:.1e} pattern={pat_dev:.1e} commutators={comm_dev:.1e} coefficients={coef_dev:.1e}"
    assert report(10, ok, f"{detail} time={t.elapsed:.2f}s")


def test_criterion_11_verify_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    with Timer() as t, warnings.catch_warnings():
        warnings.simplefilter("error", DegeneracyWarning)
        codes = [cli.main(["verify", "--out", str(d)]) for d in (first, second)]
    a = (first / "verify_report.json").read_bytes()
    b = (second / "verify_report.json").read_bytes()
    ok = codes == [0, 0] and a == b and t.elapsed < 150.0
    assert report(11, ok, f"exit={codes} identical={a == b} bytes={len(a)} time={t.elapsed:.2f}s")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
