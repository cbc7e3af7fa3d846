"""Acceptance criteria 1-10; each test prints one PASS/FAIL line."""
import filecmp
import random
import time

import numpy as np
from scipy.stats import unitary_group

from qspec.audit import PendulumEnergyBackend, PendulumSystem, WEYL_HBARS, audit_inf_spectrum, run_convergence
from qspec.cli import main
from qspec.geometry import (
    box_region,
    delzant_check,
    hausdorff,
    hausdorff_brute,
    hausdorff_to_region,
    lattice_fit,
    recover_polytope,
)
from qspec.joint import joint_spectrum, membership_indicator
from qspec.operators import HermitianMatrix, matrix_norm, min_eigenvalue
from qspec.pendulum import PendulumConfig, pendulum_system
from qspec.symbols import SymbolError, parse_symbol
from qspec.toeplitz import Cp1Symbol, moment_normalize, product_system, toeplitz_matrix
from qspec.weyl import CircleSymbol, WeylTruncation, pendulum_symbol, weyl_matrix

U = Cp1Symbol.height()


def test_criterion_1_toeplitz_oracle(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(1, 201):
        t = toeplitz_matrix(U, k).dense()
        want = np.diag((2 * np.arange(k + 1) - k) / (k + 2))
        worst = max(worst, float(np.abs(t - want).max()))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 10
    criterion(1, ok, f"max |T_k(u) - diag((2j-k)/(k+2))| = {worst:.2e} over k=1..200, {dt:.1f}s")
    assert ok


def test_criterion_2_square_formula(criterion):
    t0 = time.perf_counter()
    ks = np.arange(10, 401, 2)
    norms, worst = [], 0.0
    for k in ks:
        t = toeplitz_matrix(U, int(k)).dense()
        t2 = toeplitz_matrix(U * U, int(k)).dense()
        n = matrix_norm(t @ t - t2)
        norms.append(n)
        worst = max(worst, abs(n - 1.0 / (k + 3)))
    slope = np.polyfit(np.log(1.0 / ks), np.log(norms), 1)[0]
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and 0.9 <= slope <= 1.1 and dt < 30
    criterion(2, ok, f"| ||T(u)^2-T(u^2)|| - 1/(k+3) | <= {worst:.2e}, slope {slope:.4f}, {dt:.1f}s")
    assert ok


def test_criterion_3_inf_spectrum(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(1, 321):
        lam = min_eigenvalue(toeplitz_matrix(U, k))
        worst = max(worst, abs(abs(lam + 1.0) - 2.0 / (k + 2)))
    res = audit_inf_spectrum(PendulumEnergyBackend(), None, WEYL_HBARS)
    slope = res.fit.slope
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and 0.7 <= slope <= 1.3 and dt < 60
    criterion(3, ok, f"Toeplitz gap error {worst:.2e}; pendulum ground gap slope {slope:.4f}, {dt:.1f}s")
    assert ok


def test_criterion_4_toric_convergence(criterion):
    t0 = time.perf_counter()
    mesh = 1e-3
    line = box_region([-1.0], [1.0], mesh)
    err1 = 0.0
    for k in range(10, 101):
        d, delta = hausdorff_to_region(joint_spectrum(product_system([U], k)), line)
        err1 = max(err1, abs(d - 2.0 / (k + 2)) - delta)
    square = box_region([-1.0, -1.0], [1.0, 1.0], 1e-2)
    ratio = 0.0
    for k in range(10, 101):
        d, _ = hausdorff_to_region(joint_spectrum(product_system([U, U], k)), square)
        ratio = max(ratio, d * k / 3.0)
    dt = time.perf_counter() - t0
    ok = err1 <= 1e-12 and ratio <= 1.0 and dt < 60
    criterion(4, ok, f"CP1: |d_H - 2/(k+2)| within mesh; (CP1)^2: max d_H/(3/k) = {ratio:.4f}, {dt:.1f}s")
    assert ok


def test_criterion_5_pendulum_convergence(criterion):
    t0 = time.perf_counter()
    rep = run_convergence(PendulumSystem(e_cap=3.0), (0.7, 0.5, 0.3, 0.05, 0.02), with_audits=False)
    dt = time.perf_counter() - t0
    ok = rep.strictly_decreasing and rep.distances[-1] <= 0.1 and dt < 120
    dists = ", ".join(f"{d:.3f}" for d in rep.distances)
    criterion(5, ok, f"windowed d_H = [{dists}] (mesh {rep.deltas[-1]}), {dt:.1f}s")
    assert ok


def test_criterion_6_lattice_theorem(criterion):
    t0 = time.perf_counter()
    worst_res, worst_dev, mults = 0.0, 0.0, set()
    for d in (1, 2):
        for k in range(10, 201, 1 if d == 1 else 10):
            cloud = moment_normalize(joint_spectrum(product_system([U] * d, k)))
            mults |= set(cloud.mult.tolist())
            g = lattice_fit(cloud, k)
            worst_res = max(worst_res, g.residual)
            worst_dev = max(worst_dev, g.deviation * k / 3.0)
    dt = time.perf_counter() - t0
    ok = worst_res <= 1e-10 and worst_dev <= 1.0 and mults == {1} and dt < 60
    criterion(6, ok, f"residual <= {worst_res:.2e}, max ||g-Id||/(3/k) = {worst_dev:.3f}, "
                     f"multiplicities {sorted(mults)}, {dt:.1f}s")
    assert ok


def test_criterion_7_recovery(criterion):
    t0 = time.perf_counter()
    k = 100
    cloud = moment_normalize(joint_spectrum(product_system([U, U], k)))
    poly = recover_polytope(cloud, k)
    want = 2 * np.pi * np.array([[0, 0], [1, 0], [1, 1], [0, 1]])
    err = float(np.abs(poly.vertices - want).max()) if poly.vertices.shape == want.shape else np.inf
    rep = delzant_check(poly)
    dt = time.perf_counter() - t0
    ok = err <= 3.0 / k and rep.passed and dt < 30
    criterion(7, ok, f"vertex error {err:.2e} (bound {3 / k}), rational={rep.rational} simple={rep.simple} "
                     f"smooth={rep.smooth}, {dt:.1f}s")
    assert ok


def _sq_dist(cloud_pts, c):
    return float(((cloud_pts - c) ** 2).sum(axis=1).min())


def test_criterion_8_membership(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    families = []
    # dense Toeplitz pair: T(u), T(u^2) commute (both diagonal in the weight basis)
    k = 12
    pair = [toeplitz_matrix(U, k), toeplitz_matrix(U * U, k)]
    families.append(("toeplitz dense", pair, 2.0))
    families.append(("toeplitz (CP1)^2", product_system([U, U], 20), 2.0))
    f = pendulum_symbol((-2.0, 2.0))
    families.append(("weyl circle", [weyl_matrix(f, WeylTruncation.covering(f, 0.1))], 6.0))
    families.append(("pendulum", pendulum_system(PendulumConfig(0.25, 2.0)), 4.0))
    worst = 0.0
    n_each = 250
    for _, ops, box in families:
        pts = joint_spectrum(ops).points
        probes = rng.uniform(-box, box, size=(n_each, pts.shape[1]))
        for c in probes:
            got = membership_indicator(ops, c)
            want = _sq_dist(pts, c)
            scale = 1.0 + float(np.max((pts ** 2).sum(axis=1))) + float(c @ c)
            worst = max(worst, abs(got - want) / scale)
    probe = membership_indicator(pendulum_system(PendulumConfig(0.05, 3.0)), [0.0, -2.0])
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and probe >= 0.81 and dt < 60
    criterion(8, ok, f"{n_each * len(families)} probes, max |phi_c - dist^2|/scale = {worst:.2e}; "
                     f"pendulum phi at (0,-2) = {probe:.4f}, {dt:.1f}s")
    assert ok


def _fuzz_text(rnd):
    atoms = ["u", "phi", "x", "xi", "1", "2.5", "0", "1e3", ".5", "cos", "sin", "exp", "sqrt", "abs",
             "(", ")", "+", "-", "*", "/", "^", " ", ",", "@", "é", "1e", "..", "foo"]
    return "".join(rnd.choice(atoms) for _ in range(rnd.randint(0, 12)))


def test_criterion_9_property_suites(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)

    # Hausdorff metric axioms on random triples
    metric_ok = True
    for _ in range(1000):
        a, b, c = (rng.normal(size=(rng.integers(1, 15), 2)) for _ in range(3))
        ab, bc, ac = hausdorff(a, b), hausdorff(b, c), hausdorff(a, c)
        metric_ok &= hausdorff(a, a) == 0.0 and ab == hausdorff(b, a)
        metric_ok &= ac <= ab + bc + 1e-12 and abs(ab - hausdorff_brute(a, b)) <= 1e-12

    # joint spectrum against a hand-built commuting pair
    joint_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        a = rng.integers(-2, 3, size=n).astype(float)
        b = rng.integers(-2, 3, size=n).astype(float)
        q = unitary_group.rvs(n, random_state=rng) if n > 1 else np.eye(1)
        ops = [HermitianMatrix(q @ np.diag(v) @ q.conj().T) for v in (a, b)]
        cloud = joint_spectrum(ops)
        keys, counts = np.unique(np.column_stack([a, b]), axis=0, return_counts=True)
        got = sorted((tuple(np.round(p, 6)), int(m)) for p, m in zip(cloud.points, cloud.mult))
        want = sorted((tuple(p), int(m)) for p, m in zip(keys, counts))
        joint_ok &= got == want

    # parser totality: a tree or a SymbolError, never anything else
    rnd = random.Random(9)
    fuzz_ok, n_fuzz = True, 100_000
    for _ in range(n_fuzz):
        try:
            parse_symbol(_fuzz_text(rnd), None)
        except SymbolError:
            pass
        except Exception:  # noqa: BLE001
            fuzz_ok = False
            break

    # Weyl midpoint signature: xi*cos(x) has entries (1/2)*hbar*(m + n/2) at (m+n, m)
    hbar = 0.1
    f = CircleSymbol.xi_power(1, -3.0, 3.0) * CircleSymbol.cos_x()
    tr = WeylTruncation.covering(f, hbar)
    mat = weyl_matrix(f, tr).entries.toarray()
    mid_ok = True
    for m in range(-20, 21):
        for n in (1, -1):
            mid_ok &= mat[m + n + tr.m_max, m + tr.m_max] == 0.5 * (hbar * (m + 0.5 * n))

    dt = time.perf_counter() - t0
    ok = bool(metric_ok and joint_ok and fuzz_ok and mid_ok) and dt < 120
    criterion(9, ok, f"metric={metric_ok} joint={joint_ok} parser({n_fuzz})={fuzz_ok} "
                     f"midpoint={mid_ok}, {dt:.1f}s")
    assert ok


def test_criterion_10_determinism(criterion, tmp_path):
    argvs = [
        ["converge", "--backend", "toeplitz-cp1", "--k", "10,20,40,80"],
        ["converge", "--backend", "pendulum", "--hbar", "0.7,0.5,0.3,0.1"],
        ["converge", "--backend", "weyl-circle", "--hbar", "0.2,0.1,0.05", "--skip-audits"],
    ]
    same = True
    for i, argv in enumerate(argvs):
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / rep
            d.mkdir(exist_ok=True)
            assert main([*argv, "--out", str(d / f"run{i}")]) == 0
            outs.append(d / f"run{i}")
        for ext in (".json", ".csv", ".svg"):
            a, b = (str(o) + ext for o in outs)
            same &= filecmp.cmp(a, b, shallow=False)
    criterion(10, same, f"{len(argvs)} converge configs run twice: JSON/CSV/SVG byte-identical = {same}")
    assert same
