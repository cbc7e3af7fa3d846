import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import lpmv

from qspec.geometry import hausdorff_to_region, one_sided_to_region
from qspec.pendulum import (
    PendulumConfig,
    classical_boundary,
    classical_region,
    ground_energy,
    j_max,
    joint_spectrum_pendulum,
    l_max_for,
    normalize_energy,
    sector_matrix,
    sector_spectra,
    z_coefficients,
)


def _pbar(l, m, x):
    norm = math.sqrt((2 * l + 1) / 2 * math.factorial(l - m) / math.factorial(l + m))
    return norm * lpmv(m, l, x)


def test_config_validation():
    with pytest.raises(ValueError):
        PendulumConfig(0.0)
    with pytest.raises(ValueError):
        PendulumConfig(1.5)
    with pytest.raises(ValueError):
        PendulumConfig(0.5, e_cap=-1.0)
    with pytest.raises(ValueError):
        PendulumConfig(0.5, shift=0.5)


def test_z_coefficient_gaunt_oracle():
    assert z_coefficients(0, 1)[0] == pytest.approx(1 / math.sqrt(3), abs=1e-15)
    for l, m in [(0, 0), (1, 1), (3, 2), (6, 0), (5, 4)]:
        want = quad(lambda x: x * _pbar(l, m, x) * _pbar(l + 1, m, x), -1, 1, epsabs=1e-14)[0]
        assert z_coefficients(m, l + 1)[-1] == pytest.approx(want, abs=1e-12)


def test_sector_matrix_entries():
    cfg = PendulumConfig(0.5)
    t = sector_matrix(0, cfg, l_max=4)
    assert t.diag[2] == 0.75
    assert t.n == 5
    t3 = sector_matrix(-3, cfg, l_max=6)
    assert t3.n == 4 and t3.diag[0] == 0.125 * 12
    with pytest.raises(ValueError):
        sector_matrix(7, cfg, l_max=6)


def test_l_max_rule():
    cfg = PendulumConfig(0.1, 3.0)
    l = l_max_for(cfg)
    assert 0.5 * 0.01 * l * (l + 1) >= 4 * 5.0
    assert 0.5 * 0.01 * (l - 1) * l < 4 * 5.0


def test_classical_boundary_examples():
    assert classical_boundary(0.0) == -1.0
    js = np.linspace(0.05, 2.0, 40)
    h = np.array([classical_boundary(j) for j in js])
    assert np.all(np.diff(h) > 0)
    # grid oracle over the polar angle
    theta = np.linspace(1e-4, math.pi - 1e-4, 400001)
    for j in (0.1, 0.7, 1.5):
        grid = (j * j / (2 * np.sin(theta) ** 2) + np.cos(theta)).min()
        assert classical_boundary(j) == pytest.approx(grid, abs=1e-9)
    assert classical_boundary(-0.7) == classical_boundary(0.7)
    assert classical_boundary(0.0) < 1.0


def test_j_max_inverts_the_boundary():
    for e in (-0.5, 0.0, 3.0):
        assert classical_boundary(j_max(e)) == pytest.approx(e, abs=1e-10)
    assert j_max(-1.0) == 0.0


def test_unreachable_sectors_are_empty():
    cfg = PendulumConfig(0.05, 1.0)
    top = int(j_max(1.0) / 0.05)
    spectra = sector_spectra(cfg)
    assert max(abs(s.m) for s in spectra) <= top
    l_max = l_max_for(cfg)
    far = sector_matrix(top + 5, cfg, l_max)
    assert np.linalg.eigvalsh(far.dense()).min() > 1.0


def test_reflection_symmetry_is_exact():
    cloud = joint_spectrum_pendulum(PendulumConfig(0.3, 3.0))
    pts = {tuple(p) for p in cloud.points}
    assert pts == {(-a, b) if a != 0 else (a, b) for a, b in pts}
    assert set(cloud.mult.tolist()) == {1}


def test_cloud_sorted_by_j_then_energy():
    pts = joint_spectrum_pendulum(PendulumConfig(0.5, 3.0)).points
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    assert np.array_equal(order, np.arange(len(pts)))


def test_truncation_stability():
    cfg = PendulumConfig(0.1, 3.0)
    wide = PendulumConfig(0.1, 3.0, l_max_scale=1.5)
    a = joint_spectrum_pendulum(cfg).points
    b = joint_spectrum_pendulum(wide).points
    assert a.shape == b.shape
    assert np.abs(a - b).max() < 1e-10


def test_ground_energy_rate():
    hb = np.array([1 / 20, 1 / 40, 1 / 80, 1 / 160])
    gaps = np.array([ground_energy(h) + 1.0 for h in hb])
    assert np.all(gaps > 0)
    slope = np.polyfit(np.log(hb), np.log(gaps), 1)[0]
    assert 0.8 <= slope <= 1.2


def test_normalized_cloud():
    cfg = PendulumConfig(0.3, 3.0, normalized=True, shift=1.0)
    raw = joint_spectrum_pendulum(PendulumConfig(0.3, 3.0)).points
    pts = joint_spectrum_pendulum(cfg).points
    np.testing.assert_allclose(pts[:, 1], np.sqrt(np.maximum(0, raw[:, 1] + 1)))
    assert normalize_energy(-3.0) == 0.0


def test_region_examples():
    cfg = PendulumConfig(0.05, 3.0)
    reg = classical_region(cfg, 0.01)
    assert reg.contains(np.array([[0.0, -1.0]]))[0]
    assert not reg.contains(np.array([[0.0, -1.01]]))[0]
    assert one_sided_to_region(np.array([[0.0, -2.0]]), reg) >= 1.0 - 1e-12
    assert one_sided_to_region(np.array([[0.0, -1.0]]), reg) == 0.0
    s = reg.samples
    mirrored = s * [-1.0, 1.0]
    assert one_sided_to_region(mirrored, reg) <= 1e-9
    steps = np.linalg.norm(np.diff(reg.boundary[0], axis=0), axis=1)
    assert steps.max() <= reg.mesh


def test_normalized_region_contains_normalized_boundary_point():
    cfg = PendulumConfig(0.1, 3.0, normalized=True)
    reg = classical_region(cfg, 0.01)
    h = classical_boundary(0.5)
    assert reg.contains(np.array([[0.5, math.sqrt(h + 1) + 1e-9]]))[0]
    assert not reg.contains(np.array([[0.5, math.sqrt(h + 1) - 1e-3]]))[0]


@pytest.mark.parametrize("hbar", [0.1, 0.05])
def test_distance_to_region_within_five_hbar(hbar):
    cfg = PendulumConfig(hbar, 3.0)
    cloud = joint_spectrum_pendulum(cfg)
    reg = classical_region(cfg)
    d, _ = hausdorff_to_region(cloud, reg)
    assert d <= 5 * hbar
    assert one_sided_to_region(cloud, reg) <= 5 * hbar
