import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qspec.geometry import (
    LatticeFitError,
    PolytopeModel,
    box_region,
    convex_hull_2d,
    delzant_check,
    hausdorff,
    hausdorff_brute,
    hausdorff_to_region,
    lattice_fit,
    limit_set_estimate,
    recover_polytope,
)
from qspec.joint import JointSpectrumCloud, joint_spectrum
from qspec.toeplitz import Cp1Symbol, moment_normalize, product_system, toeplitz_z_closed_form

HEXAGON = [(0, 0), (2, 0), (3, 1), (3, 3), (1, 3), (0, 2)]


def _cloud(points, hbar=0.1):
    points = np.asarray(points, dtype=float)
    return JointSpectrumCloud(points, np.ones(len(points), dtype=int), hbar)


def _lattice_points_in(poly):
    """Integer points of a convex counterclockwise lattice polygon."""
    poly = np.asarray(poly)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    xs, ys = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    cand = np.stack([xs.ravel(), ys.ravel()], axis=1)
    keep = np.ones(len(cand), dtype=bool)
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        keep &= (b[0] - a[0]) * (cand[:, 1] - a[1]) - (b[1] - a[1]) * (cand[:, 0] - a[0]) >= 0
    return cand[keep]


# -- Hausdorff ------------------------------------------------------------------


def test_hausdorff_examples():
    assert hausdorff([[0.0]], [[0.0]]) == 0.0
    assert hausdorff([[0.0]], [[0.0], [1.0]]) == 1.0
    assert hausdorff([[0.0, 0.0]], [[3.0, 4.0]]) == 5.0
    with pytest.raises(ValueError):
        hausdorff(np.zeros((0, 1)), [[0.0]])


@pytest.mark.parametrize("k", [10, 40])
def test_height_spectrum_against_dense_sample(k):
    spec = np.diag(toeplitz_z_closed_form(k).dense()).real
    sample = np.linspace(-1, 1, 101)
    # the outermost gap is 1 - k/(k+2) = 2/(k+2), which dominates the sample spacing
    assert hausdorff(spec, sample) == pytest.approx(2 / (k + 2), abs=1e-12)


pts2 = arrays(np.float64, st.tuples(st.integers(1, 12), st.just(2)),
              elements=st.floats(-50, 50, allow_nan=False))


@settings(max_examples=200, deadline=None)
@given(pts2, pts2, pts2)
def test_metric_axioms_and_brute_force(a, b, c):
    ab, ba = hausdorff(a, b), hausdorff(b, a)
    assert ab == ba
    assert ab >= 0 and hausdorff(a, a) == 0.0
    assert ab <= hausdorff(a, c) + hausdorff(c, b) + 1e-9
    assert ab == pytest.approx(hausdorff_brute(a, b), abs=1e-9)


def test_distance_to_region_examples():
    reg = box_region([0.0, 0.0], [1.0, 1.0], 0.01)
    corners = reg.boundary[0]
    d, mesh = hausdorff_to_region(corners, reg)
    assert mesh == 0.01
    # region points far from the corners dominate: the centre is sqrt(0.5) away
    assert d == pytest.approx(np.sqrt(0.5), abs=mesh)
    d, _ = hausdorff_to_region(reg.samples, reg)
    assert d <= mesh
    far = np.vstack([reg.samples, [[4.0, 1.0]]])
    d, _ = hausdorff_to_region(far, reg)
    assert abs(d - 3.0) <= mesh


def test_box_region_in_one_and_three_dimensions():
    r1 = box_region([0.0], [2.0], 0.1)
    assert r1.samples.shape[1] == 1 and r1.contains([[1.0]])[0]
    r3 = box_region([0.0] * 3, [1.0] * 3, 0.25)
    assert r3.interior.shape == (125, 3)


# -- limit sets -----------------------------------------------------------------


def test_limit_set_of_constant_sequence():
    clouds = [_cloud([[0.0, 0.0], [1.0, 1.0]], h) for h in (0.4, 0.2, 0.1)]
    est = limit_set_estimate(clouds, 0.1)
    assert hausdorff(est, [[0.0, 0.0], [1.0, 1.0]]) <= 0.1 + 1e-12


def test_limit_set_of_height_spectra_fills_the_interval():
    clouds = [joint_spectrum(product_system([Cp1Symbol.height()], k)) for k in (20, 50, 100, 200)]
    est = limit_set_estimate(clouds, 0.05, spacing=0.01)
    assert est[:, 0].min() <= -0.95 and est[:, 0].max() >= 0.95
    assert np.all(np.abs(est[:, 0]) <= 1.05 + 1e-12)
    assert np.diff(np.sort(est[:, 0])).max() <= 0.01 + 1e-12


def test_limit_set_of_alternating_sequence():
    clouds = [_cloud([[float(i % 2)]], 1.0 / (i + 1)) for i in range(8)]
    est = limit_set_estimate(clouds, 0.05, window=2)
    assert np.any(np.abs(est[:, 0]) < 1e-9) and np.any(np.abs(est[:, 0] - 1) < 1e-9)
    strict = limit_set_estimate(clouds, 0.05, window=1)
    assert len(strict) == 0


def test_limit_set_guards():
    with pytest.raises(ValueError):
        limit_set_estimate([_cloud([[0.0]], 0.1)] * 2, 0.1)
    with pytest.raises(ValueError):
        limit_set_estimate([_cloud([[0.0]], h) for h in (0.1, 0.2, 0.05)], 0.1)


# -- hulls ------------------------------------------------------------------------


def test_hull_square_with_interior():
    pts = [[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5], [0.5, 0.0]]
    hull = convex_hull_2d(pts)
    assert hull.vertices.tolist() == [[0, 0], [1, 0], [1, 1], [0, 1]]
    assert not hull.degenerate


def test_hull_collinear_and_one_dimensional():
    hull = convex_hull_2d([[0, 0], [1, 1], [2, 2]])
    assert hull.degenerate and hull.vertices.tolist() == [[0, 0], [2, 2]]
    seg = convex_hull_2d([[3.0], [-1.0], [0.5]])
    assert seg.vertices[:, 0].tolist() == [-1.0, 3.0] and not seg.degenerate


def test_hull_of_product_spectrum_corners():
    k = 10
    hull = convex_hull_2d(joint_spectrum(product_system([Cp1Symbol.height()] * 2, k)))
    c = k / (k + 2)
    np.testing.assert_allclose(hull.vertices, [[-c, -c], [c, -c], [c, c], [-c, c]], atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_hull_invariant_under_permutation_and_interior_points(seed):
    rng = np.random.default_rng(seed)
    pts = rng.integers(-20, 21, size=(15, 2)).astype(float)
    base = convex_hull_2d(pts)
    shuffled = convex_hull_2d(rng.permutation(pts))
    assert np.array_equal(base.vertices, shuffled.vertices)
    if not base.degenerate:
        w = rng.dirichlet(np.ones(len(base.vertices)), size=5)
        assert np.array_equal(convex_hull_2d(np.vstack([pts, w @ base.vertices])).vertices, base.vertices)


# -- lattice fit and recovery ----------------------------------------------------


def test_lattice_fit_on_height_spectrum():
    k = 30
    cloud = moment_normalize(joint_spectrum(product_system([Cp1Symbol.height()], k)))
    g = lattice_fit(cloud, k)
    assert g.residual <= 1e-9
    # the spectrum is spaced 2π/(k+2) against the 2π/k lattice
    assert g.linear[0, 0] == pytest.approx(k / (k + 2), abs=1e-12)
    np.testing.assert_allclose(g(g.origin + g.spacing * g.indices), cloud.points, atol=1e-12)
    np.testing.assert_allclose(g.inverse(g(cloud.points)), cloud.points, atol=1e-12)


def test_lattice_fit_rejects_jitter_and_multiplicity():
    k = 20
    s = 2 * np.pi / k
    grid = _lattice_points_in(HEXAGON) * s
    rng = np.random.default_rng(0)
    jittered = grid + rng.choice([-0.3, 0.3], size=grid.shape) * s
    with pytest.raises(LatticeFitError):
        lattice_fit(_cloud(jittered), k)
    doubled = JointSpectrumCloud(grid, np.full(len(grid), 2), 0.1)
    with pytest.raises(LatticeFitError):
        lattice_fit(doubled, k)
    with pytest.raises(LatticeFitError):
        lattice_fit(_cloud(grid[:2]), k)


@pytest.mark.parametrize("k", [10, 50])
def test_recover_synthetic_hexagon(k):
    s = 2 * np.pi / k
    verts = np.array(HEXAGON) * 5
    cloud = _cloud(_lattice_points_in(verts) * s + 0.7)
    poly = recover_polytope(cloud, k)
    assert poly.snapped
    rel = poly.lattice_vertices - poly.lattice_vertices[0]
    assert rel.tolist() == (verts - verts[0]).tolist()
    np.testing.assert_allclose(poly.vertices, verts * s + 0.7, atol=1e-12)
    assert delzant_check(poly).passed


def test_recover_segment():
    k = 12
    poly = recover_polytope(moment_normalize(joint_spectrum(product_system([Cp1Symbol.height()], k))), k)
    assert poly.snapped and len(poly.vertices) == 2
    assert delzant_check(poly).passed


# -- Delzant ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "verts, ok",
    [
        ([(0, 0), (1, 0), (1, 1), (0, 1)], True),
        ([(0, 0), (1, 0), (0, 1)], True),
        ([(0, 0), (2, 0), (0, 1)], False),
        (HEXAGON, True),
        ([(0, 0), (1, 0), (0, 2)], False),
        ([(0, 0), (2, 0), (1, 2)], False),
    ],
)
def test_delzant_examples(verts, ok):
    rep = delzant_check(verts)
    assert rep.passed is ok
    assert len(rep.vertices) == len(verts)


def test_delzant_degenerate_inputs():
    with pytest.raises(ValueError):
        delzant_check([(0, 0), (1, 1)])
    with pytest.raises(ValueError):
        delzant_check([(0, 0), (1, 1), (2, 2)])
    assert delzant_check([(0,), (4,)]).passed
    assert not delzant_check([(1,), (1,)]).passed
    assert not delzant_check([(0, 0), (0.5, 0), (0, 1)]).passed
    assert not delzant_check(PolytopeModel(np.zeros((3, 2)))).passed
