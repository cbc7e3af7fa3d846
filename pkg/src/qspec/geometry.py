"""Point-set and polyhedral geometry for comparing joint and classical spectra."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

__all__ = [
    "AffineCorrection",
    "ClassicalSpectrumModel",
    "DelzantReport",
    "LatticeFitError",
    "PolytopeModel",
    "box_region",
    "convex_hull_2d",
    "delzant_check",
    "hausdorff",
    "hausdorff_brute",
    "hausdorff_to_region",
    "lattice_fit",
    "limit_set_estimate",
    "recover_polytope",
]


class LatticeFitError(ValueError):
    """The cloud is not an affine image of a lattice (or violates the fit's preconditions)."""


def _as_points(a) -> np.ndarray:
    if hasattr(a, "points"):
        a = a.points
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


# -- Hausdorff distance --------------------------------------------------------


def directed_hausdorff(a, b) -> float:
    """``sup_{x∈a} dist(x, b)`` using an exact k-d tree nearest-neighbour query."""
    a, b = _as_points(a), _as_points(b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("Hausdorff distance needs non-empty point sets")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    d, _ = cKDTree(b).query(a, k=1)
    return float(d.max())


def hausdorff(a, b) -> float:
    """Hausdorff distance between two finite point sets."""
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def hausdorff_brute(a, b) -> float:
    """O(|a|·|b|) reference implementation."""
    a, b = _as_points(a), _as_points(b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("Hausdorff distance needs non-empty point sets")
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# -- classical spectra ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClassicalSpectrumModel:
    """Discretized classical spectrum.

    ``interior`` together with the ``boundary`` polylines samples the region
    so that every point of it lies within ``mesh`` of a sample. ``contains``
    is an exact membership predicate when available.
    """

    kind: str
    boundary: list
    interior: np.ndarray
    window: tuple
    mesh: float
    contains: Optional[Callable] = None

    def __post_init__(self):
        if not self.mesh > 0:
            raise ValueError("mesh must be positive")

    @property
    def samples(self) -> np.ndarray:
        parts = [np.atleast_2d(b) for b in self.boundary if len(b)]
        if len(self.interior):
            parts.append(np.atleast_2d(self.interior))
        return np.concatenate(parts)


def box_region(lo, hi, mesh: float) -> ClassicalSpectrumModel:
    """Axis-aligned box ``[lo, hi]`` (any dimension) sampled on a grid of spacing ≤ mesh."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    axes = [np.linspace(l, h, max(2, int(math.ceil((h - l) / mesh)) + 1)) for l, h in zip(lo, hi)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    if lo.size == 1:
        boundary = [np.array([[lo[0]], [hi[0]]])]
        kind = "polytope"
    elif lo.size == 2:
        corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]], [lo[0], lo[1]]])
        boundary = [corners]
        kind = "polytope"
    else:
        boundary = []
        kind = "polytope"

    def contains(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.all((pts >= lo - 1e-12) & (pts <= hi + 1e-12), axis=1)

    return ClassicalSpectrumModel(kind, boundary, grid, tuple(zip(lo, hi)), float(mesh), contains)


def hausdorff_to_region(a, region: ClassicalSpectrumModel):
    """Hausdorff distance from a point set to a discretized region, as ``(value, δ)``.

    Points of ``a`` inside the region contribute zero in the ``a → region``
    direction; everything else is measured against the samples, whose spacing
    ``δ = region.mesh`` is the reported uncertainty.
    """
    a = _as_points(a)
    samples = region.samples
    if a.shape[0] == 0:
        raise ValueError("empty point set")
    to_region, _ = cKDTree(samples).query(a, k=1)
    if region.contains is not None:
        to_region = np.where(region.contains(a), 0.0, to_region)
    from_region, _ = cKDTree(a).query(samples, k=1)
    return float(max(to_region.max(), from_region.max())), float(region.mesh)


def one_sided_to_region(a, region: ClassicalSpectrumModel) -> float:
    """``sup_{x∈a} dist(x, region)`` (containment only)."""
    a = _as_points(a)
    d, _ = cKDTree(region.samples).query(a, k=1)
    if region.contains is not None:
        d = np.where(region.contains(a), 0.0, d)
    return float(d.max())


# -- limit sets ----------------------------------------------------------------


def limit_set_estimate(clouds, eps: float, tail: Optional[int] = None, window: int = 2,
                       spacing: Optional[float] = None) -> np.ndarray:
    """Grid points ``a`` met by the clouds ``A_ħ`` arbitrarily late, up to ``eps``.

    Clouds must be ordered by strictly decreasing ``ħ``. Only the last
    ``tail`` clouds are used (default: all). A grid point passes when every
    run of ``window`` consecutive tail clouds contains one meeting the closed
    ball ``B(a, eps)``. ``window = 1`` requires every tail cloud to meet it.
    """
    clouds = list(clouds)
    if len(clouds) < 3:
        raise ValueError("need at least three clouds")
    hbars = [c.hbar for c in clouds]
    if any(b >= a for a, b in zip(hbars, hbars[1:])):
        raise ValueError("clouds must have strictly decreasing hbar")
    tail_clouds = clouds[-tail:] if tail else clouds
    window = max(1, min(window, len(tail_clouds)))
    pts = [_as_points(c) for c in tail_clouds]
    allpts = np.concatenate(pts)
    spacing = eps / 2 if spacing is None else spacing
    lo, hi = allpts.min(axis=0) - eps, allpts.max(axis=0) + eps
    axes = [np.arange(l, h + 0.5 * spacing, spacing) for l, h in zip(lo, hi)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    hits = np.stack([cKDTree(p).query(grid, k=1)[0] <= eps * (1 + 1e-12) for p in pts])
    ok = np.ones(grid.shape[0], dtype=bool)
    for start in range(len(pts) - window + 1):
        ok &= hits[start:start + window].any(axis=0)
    return grid[ok]


# -- convex hulls and polytopes ------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolytopeModel:
    """Counterclockwise polygon (or segment) in lattice-aware form.

    ``lattice_vertices`` are integer coordinates in units of
    ``lattice_scale`` relative to ``origin``; ``vertices`` are the physical
    positions. ``edges`` are primitive integer edge directions.
    """

    vertices: np.ndarray
    lattice_scale: Optional[np.ndarray] = None
    origin: Optional[np.ndarray] = None
    lattice_vertices: Optional[np.ndarray] = None
    edges: Optional[list] = None
    degenerate: bool = False
    snapped: bool = False
    notes: dict = field(default_factory=dict)


def convex_hull_2d(points, tol: float = 1e-12) -> PolytopeModel:
    """Convex hull via Qhull, counterclockwise, starting at the lowest-then-leftmost vertex.

    Inputs whose points lie within ``tol·scale`` of a line (``scale`` the
    extent of the input) come back as the two extreme points with
    ``degenerate=True``. Qhull merges nearly coplanar facets, so points on an
    edge are never reported as vertices even under rounding noise.
    """
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise ValueError("convex hull of an empty set")
    if pts.shape[1] == 1:
        v = np.array([[pts[:, 0].min()], [pts[:, 0].max()]])
        if v[0, 0] == v[1, 0]:
            v = v[:1]
        return PolytopeModel(v, degenerate=False if len(v) == 2 else True)
    if pts.shape[1] != 2:
        raise ValueError("convex_hull_2d needs planar points")
    uniq = np.array(sorted(set(map(tuple, pts.tolist()))))
    if len(uniq) == 1:
        return PolytopeModel(uniq, degenerate=True)
    centred = uniq - uniq.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    scale = max(1.0, float(np.abs(uniq).max()))
    if len(uniq) < 3 or sv[1] <= tol * scale * np.sqrt(len(uniq)):
        return PolytopeModel(np.array([uniq[0], uniq[-1]]), degenerate=True)
    hull = uniq[ConvexHull(uniq).vertices]  # counterclockwise in 2-d
    start = min(range(len(hull)), key=lambda i: (hull[i][1], hull[i][0]))
    return PolytopeModel(np.roll(hull, -start, axis=0))


# -- lattice structure ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AffineCorrection:
    """``g(x) = linear @ x + offset`` mapping the lattice onto the joint spectrum.

    ``deviation`` is ``‖linear − Id‖₂``, the first-order departure of ``g``
    from the identity; ``constant`` is ``k·(deviation + ‖offset‖)``.
    """

    linear: np.ndarray
    offset: np.ndarray
    k: int
    spacing: np.ndarray
    origin: np.ndarray
    indices: np.ndarray
    residual: float

    @property
    def deviation(self) -> float:
        return float(np.linalg.norm(self.linear - np.eye(self.linear.shape[0]), 2))

    @property
    def constant(self) -> float:
        return self.k * (self.deviation + float(np.linalg.norm(self.offset)))

    def __call__(self, x):
        return _as_points(x) @ self.linear.T + self.offset

    def inverse(self, y):
        return np.linalg.solve(self.linear, (_as_points(y) - self.offset).T).T


def _fit_affine(idx, pts):
    design = np.hstack([idx, np.ones((idx.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(design, pts, rcond=None)
    return coef[:-1].T, coef[-1]  # pts ≈ idx @ L.T + b


def lattice_fit(cloud, k: int, spacing=None, max_residual: float = 0.2) -> AffineCorrection:
    """Fit ``cloud ≈ g(v + s·n)`` with ``n`` integer and ``g`` affine.

    ``s`` defaults to ``2π/k`` on every axis. Integer labels are grown
    outward from the point nearest the centroid, refitting the affine map as
    the labelled patch doubles, so the O(1/k) drift of ``g`` never causes a
    mislabelling. The lattice origin ``v`` is pinned by requiring that ``g``
    leave the centroid of the labelled lattice points in place.

    Raises
    ------
    LatticeFitError
        On multiplicities other than one, or when some point is further than
        ``max_residual·s`` from its lattice site after the fit.
    """
    pts = _as_points(cloud)
    if hasattr(cloud, "mult") and np.any(np.asarray(cloud.mult) != 1):
        raise LatticeFitError("lattice fit needs every joint eigenvalue to be simple (multiplicity 1)")
    n, d = pts.shape
    if n < d + 1:
        raise LatticeFitError(f"need at least {d + 1} points, got {n}")
    s = np.full(d, 2 * np.pi / k) if spacing is None else np.broadcast_to(np.asarray(spacing, float), (d,)).copy()

    center = pts.mean(axis=0)
    ref = int(np.argmin(np.linalg.norm(pts - center, axis=1)))
    L = np.diag(s)
    b = pts[ref].copy()
    dist = np.linalg.norm((pts - pts[ref]) / s, axis=1)
    radius = 2.0
    while True:
        patch = dist <= radius
        idx = np.rint(np.linalg.solve(L, (pts[patch] - b).T).T)
        if patch.sum() >= d + 1 and np.linalg.matrix_rank(np.hstack([idx, np.ones((idx.shape[0], 1))])) == d + 1:
            L, b = _fit_affine(idx, pts[patch])
        if patch.all():
            break
        radius *= 2.0
    idx = np.rint(np.linalg.solve(L, (pts - b).T).T)
    L, b = _fit_affine(idx, pts)
    # pts ≈ b + L n ; with lattice point x = v + s n and g(x) = A x + c we need A = L / s
    A = L / s[None, :]
    v = pts.mean(axis=0) - s * idx.mean(axis=0)
    c = b - A @ v
    g = AffineCorrection(A, c, int(k), s, v, idx.astype(int), 0.0)
    pulled = g.inverse(pts)
    lattice = v + s * idx
    resid = float(np.max(np.abs(pulled - lattice) / s))
    if len(set(map(tuple, idx.astype(int).tolist()))) != n:
        raise LatticeFitError("two joint eigenvalues map to the same lattice site")
    if resid > max_residual:
        raise LatticeFitError(
            f"cloud is not lattice-structured: max residual {resid:.3f} lattice spacings > {max_residual}"
        )
    return AffineCorrection(A, c, int(k), s, v, idx.astype(int), resid)


def _primitive(vec):
    vec = [int(x) for x in vec]
    g = 0
    for x in vec:
        g = math.gcd(g, abs(x))
    return tuple(x // g for x in vec) if g else tuple(vec)


def recover_polytope(cloud, k: int, spacing=None, snap: float = 0.3) -> PolytopeModel:
    """Moment polytope from a toric joint spectrum.

    Pull the cloud back through the fitted ``g``, take the convex hull and
    snap its vertices to the lattice when they are within ``snap`` spacings.
    Edge directions are reported as primitive integer vectors. If snapping
    fails the unsnapped hull is returned with ``snapped=False``.
    """
    g = lattice_fit(cloud, k, spacing)
    pulled = g.inverse(_as_points(cloud))
    d = pulled.shape[1]
    rel = (pulled - g.origin) / g.spacing
    if d == 1:
        hull = np.array([[rel[:, 0].min()], [rel[:, 0].max()]])
    elif d == 2:
        hull = convex_hull_2d(rel).vertices
    else:
        raise ValueError("polytope recovery is implemented for d <= 2")
    near = np.rint(hull)
    ok = bool(np.all(np.abs(hull - near) <= snap))
    if ok and d == 2 and len(near) > 2:
        # restart at the lowest-then-leftmost lattice vertex, decided on exact integers
        start = min(range(len(near)), key=lambda i: (near[i][1], near[i][0]))
        order = list(range(start, len(near))) + list(range(start))
        hull, near = hull[order], near[order]
    lat = near.astype(int) if ok else None
    verts = g.origin + g.spacing * (near if ok else hull)
    edges = None
    if ok and len(lat) >= 2:
        if d == 1:
            edges = [_primitive(lat[1] - lat[0])]
        else:
            edges = [_primitive(lat[(i + 1) % len(lat)] - lat[i]) for i in range(len(lat))]
    notes = {"residual": g.residual, "affine": g}
    if not ok:
        notes["snap_error"] = float(np.max(np.abs(hull - near)))
    return PolytopeModel(verts, g.spacing, g.origin, lat, edges, degenerate=len(verts) < d + 1, snapped=ok, notes=notes)


@dataclass(frozen=True)
class DelzantReport:
    rational: bool
    simple: bool
    smooth: bool
    vertices: list

    @property
    def passed(self) -> bool:
        return self.rational and self.simple and self.smooth


def delzant_check(poly) -> DelzantReport:
    """Rationality, simplicity and smoothness of a lattice polygon.

    ``poly`` is a :class:`PolytopeModel` with ``lattice_vertices`` or a plain
    sequence of integer vertices in counterclockwise order. Smoothness asks
    that the two primitive edge vectors leaving each vertex have
    ``|det| = 1``.
    """
    if isinstance(poly, PolytopeModel):
        if poly.lattice_vertices is None:
            return DelzantReport(False, False, False, [{"error": "vertices not on the lattice"}])
        verts = [tuple(Fraction(x) for x in v) for v in poly.lattice_vertices]
    else:
        verts = [tuple(Fraction(x).limit_denominator(10 ** 9) for x in v) for v in poly]
    n = len(verts)
    if n and len(verts[0]) == 1:
        # a segment is the 1-dimensional Delzant polytope iff its endpoints differ
        ok = n == 2 and verts[0] != verts[1] and all(v[0].denominator == 1 for v in verts)
        return DelzantReport(ok, ok, ok, [{"vertex": [str(v[0])], "pass": ok} for v in verts])
    if n < 3:
        raise ValueError("degenerate polygon: fewer than three vertices")
    area2 = sum(verts[i][0] * verts[(i + 1) % n][1] - verts[(i + 1) % n][0] * verts[i][1] for i in range(n))
    if area2 == 0:
        raise ValueError("degenerate polygon: zero area")
    rational = all(x.denominator == 1 for v in verts for x in v)
    details = []
    smooth = True
    simple = True
    for i in range(n):
        prev, cur, nxt = verts[i - 1], verts[i], verts[(i + 1) % n]
        e_out = (nxt[0] - cur[0], nxt[1] - cur[1])
        e_in = (prev[0] - cur[0], prev[1] - cur[1])
        if rational:
            a, b = _primitive(e_out), _primitive(e_in)
            det = a[0] * b[1] - a[1] * b[0]
        else:
            a = b = None
            det = None
        turn = e_out[0] * e_in[1] - e_out[1] * e_in[0]
        if turn == 0:
            simple = False  # collinear "vertex"
        ok = det is not None and abs(det) == 1
        smooth &= ok
        details.append({
            "vertex": [str(x) for x in cur],
            "edges": [list(a) if a else None, list(b) if b else None],
            "det": int(det) if det is not None else None,
            "pass": bool(ok),
        })
    return DelzantReport(rational, simple, smooth and rational, details)
