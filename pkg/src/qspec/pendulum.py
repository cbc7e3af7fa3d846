"""Quantum spherical pendulum: ``Ĵ = (ħ/i)∂_φ`` and ``Ĥ = −(ħ²/2)Δ_{S²} + z``.

Both operators preserve the sector spanned by ``Y_l^m`` with fixed ``m``;
there ``Ĵ = ħm`` and ``Ĥ`` is tridiagonal in ``l = |m|, |m|+1, …`` because
``z Y_l^m = a_{l,m} Y_{l+1}^m + a_{l−1,m} Y_{l−1}^m``. The classical system is
``H = ½‖ξ‖² + z`` on T*S² with momentum map ``(J, H)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq, minimize_scalar

from .geometry import ClassicalSpectrumModel
from .joint import BlockSystem, JointSpectrumCloud
from .operators import HermitianMatrix, TridiagonalMatrix, eigvals_tridiagonal

__all__ = [
    "PendulumConfig",
    "SectorSpectrum",
    "classical_boundary",
    "classical_region",
    "ground_energy",
    "j_max",
    "joint_spectrum_pendulum",
    "l_max_for",
    "pendulum_system",
    "sector_matrix",
    "sector_spectra",
]


@dataclass(frozen=True)
class PendulumConfig:
    """``normalized`` replaces energies ``E`` by ``sqrt(max(0, E + shift))``."""

    hbar: float
    e_cap: float = 3.0
    normalized: bool = False
    shift: float = 1.0
    l_max_scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.hbar <= 1:
            raise ValueError(f"hbar must lie in (0, 1], got {self.hbar}")
        if not self.e_cap > -1:
            raise ValueError(f"e_cap must exceed the minimum energy -1, got {self.e_cap}")
        if self.shift < 1:
            raise ValueError(f"shift must be >= 1, got {self.shift}")


@dataclass(frozen=True)
class SectorSpectrum:
    m: int
    energies: np.ndarray


def l_max_for(cfg: PendulumConfig) -> int:
    """Smallest ``l`` with ``(ħ²/2)·l(l+1) ≥ 4(e_cap + 2)``, scaled by ``cfg.l_max_scale``."""
    target = 8.0 * (cfg.e_cap + 2.0) / cfg.hbar ** 2
    l = int(math.ceil((-1.0 + math.sqrt(1.0 + 4.0 * target)) / 2.0))
    while l * (l + 1) < target:
        l += 1
    return int(math.ceil(l * cfg.l_max_scale))


def z_coefficients(m: int, l_max: int) -> np.ndarray:
    """``a_{l,m} = sqrt(((l+1)² − m²)/((2l+1)(2l+3)))`` for ``l = |m| … l_max − 1``."""
    l = np.arange(abs(m), l_max, dtype=float)
    return np.sqrt(((l + 1) ** 2 - m * m) / ((2 * l + 1) * (2 * l + 3)))


def sector_matrix(m: int, cfg: PendulumConfig, l_max: int | None = None) -> TridiagonalMatrix:
    """Energy operator on the ``Ĵ = ħm`` sector in the basis ``Y_l^m``, ``|m| ≤ l ≤ l_max``."""
    l_max = l_max_for(cfg) if l_max is None else l_max
    if abs(m) > l_max:
        raise ValueError(f"|m| = {abs(m)} exceeds l_max = {l_max}")
    l = np.arange(abs(m), l_max + 1, dtype=float)
    return TridiagonalMatrix(0.5 * cfg.hbar ** 2 * l * (l + 1), z_coefficients(m, l_max))


def classical_boundary(j: float, tol: float = 1e-12) -> float:
    """Lowest classical energy at angular momentum ``j``.

    ``min_θ j²/(2 sin²θ) + cos θ`` by bounded scalar minimization on (0, π);
    ``j = 0`` gives ``−1`` (the south pole).
    """
    j = abs(float(j))
    if j == 0.0:
        return -1.0

    def h(theta):
        return j * j / (2.0 * math.sin(theta) ** 2) + math.cos(theta)

    # the minimizer sits in (π/2, π): d/dθ is negative at π/2 and +∞ at π
    res = minimize_scalar(h, bounds=(0.5 * math.pi, math.pi), method="bounded",
                          options={"xatol": min(tol, 1e-10), "maxiter": 500})
    # h is flat near the minimum, so θ accuracy 1e-10 gives far better energy accuracy
    return float(res.fun)


def j_max(e_cap: float) -> float:
    """Largest ``|j|`` with ``classical_boundary(j) ≤ e_cap``, by bisection."""
    if e_cap <= -1.0:
        return 0.0
    hi = 1.0
    while classical_boundary(hi) < e_cap:
        hi *= 2.0
    return float(brentq(lambda j: classical_boundary(j) - e_cap, 0.0, hi, xtol=1e-14, rtol=1e-14))


def sector_spectra(cfg: PendulumConfig, l_max: int | None = None) -> list:
    """Energies ``≤ e_cap`` for every sector within classical reach, ordered by ``m``."""
    l_max = l_max_for(cfg) if l_max is None else l_max
    m_top = min(l_max, int(math.floor(j_max(cfg.e_cap) / cfg.hbar + 1e-9)))
    out = []
    for m in range(0, m_top + 1):
        e = eigvals_tridiagonal(sector_matrix(m, cfg, l_max), upper=cfg.e_cap)
        e = np.sort(e[e <= cfg.e_cap])
        if e.size:
            out.append(SectorSpectrum(m, e))
            if m:
                # a_{l,m} depends on m², so sector −m has the identical spectrum
                out.append(SectorSpectrum(-m, e))
    out.sort(key=lambda s: s.m)
    return out


def normalize_energy(e, shift: float = 1.0):
    return np.sqrt(np.maximum(0.0, np.asarray(e, dtype=float) + shift))


def joint_spectrum_pendulum(cfg: PendulumConfig, l_max: int | None = None) -> JointSpectrumCloud:
    """Points ``(ħm, E)`` (or ``(ħm, sqrt(E + shift))``) with ``E ≤ e_cap``."""
    pts = []
    for sec in sector_spectra(cfg, l_max):
        e = normalize_energy(sec.energies, cfg.shift) if cfg.normalized else sec.energies
        pts.append(np.column_stack([np.full(e.size, cfg.hbar * sec.m), e]))
    pts = np.concatenate(pts) if pts else np.empty((0, 2))
    meta = {"l_max": l_max_for(cfg) if l_max is None else l_max, "e_cap": cfg.e_cap}
    return JointSpectrumCloud(pts, np.ones(len(pts), dtype=int), cfg.hbar, meta)


def ground_energy(hbar: float, e_cap: float = 0.0) -> float:
    """Lowest eigenvalue of ``Ĥ`` (attained in the ``m = 0`` sector)."""
    cfg = PendulumConfig(hbar, e_cap)
    return float(eigvals_tridiagonal(sector_matrix(0, cfg), upper=e_cap).min())


def pendulum_system(cfg: PendulumConfig, m_range: int | None = None) -> BlockSystem:
    """The commuting pair ``(Ĵ, Ĥ)`` as a direct sum over sectors ``|m| ≤ m_range``.

    Blocks are stored sparse (``Ĵ`` diagonal, ``Ĥ`` tridiagonal) so the
    distance functional only needs banded eigenvalue problems.
    """
    l_max = l_max_for(cfg)
    if m_range is None:
        m_range = min(l_max, int(math.floor(j_max(cfg.e_cap) / cfg.hbar)) + 2)
    blocks = []
    for m in range(-m_range, m_range + 1):
        t = sector_matrix(m, cfg, l_max)
        n = t.n
        h = sp.diags([t.offdiag, t.diag, t.offdiag], [-1, 0, 1], format="csr")
        jop = sp.identity(n, format="csr") * (cfg.hbar * m)
        blocks.append([HermitianMatrix(jop, cfg.hbar), HermitianMatrix(h, cfg.hbar)])
    return BlockSystem(blocks, cfg.hbar)


def boundary_parametric(theta):
    """Lower boundary as a curve in the polar angle ``θ ∈ (π/2, π]``.

    Stationarity of ``j²/(2 sin²θ) + cos θ`` gives ``j² = −sin⁴θ / cos θ`` and
    ``h = cos θ − sin²θ / (2 cos θ)``; returns ``(j ≥ 0, h)``.
    """
    theta = np.asarray(theta, dtype=float)
    c, s2 = np.cos(theta), np.sin(theta) ** 2
    return s2 / np.sqrt(-c), c - s2 / (2.0 * c)


def classical_region(cfg: PendulumConfig, mesh: float | None = None) -> ClassicalSpectrumModel:
    """``{(j, h): h_min(j) ≤ h ≤ e_cap}`` sampled with spacing ``mesh``.

    Sampling happens in display coordinates, i.e. after ``h ↦ sqrt(h + shift)``
    when ``cfg.normalized``, so ``mesh`` bounds the discretization error there.
    """
    mesh = min(0.01, cfg.hbar / 2) if mesh is None else float(mesh)
    jm = j_max(cfg.e_cap)
    if cfg.normalized:
        def to_y(h):
            return normalize_energy(h, cfg.shift)

        def from_y(y):
            return np.asarray(y, dtype=float) ** 2 - cfg.shift
    else:
        def to_y(h):
            return np.asarray(h, dtype=float)

        from_y = to_y

    theta_top = brentq(lambda t: boundary_parametric(t)[1] - cfg.e_cap, 0.5 * math.pi + 1e-12, math.pi)
    theta = np.linspace(math.pi, theta_top, 20001)
    jj, hh = boundary_parametric(theta)
    jj[-1] = jm
    curve = np.column_stack([jj, to_y(hh)])
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(curve, axis=0), axis=1))])
    n = max(2, int(math.ceil(arc[-1] / (mesh / 2))) + 1)
    at = np.linspace(0.0, arc[-1], n)
    half = np.column_stack([np.interp(at, arc, curve[:, 0]), np.interp(at, arc, curve[:, 1])])
    lower = np.concatenate([(half * [-1.0, 1.0])[::-1], half[1:]])
    n_top = max(2, int(math.ceil(2 * jm / (mesh / 2))) + 1)
    y_cap = float(to_y(cfg.e_cap))
    top = np.column_stack([np.linspace(jm, -jm, n_top), np.full(n_top, y_cap)])
    boundary = np.concatenate([lower, top[1:]])

    y_bottom = float(to_y(-1.0))
    gj = np.arange(-jm, jm + 0.5 * mesh, mesh)
    gy = np.arange(y_bottom, y_cap + 0.5 * mesh, mesh)
    J, Y = (a.ravel() for a in np.meshgrid(gj, gy, indexing="ij"))
    inside = (from_y(Y) >= _hmin_vec(J)) & (Y <= y_cap)
    interior = np.column_stack([J[inside], Y[inside]])

    def contains(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        j, h = pts[:, 0], from_y(pts[:, 1])
        ok = (np.abs(j) <= jm) & (h <= cfg.e_cap + 1e-12)
        if cfg.normalized:
            ok &= pts[:, 1] >= 0
        return ok & (h >= _hmin_vec(j) - 1e-12)

    return ClassicalSpectrumModel(
        kind="windowed-region",
        boundary=[boundary],
        interior=interior,
        window=((-jm, jm), (y_bottom, y_cap)),
        mesh=mesh,
        contains=contains,
    )


def _hmin_vec(j):
    j = np.asarray(j, dtype=float)
    uniq, inv = np.unique(np.round(np.abs(j), 12), return_inverse=True)
    vals = np.array([classical_boundary(v) for v in uniq])
    return vals[inv].reshape(j.shape)
