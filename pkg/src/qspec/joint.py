"""Joint spectra of commuting Hermitian families and the distance functional.

A family is one of

* a list of :class:`~qspec.operators.HermitianMatrix` (dense path),
* a list of :class:`~qspec.operators.TensorLocal` acting on distinct tensor
  slots (the joint spectrum is the Cartesian product of the factor spectra),
* a :class:`BlockSystem`, i.e. a direct sum of smaller commuting families.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .operators import (
    HermitianMatrix,
    TensorLocal,
    check_commuting,
    eig_hermitian,
    min_eigenvalue,
    op_norm,
    phi_c_operator,
)

__all__ = [
    "BlockSystem",
    "JointSpectrumCloud",
    "JointSpectrumError",
    "MembershipField",
    "default_cluster_tol",
    "joint_spectrum",
    "joint_spectrum_random",
    "membership_field",
    "membership_indicator",
]


class JointSpectrumError(RuntimeError):
    """Joint eigenvectors failed the residual check; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True, eq=False)
class JointSpectrumCloud:
    """Joint eigenvalues (rows of ``points``) with multiplicities at one ``hbar``."""

    points: np.ndarray
    mult: np.ndarray
    hbar: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        mult = np.array(self.mult, dtype=np.int64).ravel()
        if mult.size != pts.shape[0]:
            raise ValueError("need one multiplicity per point")
        if np.any(mult < 1):
            raise ValueError("multiplicities must be positive")
        order = np.lexsort(pts.T[::-1]) if pts.shape[0] else np.arange(0)
        pts, mult = pts[order], mult[order]
        pts.setflags(write=False)
        mult.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "mult", mult)

    @property
    def dim_d(self) -> int:
        return self.points.shape[1]

    @property
    def total(self) -> int:
        return int(self.mult.sum())

    def __len__(self):
        return self.points.shape[0]

    def mapped(self, fn) -> "JointSpectrumCloud":
        return JointSpectrumCloud(fn(self.points), self.mult, self.hbar, dict(self.meta))

    def where(self, mask) -> "JointSpectrumCloud":
        mask = np.asarray(mask, dtype=bool)
        return JointSpectrumCloud(self.points[mask], self.mult[mask], self.hbar, dict(self.meta))

    @classmethod
    def union(cls, clouds, hbar=None) -> "JointSpectrumCloud":
        clouds = list(clouds)
        pts = np.concatenate([c.points for c in clouds])
        mult = np.concatenate([c.mult for c in clouds])
        return cls(pts, mult, clouds[0].hbar if hbar is None else hbar)


@dataclass(frozen=True, eq=False)
class BlockSystem:
    """Direct sum of commuting families; ``blocks[b][i]`` is operator ``i`` on block ``b``."""

    blocks: list
    hbar: float

    @property
    def dim_d(self) -> int:
        return len(self.blocks[0])

    @property
    def dim(self) -> int:
        return sum(ops[0].dim for ops in self.blocks)


@dataclass(frozen=True, eq=False)
class MembershipField:
    grid: np.ndarray
    values: np.ndarray

    def sublevel(self, eps: float) -> np.ndarray:
        """Probe points whose distance to the joint spectrum is at most ``eps``."""
        return self.grid[self.values <= eps * eps]


def default_cluster_tol(first) -> float:
    """``1e-8·(1 + ‖T₁‖)``."""
    n = op_norm(first.local) if isinstance(first, TensorLocal) else op_norm(first)
    return 1e-8 * (1.0 + n)


def _clusters(values, tol):
    """Split ascending ``values`` into runs whose consecutive gaps are ``<= tol``."""
    if values.size == 0:
        return []
    breaks = np.nonzero(np.diff(values) > tol)[0] + 1
    return np.split(np.arange(values.size), breaks)


def _dense_joint(ops, cluster_tol):
    dense = [op.dense() if isinstance(op, (HermitianMatrix, TensorLocal)) else np.asarray(op) for op in ops]
    dim = dense[0].shape[0]
    leaves = []
    sizes = []

    def split(level, basis, coords):
        if level == len(dense):
            leaves.append((tuple(coords), basis))
            return
        sub = basis.conj().T @ dense[level] @ basis
        dec = eig_hermitian(HermitianMatrix(0.5 * (sub + sub.conj().T)))
        for idx in _clusters(dec.values, cluster_tol):
            sizes.append(idx.size)
            split(level + 1, basis @ dec.vectors[:, idx], coords + [float(dec.values[idx].mean())])

    split(0, np.eye(dim, dtype=complex), [])

    norms = [max(1.0, float(np.abs(np.linalg.eigvalsh(d)).max())) for d in dense]
    worst = 0.0
    for coords, basis in leaves:
        v = basis[:, 0]
        for d, lam, nrm in zip(dense, coords, norms):
            r = float(np.linalg.norm(d @ v - lam * v))
            worst = max(worst, r / nrm)
    if worst > 10 * cluster_tol:
        raise JointSpectrumError(
            f"joint eigenvector residual {worst:.3e} exceeds 10·cluster_tol = {10 * cluster_tol:.3e}",
            {"cluster_sizes": sizes, "max_relative_residual": worst, "cluster_tol": cluster_tol},
        )
    pts = np.array([c for c, _ in leaves], dtype=float).reshape(len(leaves), len(dense))
    mult = np.array([b.shape[1] for _, b in leaves])
    return pts, mult


def _tensor_joint(ops, cluster_tol):
    per_factor = []
    for op in sorted(ops, key=lambda o: o.position):
        vals = eig_hermitian(op.local).values
        groups = _clusters(vals, cluster_tol)
        per_factor.append([(float(vals[g].mean()), g.size) for g in groups])
    order = np.argsort([op.position for op in ops])
    inv = np.argsort(order)
    pts, mult = [], []
    for combo in itertools.product(*per_factor):
        pts.append([combo[i][0] for i in inv])
        mult.append(int(np.prod([c[1] for c in combo])))
    return np.array(pts, dtype=float), np.array(mult)


def _is_tensor_family(ops) -> bool:
    return (
        all(isinstance(op, TensorLocal) for op in ops)
        and len({op.dims for op in ops}) == 1
        and len({op.position for op in ops}) == len(ops)
    )


def joint_spectrum(ops, cluster_tol: float | None = None) -> JointSpectrumCloud:
    """Joint spectrum of a commuting family, by recursive block diagonalization.

    Eigendecompose ``T₁``, group eigenvalues closer than ``cluster_tol``,
    compress ``T₂`` to each group's eigenspace and recurse. Every leaf is a
    joint eigenvalue whose multiplicity is the leaf dimension. A residual pass
    checks ``‖T_j v − λ_j v‖ ≤ 10·cluster_tol·max(1, ‖T_j‖)`` on one vector per
    leaf and raises :class:`JointSpectrumError` otherwise.
    """
    if isinstance(ops, BlockSystem):
        clouds = [joint_spectrum(b, cluster_tol) for b in ops.blocks]
        return JointSpectrumCloud.union(clouds, ops.hbar)
    ops = list(ops)
    tol = default_cluster_tol(ops[0]) if cluster_tol is None else float(cluster_tol)
    if _is_tensor_family(ops):
        pts, mult = _tensor_joint(ops, tol)
    else:
        check_commuting(ops)
        pts, mult = _dense_joint(ops, tol)
    return JointSpectrumCloud(pts, mult, ops[0].hbar, {"cluster_tol": tol})


def joint_spectrum_random(ops, seed: int = 0, cluster_tol: float | None = None) -> JointSpectrumCloud:
    """Cross-check path: diagonalize one seeded random combination ``Σ r_i T_i``.

    Joint eigenvalues are read off as Rayleigh quotients in the resulting
    eigenbasis. Unreliable when distinct joint points collide under the
    random projection; use :func:`joint_spectrum` as the primary path.
    """
    ops = list(ops)
    check_commuting(ops)
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(len(ops))
    dense = [op.dense() for op in ops]
    comb = sum(ri * d for ri, d in zip(r, dense))
    dec = eig_hermitian(HermitianMatrix(comb, ops[0].hbar))
    v = dec.vectors
    coords = np.stack([np.real(np.einsum("ij,ik,kj->j", v.conj(), d, v)) for d in dense], axis=1)
    tol = default_cluster_tol(ops[0]) if cluster_tol is None else float(cluster_tol)
    pts, mult = [], []
    for idx in _clusters(dec.values, tol):
        pts.append(coords[idx].mean(axis=0))
        mult.append(idx.size)
    return JointSpectrumCloud(np.array(pts), np.array(mult), ops[0].hbar, {"cluster_tol": tol, "seed": seed})


def membership_indicator(ops, c) -> float:
    """Lowest eigenvalue of ``Σ_i (T_i − c_i)²``.

    For a commuting family this is the squared Euclidean distance from ``c``
    to the joint spectrum; it is computed without extracting joint eigenvalues.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if isinstance(ops, BlockSystem):
        return min(membership_indicator(b, c) for b in ops.blocks)
    ops = list(ops)
    if _is_tensor_family(ops):
        # commuting summands on separate factors: the bottom of the sum is the sum of bottoms
        total = 0.0
        for op, ci in zip(ops, c):
            s = op.local.dense() - ci * np.eye(op.local.dim)
            total += float(np.linalg.eigvalsh(s @ s).min())
        return total
    return min_eigenvalue(phi_c_operator(ops, c))


def membership_field(ops, grid) -> MembershipField:
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if isinstance(ops, BlockSystem):
        d = ops.dim_d
    else:
        d = len(ops)
    if grid.shape[1] != d:
        grid = grid.reshape(-1, d)
    vals = np.array([membership_indicator(ops, c) for c in grid])
    return MembershipField(grid, vals)
