"""Hermitian linear algebra shared by every backend.

Dense matrices go through LAPACK (``numpy.linalg.eigh``); symmetric tridiagonal
and narrow-banded sparse matrices use the specialised LAPACK drivers exposed by
SciPy. All results are checked against the residual contract before they are
returned.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "EigenDecomposition",
    "EigenSolverError",
    "HermitianMatrix",
    "NotCommutingError",
    "TensorLocal",
    "TridiagonalMatrix",
    "commutator_norm",
    "comm_tol",
    "eig_hermitian",
    "eig_tridiagonal",
    "matrix_norm",
    "min_eigenvalue",
    "op_norm",
    "phi_c_operator",
]

HERMITIAN_TOL = 1e-12
RESIDUAL_TOL = 1e-10
# dense fallback guard for sparse / tensor inputs
MAX_DENSE_DIM = 6000


class EigenSolverError(RuntimeError):
    """The eigensolver failed or returned a decomposition violating the residual bound."""


class NotCommutingError(ValueError):
    """Operators handed to a joint computation do not commute to working precision."""


def _is_sparse(a) -> bool:
    return sp.issparse(a)


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """Hermitian matrix labelled with the semiclassical parameter it was built at.

    ``entries`` is normally a dense complex array. Banded backends may pass a
    SciPy sparse matrix instead; it is kept sparse and only densified when a
    dense algorithm needs it.
    """

    entries: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        a = self.entries
        if _is_sparse(a):
            a = sp.csr_matrix(a, dtype=complex)
            if a.shape[0] != a.shape[1] or a.shape[0] < 1:
                raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
            scale = abs(a).max() if a.nnz else 0.0
            asym = abs(a - a.conj().T).max() if a.nnz else 0.0
            if asym > HERMITIAN_TOL * max(scale, 1e-300) and asym > 0:
                raise ValueError(f"matrix is not Hermitian: max asymmetry {asym:.3e}")
            a = ((a + a.conj().T) * 0.5).tocsr()
        else:
            a = np.array(a, dtype=complex)
            if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
                raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
            scale = np.abs(a).max()
            asym = np.abs(a - a.conj().T).max()
            if asym > HERMITIAN_TOL * scale and asym > 0:
                raise ValueError(f"matrix is not Hermitian: max asymmetry {asym:.3e}")
            a = 0.5 * (a + a.conj().T)
            a.setflags(write=False)
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_sparse(self) -> bool:
        return _is_sparse(self.entries)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            if self.dim > MAX_DENSE_DIM:
                raise MemoryError(f"refusing to densify a {self.dim}x{self.dim} matrix")
            return self.entries.toarray()
        return self.entries

    @classmethod
    def diag(cls, values, hbar: float = 1.0) -> "HermitianMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)), hbar)

    @classmethod
    def identity(cls, dim: int, hbar: float = 1.0) -> "HermitianMatrix":
        return cls(np.eye(dim), hbar)


@dataclass(frozen=True, eq=False)
class TensorLocal:
    """``Id ⊗ … ⊗ local ⊗ … ⊗ Id`` acting on a tensor product of ``dims``.

    The Kronecker product is never formed unless :meth:`dense` is called.
    """

    local: HermitianMatrix
    position: int
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        if not 0 <= self.position < len(self.dims):
            raise ValueError("tensor position out of range")
        if self.dims[self.position] != self.local.dim:
            raise ValueError("local operator does not match its tensor slot")

    @property
    def hbar(self) -> float:
        return self.local.hbar

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def dense(self) -> np.ndarray:
        if self.dim > MAX_DENSE_DIM:
            raise MemoryError(f"refusing to densify a {self.dim}-dimensional tensor operator")
        out = np.ones((1, 1), dtype=complex)
        for i, n in enumerate(self.dims):
            out = np.kron(out, self.local.dense() if i == self.position else np.eye(n))
        return out

    def to_matrix(self) -> HermitianMatrix:
        return HermitianMatrix(self.dense(), self.hbar)


@dataclass(frozen=True, eq=False)
class TridiagonalMatrix:
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.array(self.diag, dtype=float).ravel()
        e = np.array(self.offdiag, dtype=float).ravel()
        if d.size < 1:
            raise ValueError("tridiagonal matrix needs at least one diagonal entry")
        if e.size != d.size - 1:
            raise ValueError(f"offdiag must have {d.size - 1} entries, got {e.size}")
        d.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def n(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.values.size


def _fix_phases(values, vectors):
    """Make the first non-negligible component of every eigenvector real positive.

    Eigenvectors are only defined up to a phase; fixing it (and ordering exact
    ties by that component's original argument) makes output reproducible.
    """
    vectors = np.array(vectors, dtype=float if np.isrealobj(vectors) else complex)
    n = vectors.shape[1]
    args = np.zeros(n)
    for col in range(n):
        v = vectors[:, col]
        thresh = 1e-8 * np.abs(v).max()
        idx = int(np.argmax(np.abs(v) > thresh))
        ph = v[idx] / abs(v[idx])
        args[col] = np.angle(ph)
        vectors[:, col] = v / ph
    order = np.lexsort((args, values))
    return values[order], vectors[:, order]


def _check(a_dense_or_sparse, values, vectors, dim, norm_a):
    if _is_sparse(a_dense_or_sparse):
        av = a_dense_or_sparse @ vectors
    else:
        av = a_dense_or_sparse @ vectors
    resid = np.abs(av - vectors * values).max() if dim else 0.0
    if vectors.shape[1] <= 256:
        ortho = np.abs(vectors.conj().T @ vectors - np.eye(vectors.shape[1])).max() if vectors.size else 0.0
    else:
        # seeded probes: ‖V*V x − x‖ for a few x, O(n·m) instead of forming V*V
        x = np.random.default_rng(0).standard_normal((vectors.shape[1], 4))
        ortho = np.abs(vectors.conj().T @ (vectors @ x) - x).max() / np.abs(x).max()
    if resid > RESIDUAL_TOL * max(1.0, norm_a) or ortho > RESIDUAL_TOL:
        raise EigenSolverError(
            f"eigendecomposition of {dim}x{dim} matrix failed: residual {resid:.3e}, "
            f"orthogonality defect {ortho:.3e}"
        )


def _bandwidth(a) -> int:
    coo = a.tocoo()
    return int(np.abs(coo.row - coo.col).max()) if coo.nnz else 0


def _banded_lower(a, bw):
    n = a.shape[0]
    ab = np.zeros((bw + 1, n), dtype=complex)
    for k in range(bw + 1):
        ab[k, : n - k] = a.diagonal(-k)
    return ab


def _gershgorin_low(m) -> float:
    if _is_sparse(m):
        absrow = np.asarray(abs(m).sum(axis=1)).ravel()
        d = np.real(m.diagonal())
    else:
        absrow = np.abs(m).sum(axis=1)
        d = np.real(np.diag(m))
    return float((d - (absrow - np.abs(d))).min()) - 1.0


def eig_hermitian(a: HermitianMatrix, upper: float | None = None) -> EigenDecomposition:
    """Eigendecomposition with eigenvalues ascending; ``upper`` keeps only eigenvalues ``<= upper``.

    Raises
    ------
    EigenSolverError
        If LAPACK does not converge or the result violates
        ``‖V diag(λ) V* − A‖ ≤ 1e-10·max(1, ‖A‖)``.
    """
    m = a.entries
    sel = {} if upper is None else {"select": "v", "select_range": (_gershgorin_low(m), float(upper))}
    try:
        if a.is_sparse and a.dim > 1 and _bandwidth(m) <= 1 and not np.any(np.imag(m.data)):
            # real symmetric tridiagonal: the full MRRR solve beats value-range selection here
            values, vectors = scipy.linalg.eigh_tridiagonal(np.real(m.diagonal()), np.real(m.diagonal(-1)))
            if upper is not None:
                keep = values <= upper
                values, vectors = values[keep], vectors[:, keep]
        elif a.is_sparse and _bandwidth(m) < max(1, a.dim // 8):
            bw = _bandwidth(m)
            values, vectors = scipy.linalg.eig_banded(_banded_lower(m, bw), lower=True, **sel)
        elif upper is None:
            values, vectors = np.linalg.eigh(a.dense())
        else:
            values, vectors = scipy.linalg.eigh(a.dense(), subset_by_value=sel["select_range"])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigenSolverError(f"eigensolver did not converge on {a.dim}x{a.dim} matrix: {exc}") from exc
    values, vectors = _fix_phases(values, vectors)
    norm = float(np.abs(values).max()) if values.size else 0.0
    if upper is not None:
        norm = max(norm, op_norm(a))
    _check(m, values, vectors, a.dim, norm)
    return EigenDecomposition(values, vectors)


def eigvals_hermitian(a: HermitianMatrix) -> np.ndarray:
    """Eigenvalues only (ascending); cheaper than :func:`eig_hermitian`."""
    m = a.entries
    if a.is_sparse and _bandwidth(m) < max(1, a.dim // 8):
        return scipy.linalg.eig_banded(_banded_lower(m, _bandwidth(m)), lower=True, eigvals_only=True)
    return np.linalg.eigvalsh(a.dense())


def eig_tridiagonal(t: TridiagonalMatrix) -> EigenDecomposition:
    try:
        values, vectors = scipy.linalg.eigh_tridiagonal(t.diag, t.offdiag)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigenSolverError(f"tridiagonal solver did not converge for n={t.n}: {exc}") from exc
    values, vectors = _fix_phases(values, vectors)
    norm = float(np.abs(values).max())
    tv = t.diag[:, None] * vectors
    tv[:-1] += t.offdiag[:, None] * vectors[1:]
    tv[1:] += t.offdiag[:, None] * vectors[:-1]
    resid = np.abs(tv - vectors * values).max()
    if resid > RESIDUAL_TOL * max(1.0, norm):
        raise EigenSolverError(f"tridiagonal decomposition residual {resid:.3e} for n={t.n}")
    return EigenDecomposition(values, vectors)


def eigvals_tridiagonal(t: TridiagonalMatrix, upper: float | None = None) -> np.ndarray:
    """Eigenvalues of ``t``, optionally only those ``<= upper``."""
    if upper is None:
        return scipy.linalg.eigh_tridiagonal(t.diag, t.offdiag, eigvals_only=True)
    lo = float(t.diag.min() - 2 * np.abs(t.offdiag).max(initial=0.0)) - 1.0
    if upper < lo:
        return np.empty(0)
    return scipy.linalg.eigh_tridiagonal(
        t.diag, t.offdiag, eigvals_only=True, select="v", select_range=(lo, upper)
    )


def min_eigenvalue(a: HermitianMatrix) -> float:
    """Smallest eigenvalue; banded sparse input avoids the full spectrum."""
    m = a.entries
    if a.is_sparse and _bandwidth(m) < max(1, a.dim // 8):
        low = scipy.linalg.eig_banded(
            _banded_lower(m, _bandwidth(m)), lower=True, eigvals_only=True, select="i", select_range=(0, 0)
        )
        return float(low[0])
    return float(np.linalg.eigvalsh(a.dense()).min())


def op_norm(a: HermitianMatrix) -> float:
    """Operator norm ``max |λ|`` of a Hermitian matrix."""
    if a.is_sparse:
        vals = eigvals_hermitian(a)
    else:
        vals = np.linalg.eigvalsh(a.entries)
    return float(np.abs(vals).max())


def matrix_norm(m) -> float:
    """Spectral norm (largest singular value) of an arbitrary square matrix.

    Sparse banded input is handled through the banded Hermitian problem
    ``M* M`` so large Weyl truncations stay cheap.
    """
    if isinstance(m, HermitianMatrix):
        return op_norm(m)
    if _is_sparse(m):
        m = sp.csr_matrix(m)
        if m.nnz == 0:
            return 0.0
        g = (m.conj().T @ m).tocsr()
        bw = _bandwidth(g)
        if bw < max(1, g.shape[0] // 8):
            top = scipy.linalg.eig_banded(
                _banded_lower(g, bw), lower=True, eigvals_only=True,
                select="i", select_range=(g.shape[0] - 1, g.shape[0] - 1),
            )
            return float(np.sqrt(max(top[-1], 0.0)))
        m = m.toarray()
    m = np.asarray(m)
    if not m.any():
        return 0.0
    return float(np.linalg.norm(m, 2))


def _as_dense(op) -> np.ndarray:
    if isinstance(op, (HermitianMatrix, TensorLocal)):
        return op.dense()
    return np.asarray(op)


def comm_tol(a, b) -> float:
    """Roundoff allowance for ``‖[A, B]‖``: ``1e-10·(1 + ‖A‖·‖B‖)``."""
    return 1e-10 * (1.0 + _norm_of(a) * _norm_of(b))


def _norm_of(op) -> float:
    if isinstance(op, TensorLocal):
        return op_norm(op.local)
    return op_norm(op)


def commutator_norm(a, b) -> float:
    """``‖AB − BA‖``, evaluated as the largest |eigenvalue| of ``i(AB − BA)``."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.hbar != b.hbar:
        raise ValueError(f"hbar mismatch: {a.hbar} vs {b.hbar}")
    if isinstance(a, TensorLocal) and isinstance(b, TensorLocal) and a.dims == b.dims:
        if a.position != b.position:
            return 0.0
        return commutator_norm(a.local, b.local)
    if isinstance(a, TensorLocal) or isinstance(b, TensorLocal):
        a_d, b_d = _as_dense(a), _as_dense(b)
    elif a.is_sparse or b.is_sparse:
        a_d, b_d = a.entries, b.entries
        c = 1j * (a_d @ b_d - b_d @ a_d)
        return op_norm(HermitianMatrix(sp.csr_matrix(c), a.hbar)) if sp.csr_matrix(c).nnz else 0.0
    else:
        a_d, b_d = a.entries, b.entries
    c = 1j * (a_d @ b_d - b_d @ a_d)
    if not c.any():
        return 0.0
    return float(np.abs(np.linalg.eigvalsh(0.5 * (c + c.conj().T))).max())


def check_commuting(ops) -> None:
    """Raise :class:`NotCommutingError` unless every pair commutes within :func:`comm_tol`."""
    if not ops:
        raise ValueError("need at least one operator")
    dim, hbar = ops[0].dim, ops[0].hbar
    for op in ops[1:]:
        if op.dim != dim:
            raise ValueError(f"dimension mismatch: {op.dim} vs {dim}")
        if op.hbar != hbar:
            raise ValueError(f"hbar mismatch: {op.hbar} vs {hbar}")
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            c = commutator_norm(ops[i], ops[j])
            tol = comm_tol(ops[i], ops[j])
            if c > tol:
                raise NotCommutingError(
                    f"operators {i} and {j} do not commute: ‖[T{i}, T{j}]‖ = {c:.3e} > tol {tol:.3e}"
                )


def phi_c_operator(ops, c) -> HermitianMatrix:
    """Return ``Σ_i (T_i − c_i)²`` for a commuting family."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if len(ops) != c.size:
        raise ValueError(f"point has {c.size} coordinates for {len(ops)} operators")
    check_commuting(ops)
    if any(isinstance(op, HermitianMatrix) and op.is_sparse for op in ops):
        eye = sp.identity(ops[0].dim, format="csr")
        out = sp.csr_matrix((ops[0].dim, ops[0].dim), dtype=complex)
        for op, ci in zip(ops, c):
            s = (op.entries if isinstance(op, HermitianMatrix) else sp.csr_matrix(op.dense())) - ci * eye
            out = out + s @ s
        return HermitianMatrix(out.tocsr(), ops[0].hbar)
    out = np.zeros((ops[0].dim, ops[0].dim), dtype=complex)
    eye = np.eye(ops[0].dim)
    for op, ci in zip(ops, c):
        s = _as_dense(op) - ci * eye
        out += s @ s
    return HermitianMatrix(out, ops[0].hbar)
