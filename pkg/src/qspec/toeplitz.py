"""Berezin–Toeplitz quantization of functions on the sphere CP¹.

Holomorphic sections of the k-th power of the hyperplane bundle are spanned by
the monomials ``s_j ∝ x^j y^(k−j)``. In the height/azimuth coordinates
``(u, φ)`` with ``t = (1 + u)/2`` one has ``|s_j|² ∝ t^j (1 − t)^(k−j)`` and
phase ``e^{ijφ}``, and the area form is ``du dφ`` up to a constant. Hence

    T_k(f)[i, j] = ∫₀¹ f_{i−j}(u(t)) t^{(i+j)/2} (1−t)^{k−(i+j)/2} dt / sqrt(B_i B_j)

with ``f_n(u) = (2π)⁻¹ ∫ f(u, φ) e^{−inφ} dφ`` and ``B_j = B(j+1, k−j+1)``.
When every ``f_n`` is a polynomial in ``u``, even ``i − j`` gives a polynomial
integrand (Gauss–Legendre) and odd ``i − j`` a polynomial times
``sqrt(t(1−t))`` (Gauss–Chebyshev of the second kind), both exact. Other
symbols are integrated adaptively in ``t = sin²ψ``.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .joint import JointSpectrumCloud
from .operators import HermitianMatrix, TensorLocal
from .symbols import SymbolError, eval_symbol, parse_symbol, variables

__all__ = [
    "Cp1Symbol",
    "QuadratureError",
    "ToeplitzFamily",
    "moment_normalize",
    "product_system",
    "toeplitz_matrix",
    "toeplitz_z_closed_form",
]

MAX_PRODUCT_DIM = 4_000_000
_CONVERGED = 1e-12
_MAX_DOUBLINGS = 4


class QuadratureError(RuntimeError):
    """Quadrature could not resolve the symbol to the required accuracy."""


@dataclass(frozen=True, eq=False)
class Cp1Symbol:
    """Real function ``f(u, φ)`` on the sphere, ``u`` the height and ``φ`` the azimuth.

    ``fourier_degree`` bounds the φ-Fourier content (``None`` means unknown or
    infinite); ``poly_degree`` bounds the polynomial degree in ``u`` of each
    Fourier coefficient (``None`` means not a polynomial). Both only size the
    quadrature; unknown values are handled adaptively. ``breakpoints`` lists
    heights where ``f`` is not analytic (edges of a support, kinks); the
    adaptive rule then integrates panel by panel between them.
    """

    evaluator: Callable
    fourier_degree: Optional[int] = 0
    sup_bound: float = math.inf
    poly_degree: Optional[int] = None
    label: str = "f"
    breakpoints: tuple = ()

    def __call__(self, u, phi):
        out = self.evaluator(np.asarray(u, dtype=float), np.asarray(phi, dtype=float))
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(np.asarray(u), np.asarray(phi)).shape)

    def __mul__(self, other: "Cp1Symbol") -> "Cp1Symbol":
        if not isinstance(other, Cp1Symbol):
            c = float(other)
            return Cp1Symbol(lambda u, p: c * self(u, p), self.fourier_degree, abs(c) * self.sup_bound,
                             self.poly_degree, f"{c}*({self.label})", self.breakpoints)
        fd = None if self.fourier_degree is None or other.fourier_degree is None else self.fourier_degree + other.fourier_degree
        pd = None if self.poly_degree is None or other.poly_degree is None else self.poly_degree + other.poly_degree
        return Cp1Symbol(lambda u, p: self(u, p) * other(u, p), fd, self.sup_bound * other.sup_bound, pd,
                         f"({self.label})*({other.label})", _merge(self.breakpoints, other.breakpoints))

    __rmul__ = __mul__

    def __add__(self, other: "Cp1Symbol") -> "Cp1Symbol":
        fd = None if self.fourier_degree is None or other.fourier_degree is None else max(self.fourier_degree, other.fourier_degree)
        pd = None if self.poly_degree is None or other.poly_degree is None else max(self.poly_degree, other.poly_degree)
        return Cp1Symbol(lambda u, p: self(u, p) + other(u, p), fd, self.sup_bound + other.sup_bound, pd,
                         f"({self.label})+({other.label})", _merge(self.breakpoints, other.breakpoints))

    @classmethod
    def constant(cls, c: float) -> "Cp1Symbol":
        return cls(lambda u, p: np.full(np.broadcast(u, p).shape, float(c)), 0, abs(c), 0, repr(float(c)))

    @classmethod
    def height(cls) -> "Cp1Symbol":
        return cls(lambda u, p: u + 0.0 * p, 0, 1.0, 1, "u")

    @classmethod
    def from_expression(cls, src: str, fourier_degree=None, poly_degree=None) -> "Cp1Symbol":
        """Build a symbol from an expression in ``u`` and ``phi``.

        The φ-Fourier degree is inferred by an FFT over 64 azimuths per height
        when not declared; ``sup_bound`` is estimated on a fine grid.
        """
        tree = parse_symbol(src, "sphere")

        def f(u, p):
            return eval_symbol(tree, u=u, phi=p)

        uu = np.linspace(-1.0, 1.0, 65)[:, None]
        pp = 2 * np.pi * np.arange(64)[None, :] / 64
        vals = np.broadcast_to(f(uu, pp), (65, 64))
        if fourier_degree is None and "phi" not in variables(tree):
            fourier_degree = 0
        if fourier_degree is None:
            coef = np.abs(np.fft.rfft(vals, axis=1)).max(axis=0) / 64
            big = np.nonzero(coef > 1e-12 * max(1.0, np.abs(vals).max()))[0]
            deg = int(big.max()) if big.size else 0
            fourier_degree = None if deg >= 31 else deg
        sup = float(np.abs(vals).max())
        return cls(f, fourier_degree, sup, poly_degree, src)


@dataclass(frozen=True)
class ToeplitzFamily:
    symbol: Cp1Symbol
    k_values: tuple
    subprincipal: Optional[Cp1Symbol] = None

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_values)
        if any(k < 1 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("k_values must be positive and strictly increasing")
        object.__setattr__(self, "k_values", ks)

    def matrices(self):
        return [toeplitz_matrix(self.symbol, k, self.subprincipal) for k in self.k_values]


@lru_cache(maxsize=64)
def _legendre_rule(n: int):
    """Gauss–Legendre rule with Newton-polished nodes; weights from ``P_n'``."""
    x, _ = leggauss(n)
    for _ in range(3):
        p, dp = _legendre_eval(n, x)
        x = x - p / dp
    _, dp = _legendre_eval(n, x)
    return x, 2.0 / ((1.0 - x * x) * dp * dp)


def _legendre_eval(n, x):
    p0, p1 = np.ones_like(x), x.copy()
    for m in range(2, n + 1):
        p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
    return p1, n * (x * p1 - p0) / (x * x - 1.0)


@lru_cache(maxsize=64)
def _chebyu_rule(n: int):
    # Gauss rule for the weight sqrt(1 − x²); closed form
    j = np.arange(1, n + 1)
    theta = j * np.pi / (n + 1)
    return np.cos(theta), np.pi / (n + 1) * np.sin(theta) ** 2


def _quad_norms(k: int, logt, log1t, weights):
    """Rule-based norms ``∫ t^j (1−t)^(k−j) = exp(shift_j)·total_j``.

    Normalizing with the rule's own moments instead of exact Beta values,
    and keeping shift and sum apart, makes ``T(1) = Id`` exactly rather than
    to quadrature and ``exp`` rounding.
    """
    j = np.arange(k + 1)[:, None]
    expo = j * logt[None, :] + (k - j) * log1t[None, :]
    shift = expo.max(axis=1)
    return shift, (weights[None, :] * np.exp(expo - shift[:, None])).sum(axis=1)


def _mode_coefficients(f: Cp1Symbol, u: np.ndarray, n_phi: int, modes: np.ndarray) -> np.ndarray:
    """φ-Fourier coefficients ``f_n(u)`` for the requested modes, shape (len(modes), len(u))."""
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    vals = f(u[:, None], phi[None, :])
    if not np.all(np.isfinite(vals)):
        raise SymbolError("eval", f"symbol {f.label!r} is not finite on the sphere")
    c = np.fft.fft(vals, axis=1) / n_phi  # c[:, n] = f_n for n >= 0, wraps for n < 0
    return c[:, modes % n_phi].T


def _assemble_exact(f: Cp1Symbol, k: int, n_u: int, n_phi: int, modes: np.ndarray) -> np.ndarray:
    # f_n polynomial in u: Legendre for even i − j, Chebyshev-U for odd i − j
    dim = k + 1
    out = np.zeros((dim, dim), dtype=complex)
    x_even, w_even = _legendre_rule(n_u)
    x_odd, w_odd = _chebyu_rule(n_u)
    shift, total = _quad_norms(k, np.log(0.5 * (1.0 + x_even)), np.log(0.5 * (1.0 - x_even)), w_even)
    for parity, (x, w) in enumerate(((x_even, w_even), (x_odd, w_odd))):
        sel = modes[np.abs(modes) % 2 == parity]
        if sel.size == 0:
            continue
        logt, log1t = np.log(0.5 * (1.0 + x)), np.log(0.5 * (1.0 - x))
        coeffs = _mode_coefficients(f, x, n_phi, sel)
        for n, fn in zip(sel, coeffs):
            j = np.arange(max(0, -n), min(dim, dim - n))
            i = j + n
            a = 0.5 * (i + j - parity)  # exponent of t once sqrt(t(1−t)) is pulled out
            b = k - parity - a
            logw = a[:, None] * logt[None, :] + b[:, None] * log1t[None, :]
            logw -= 0.5 * (shift[i] + shift[j])[:, None]
            # relative to the Legendre norms, the Chebyshev-U weight 2 sqrt(t(1−t)) brings a factor 1/2
            scale = 1.0 if parity == 0 else 0.5
            out[i, j] = scale * (np.exp(logw) * (w * fn)[None, :]).sum(axis=1) / np.sqrt(total[i] * total[j])
    return out


def _merge(a, b):
    return tuple(sorted(set(a) | set(b)))


def _psi_rule(n: int, breakpoints=()):
    """Composite Gauss–Legendre rule on ψ ∈ [0, π/2], one panel per gap between breakpoints."""
    y, w = _legendre_rule(n)
    cuts = [0.0]
    for b in sorted(breakpoints):
        if -1.0 < b < 1.0:
            cuts.append(math.asin(math.sqrt(0.5 * (1.0 + b))))  # u = −cos 2ψ
    cuts.append(0.5 * math.pi)
    nodes, weights = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            nodes.append(lo + 0.5 * (hi - lo) * (1.0 + y))
            weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _assemble_smooth(f: Cp1Symbol, k: int, n_u: int, n_phi: int, modes: np.ndarray) -> np.ndarray:
    # t = sin²ψ makes every entry a smooth integral over ψ ∈ [0, π/2]
    dim = k + 1
    out = np.zeros((dim, dim), dtype=complex)
    psi, w = _psi_rule(n_u, f.breakpoints)
    u = -np.cos(2 * psi)
    logt, log1t = 2 * np.log(np.sin(psi)), 2 * np.log(np.cos(psi))
    jac = np.sin(2 * psi) * w
    shift, total = _quad_norms(k, logt, log1t, jac)
    coeffs = _mode_coefficients(f, u, n_phi, modes)
    for n, fn in zip(modes, coeffs):
        j = np.arange(max(0, -n), min(dim, dim - n))
        i = j + n
        a = 0.5 * (i + j)
        logw = a[:, None] * logt[None, :] + (k - a)[:, None] * log1t[None, :]
        logw -= 0.5 * (shift[i] + shift[j])[:, None]
        out[i, j] = (np.exp(logw) * (jac * fn)[None, :]).sum(axis=1) / np.sqrt(total[i] * total[j])
    return out


def toeplitz_matrix(f: Cp1Symbol, k: int, subprincipal: Optional[Cp1Symbol] = None) -> HermitianMatrix:
    """Matrix of ``Π_k f Π_k`` in the orthonormal monomial basis, labelled ``hbar = 1/k``.

    With ``f.poly_degree`` and ``f.fourier_degree`` declared, each Fourier
    coefficient is taken to be a polynomial in ``u`` and the quadrature is
    exact. Otherwise the entries are integrated in ``t = sin²ψ`` and node
    counts are doubled until entries change by less than 1e-12 (at most four
    doublings).
    """
    k = int(k)
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    if subprincipal is not None:
        sub = subprincipal * (1.0 / k)
        f = f + sub
    exact = f.poly_degree is not None and f.fourier_degree is not None
    max_mode = k if f.fourier_degree is None else min(k, f.fourier_degree)
    modes = np.arange(-max_mode, max_mode + 1)
    if exact:
        n_u = k + f.poly_degree + 2
        n_phi = 2 * f.fourier_degree + 4
        return HermitianMatrix(_assemble_exact(f, k, n_u, n_phi, modes), 1.0 / k)
    n_u = k + 2 + (f.poly_degree or 0) + 16
    n_phi = 2 * (f.fourier_degree if f.fourier_degree is not None else k + 8) + 4
    m = _assemble_smooth(f, k, n_u, n_phi, modes)
    change = np.inf
    for _ in range(_MAX_DOUBLINGS):
        n_u *= 2
        if f.fourier_degree is None:
            n_phi *= 2
        m2 = _assemble_smooth(f, k, n_u, n_phi, modes)
        change = np.abs(m2 - m).max()
        m = m2
        if change < _CONVERGED:
            break
    else:
        raise QuadratureError(
            f"quadrature for {f.label!r} at k={k} did not converge after "
            f"{_MAX_DOUBLINGS} doublings (last change {change:.2e})"
        )
    return HermitianMatrix(m, 1.0 / k)


def toeplitz_z_closed_form(k: int) -> HermitianMatrix:
    """Exact quantization of the height function: ``diag((2j − k)/(k + 2))``."""
    k = int(k)
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    j = np.arange(k + 1)
    return HermitianMatrix.diag((2 * j - k) / (k + 2), 1.0 / k)


def product_system(factors, k: int | None = None) -> list:
    """Commuting operators ``Id ⊗ … ⊗ T(f_i) ⊗ … ⊗ Id`` on ``(CP¹)^d``.

    ``factors`` holds one entry per sphere: a :class:`Cp1Symbol`, a
    :class:`ToeplitzFamily` (then ``k`` selects its member), or an already
    built :class:`HermitianMatrix`. Operators are returned as
    :class:`TensorLocal`, which avoids forming the Kronecker products.
    """
    locals_ = []
    for fac in factors:
        if isinstance(fac, HermitianMatrix):
            locals_.append(fac)
            continue
        if isinstance(fac, ToeplitzFamily):
            if k is None or k not in fac.k_values:
                raise ValueError(f"k={k} is not among the family's k_values")
            locals_.append(toeplitz_matrix(fac.symbol, k, fac.subprincipal))
        else:
            if k is None:
                raise ValueError("k is required for bare symbols")
            locals_.append(toeplitz_matrix(fac, k))
    if not locals_:
        raise ValueError("need at least one factor")
    dims = tuple(m.dim for m in locals_)
    if len(set(dims)) != 1 or len({m.hbar for m in locals_}) != 1:
        raise ValueError("all factors must share k")
    total = int(np.prod(dims, dtype=np.int64))
    if total > MAX_PRODUCT_DIM:
        raise MemoryError(f"product space of dimension {total} exceeds the {MAX_PRODUCT_DIM} guard")
    return [TensorLocal(m, i, dims) for i, m in enumerate(locals_)]


def moment_normalize(cloud: JointSpectrumCloud) -> JointSpectrumCloud:
    """Map heights in ``[−1, 1]`` to ``[0, 2π]`` coordinatewise, ``μ = π(1 + u)``."""
    return cloud.mapped(lambda p: np.pi * (1.0 + p))
