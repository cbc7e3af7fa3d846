"""Weyl quantization on the cylinder T*S¹, realized in the Fourier basis.

A symbol is a finite Fourier series ``f(x, ξ) = Σ_n g_n(ξ) e^{inx}``. On the
basis ``e^{imx}`` its Weyl quantization acts by

    Op_ħ(f) e^{imx} = Σ_n g_n(ħ(m + n/2)) e^{i(m+n)x},

so the matrix is banded and exact: no discretization error, only the
truncation ``|m| ≤ m_max``. Unbounded pieces such as ``ξ²`` are multiplied by
a smooth cutoff ``χ(ξ)`` which equals 1 on a window and tapers to 0 over a
width ``w`` on both sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .operators import HermitianMatrix, eig_hermitian
from .symbols import eval_symbol, parse_symbol, variables

__all__ = [
    "CircleSymbol",
    "TruncationError",
    "WeylTruncation",
    "cutoff",
    "pendulum_on_circle",
    "pendulum_symbol",
    "pendulum_circle_spectrum",
    "trusted_eigenvalues",
    "window_indices",
    "weyl_matrix",
]

TAPER = 2.0


class TruncationError(ValueError):
    """The Fourier truncation does not reach safely beyond the symbol's ξ-support."""


def cutoff(xi, lo: float, hi: float, width: float = TAPER):
    """C² cutoff: 1 on ``[lo, hi]``, quintic smoothstep down to 0 over ``width``."""
    xi = np.asarray(xi, dtype=float)
    s = np.clip(np.maximum(lo - xi, xi - hi) / width, 0.0, 1.0)
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


def _const(c):
    return lambda xi: np.full(np.shape(xi), c, dtype=complex)


@dataclass(frozen=True, eq=False)
class CircleSymbol:
    """``Σ_n g_n(ξ) e^{inx}``; ``modes[n]`` is ``g_n`` (vectorized, complex valued).

    ``window`` is the interval where the cutoff (if any) equals one, and the
    symbol vanishes outside ``[lo − taper, hi + taper]``. ``window=None`` means
    the symbol has no ξ-dependence that needs cutting off (e.g. ``cos x``).
    """

    modes: dict
    window: Optional[tuple] = None
    taper: float = TAPER
    label: str = "f"

    def __post_init__(self):
        for n in self.modes:
            if -n not in self.modes:
                raise ValueError(f"mode {n} has no partner {-n}; a real symbol needs both")

    @property
    def degree(self) -> int:
        return max((abs(n) for n in self.modes), default=0)

    def mode(self, n: int, xi) -> np.ndarray:
        g = self.modes.get(n)
        if g is None:
            return np.zeros(np.shape(xi), dtype=complex)
        return np.asarray(g(np.asarray(xi, dtype=float)), dtype=complex) * np.ones(np.shape(xi))

    def __call__(self, x, xi):
        x = np.asarray(x, dtype=float)
        out = 0.0
        for n in self.modes:
            out = out + self.mode(n, xi) * np.exp(1j * n * x)
        return np.real(out)

    def check_reality(self, xi=None, tol: float = 1e-12) -> bool:
        xi = np.linspace(-10, 10, 201) if xi is None else np.asarray(xi)
        return all(np.abs(self.mode(-n, xi) - np.conj(self.mode(n, xi))).max() <= tol for n in self.modes)

    # -- algebra ---------------------------------------------------------------

    def _support(self, other):
        if self.window is None:
            return other.window, other.taper
        if other.window is None:
            return self.window, self.taper
        lo = max(self.window[0], other.window[0])
        hi = min(self.window[1], other.window[1])
        return (lo, hi), min(self.taper, other.taper)

    def __add__(self, other):
        if not isinstance(other, CircleSymbol):
            other = CircleSymbol.constant(float(other))
        modes = {}
        for n in set(self.modes) | set(other.modes):
            a, b = self.modes.get(n), other.modes.get(n)
            if a is None or b is None:
                modes[n] = a or b
            else:
                modes[n] = (lambda a, b: lambda xi: a(xi) + b(xi))(a, b)
        windows = [w for w in (self.window, other.window) if w is not None]
        window = (min(w[0] for w in windows), max(w[1] for w in windows)) if windows else None
        return CircleSymbol(modes, window, min(self.taper, other.taper), f"({self.label})+({other.label})")

    __radd__ = __add__

    def __mul__(self, other):
        if not isinstance(other, CircleSymbol):
            c = float(other)
            modes = {n: (lambda g: lambda xi: c * g(xi))(g) for n, g in self.modes.items()}
            return CircleSymbol(modes, self.window, self.taper, f"{c}*({self.label})")
        modes = {}
        for a, ga in self.modes.items():
            for b, gb in other.modes.items():
                term = (lambda ga, gb: lambda xi: ga(xi) * gb(xi))(ga, gb)
                prev = modes.get(a + b)
                modes[a + b] = term if prev is None else (lambda p, t: lambda xi: p(xi) + t(xi))(prev, term)
        window, taper = self._support(other)
        return CircleSymbol(modes, window, taper, f"({self.label})*({other.label})")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, CircleSymbol) else -float(other))

    # -- constructors ----------------------------------------------------------

    @classmethod
    def constant(cls, c: float) -> "CircleSymbol":
        return cls({0: _const(complex(c))}, None, TAPER, repr(float(c)))

    @classmethod
    def cos_x(cls, n: int = 1) -> "CircleSymbol":
        return cls({n: _const(0.5), -n: _const(0.5)}, None, TAPER, f"cos({n}x)")

    @classmethod
    def sin_x(cls, n: int = 1) -> "CircleSymbol":
        return cls({n: _const(-0.5j), -n: _const(0.5j)}, None, TAPER, f"sin({n}x)")

    @classmethod
    def cutoff(cls, lo: float, hi: float, width: float = TAPER) -> "CircleSymbol":
        return cls({0: lambda xi: cutoff(xi, lo, hi, width) + 0j}, (lo, hi), width, f"chi[{lo},{hi}]")

    @classmethod
    def xi_power(cls, p: int, lo: float, hi: float, width: float = TAPER) -> "CircleSymbol":
        """``χ(ξ)·ξ^p`` with the cutoff flat on ``[lo, hi]``."""
        return cls({0: lambda xi: cutoff(xi, lo, hi, width) * xi ** p + 0j}, (lo, hi), width, f"chi*xi^{p}")

    @classmethod
    def from_function(cls, fn: Callable, lo: float, hi: float, degree: Optional[int] = None,
                      width: float = TAPER, label: str = "f") -> "CircleSymbol":
        """Cut off ``fn(x, ξ)`` to the window and expand it in x-Fourier modes.

        ``degree`` bounds the x-Fourier content; when omitted it is inferred by
        an FFT over 64 points in x and thresholding at 1e-12.
        """
        nx = 64
        xs = 2 * np.pi * np.arange(nx) / nx
        if degree is None:
            probe = np.linspace(lo - width, hi + width, 41)
            vals = np.broadcast_to(fn(xs[None, :], probe[:, None]), (probe.size, nx))
            coef = np.abs(np.fft.fft(vals, axis=1)).max(axis=0) / nx
            scale = max(1.0, np.abs(vals).max())
            big = [n for n in range(nx // 2) if coef[n] > 1e-12 * scale or coef[-n] > 1e-12 * scale]
            degree = max(big, default=0)
            if degree >= nx // 2 - 1:
                raise ValueError(f"symbol {label!r} is not a trigonometric polynomial in x of degree < 31")
        nx = max(nx, 4 * degree + 4)
        xs = 2 * np.pi * np.arange(nx) / nx

        def make(n):
            def g(xi):
                xi = np.asarray(xi, dtype=float)
                vals = np.asarray(fn(xs[None, :], xi.reshape(-1, 1)), dtype=float)
                vals = np.broadcast_to(vals, (xi.size, nx))
                c = np.fft.fft(vals, axis=1)[:, n % nx] / nx
                return (cutoff(xi.ravel(), lo, hi, width) * c).reshape(xi.shape)
            return g

        modes = {n: make(n) for n in range(-degree, degree + 1)}
        return cls(modes, (lo, hi), width, label)

    @classmethod
    def from_expression(cls, src: str, lo: float, hi: float, degree: Optional[int] = None,
                        width: float = TAPER) -> "CircleSymbol":
        tree = parse_symbol(src, "circle")
        if "x" not in variables(tree):
            degree = 0
        return cls.from_function(lambda x, xi: eval_symbol(tree, x=x, xi=xi), lo, hi, degree, width, src)


@dataclass(frozen=True)
class WeylTruncation:
    """Keep Fourier modes ``|m| ≤ m_max`` at semiclassical parameter ``hbar``."""

    m_max: int
    hbar: float

    def __post_init__(self):
        if self.m_max < 1 or not self.hbar > 0:
            raise ValueError("need m_max >= 1 and hbar > 0")

    @classmethod
    def covering(cls, f: CircleSymbol, hbar: float) -> "WeylTruncation":
        """Smallest truncation satisfying ``ħ·m_max ≥ max|ξ| + 3w`` for ``f``."""
        if f.window is None:
            return cls(max(1, f.degree), hbar)
        reach = max(abs(f.window[0]), abs(f.window[1])) + 3 * f.taper
        return cls(int(math.ceil(reach / hbar - 1e-9)), hbar)

    @property
    def dim(self) -> int:
        return 2 * self.m_max + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.m_max, self.m_max + 1)


def weyl_matrix(f: CircleSymbol, tr: WeylTruncation) -> HermitianMatrix:
    """Banded matrix of ``Op_ħ(f)`` on modes ``|m| ≤ m_max``.

    Entry ``(m + n, m)`` is ``g_n(ħ(m + n/2))``. The result is stored sparse.

    Raises
    ------
    TruncationError
        If ``ħ·m_max`` does not clear the symbol's ξ-support by ``3w``.
    """
    if f.window is not None:
        lo, hi = f.window
        reach = tr.hbar * tr.m_max
        if reach < hi + 3 * f.taper - 1e-9 or -reach > lo - 3 * f.taper + 1e-9:
            raise TruncationError(
                f"hbar*m_max = {reach:.4g} does not cover the symbol window [{lo}, {hi}] "
                f"plus 3*taper = {3 * f.taper}"
            )
    m = tr.indices
    rows, cols, vals = [], [], []
    for n in f.modes:
        src = m[(m + n >= -tr.m_max) & (m + n <= tr.m_max)]
        if src.size == 0:
            continue
        v = f.mode(n, tr.hbar * (src + 0.5 * n))
        keep = v != 0
        rows.append(src[keep] + n + tr.m_max)
        cols.append(src[keep] + tr.m_max)
        vals.append(v[keep])
    if rows:
        mat = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(tr.dim, tr.dim)
        )
    else:
        mat = sp.csr_matrix((tr.dim, tr.dim), dtype=complex)
    return HermitianMatrix(mat, tr.hbar)


def window_indices(tr: WeylTruncation, lo: float, hi: float) -> np.ndarray:
    """Positions (0-based) of the modes with ``ħm`` inside ``[lo, hi]``."""
    xi = tr.hbar * tr.indices
    return np.nonzero((xi >= lo) & (xi <= hi))[0]


def pendulum_symbol(window: tuple, width: float = TAPER) -> CircleSymbol:
    """``χ(ξ)·(ξ² + cos x)`` with χ flat on ``window``."""
    lo, hi = window
    modes = {
        0: lambda xi: cutoff(xi, lo, hi, width) * xi * xi + 0j,
        1: lambda xi: 0.5 * cutoff(xi, lo, hi, width) + 0j,
        -1: lambda xi: 0.5 * cutoff(xi, lo, hi, width) + 0j,
    }
    return CircleSymbol(modes, (lo, hi), width, "chi*(xi^2+cos(x))")


def pendulum_on_circle(hbar: float, window: tuple = (-3.0, 3.0)) -> HermitianMatrix:
    """Weyl quantization of the cut-off planar pendulum ``χ(ξ)(ξ² + cos x)``."""
    f = pendulum_symbol(window)
    return weyl_matrix(f, WeylTruncation.covering(f, hbar))


def trusted_eigenvalues(mat: HermitianMatrix, tr: WeylTruncation, window: tuple, upper: float | None = None):
    """Eigenvalues whose eigenvectors live mostly inside the flat window of the cutoff.

    States localized in the taper or beyond it are artifacts of the cutoff
    and truncation; an eigenvalue is kept when more than half of its
    eigenvector's weight sits on modes with ``ħm`` in ``window``.
    """
    m = mat.entries.tocsr() if mat.is_sparse else sp.csr_matrix(mat.entries)
    # identically zero rows (beyond the cutoff's support) decouple and carry no window weight
    live = np.nonzero(np.diff(m.indptr) > 0)[0]
    sub = HermitianMatrix(m[live][:, live], mat.hbar)
    dec = eig_hermitian(sub, upper=upper)
    inside = np.isin(live, window_indices(tr, *window))
    weight = (np.abs(dec.vectors[inside, :]) ** 2).sum(axis=0)
    return dec.values[weight > 0.5]


def pendulum_circle_spectrum(hbar: float, e_cap: float, split_parity: bool = True) -> np.ndarray:
    """Trusted pendulum eigenvalues ``≤ e_cap``; the window is sized from ``e_cap``.

    The symbol is even under ``ξ → −ξ``, so by default the matrix is split
    into its even and odd parts under ``m → −m``; this removes the nearly
    degenerate pairs of rotating states and halves both problems.
    """
    xi_top = math.sqrt(max(e_cap, -1.0) + 1.0) + 1.0
    window = (-xi_top, xi_top)
    f = pendulum_symbol(window)
    tr = WeylTruncation.covering(f, hbar)
    if not split_parity:
        return trusted_eigenvalues(weyl_matrix(f, tr), tr, window, upper=e_cap)
    m = np.arange(0, tr.m_max + 1)
    d = np.real(f.mode(0, hbar * m))
    c = np.real(f.mode(1, hbar * (m[:-1] + 0.5)))  # coupling between m and m + 1
    live = np.nonzero((d != 0) | np.concatenate([c != 0, [False]]) | np.concatenate([[False], c != 0]))[0]
    top = int(live.max()) + 1 if live.size else 1
    d, c, m = d[:top], c[:top - 1], m[:top]
    in_win = (hbar * m >= window[0]) & (hbar * m <= window[1])
    out = []
    # even: e_0 and (e_m + e_−m)/√2; odd: (e_m − e_−m)/√2 for m ≥ 1
    for diag, off, win in ((d, np.concatenate([[math.sqrt(2.0) * c[0]], c[1:]]) if c.size else c, in_win),
                           (d[1:], c[1:], in_win[1:])):
        if diag.size == 0:
            continue
        vals, vecs = eigh_tridiagonal(diag, off)
        keep = vals <= e_cap
        vals, vecs = vals[keep], vecs[:, keep]
        weight = (vecs[win, :] ** 2).sum(axis=0)
        out.append(vals[weight > 0.5])
    return np.sort(np.concatenate(out))
