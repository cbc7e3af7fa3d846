"""Empirical checks of the quantization axioms and of spectral convergence.

Each audit sweeps a backend over a decreasing list of ``ħ`` values, records
one defect norm per ``ħ`` and fits ``log norm ≈ slope·log ħ + intercept`` on
the values above the roundoff floor.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import ClassicalSpectrumModel, box_region, hausdorff_to_region
from .joint import JointSpectrumCloud, joint_spectrum
from .operators import HermitianMatrix, matrix_norm, min_eigenvalue, op_norm
from .pendulum import PendulumConfig, classical_region, ground_energy, joint_spectrum_pendulum
from .toeplitz import Cp1Symbol, product_system, toeplitz_matrix
from .weyl import (
    CircleSymbol,
    WeylTruncation,
    pendulum_circle_spectrum,
    weyl_matrix,
    window_indices,
)

__all__ = [
    "AuditError",
    "CirclePendulumSystem",
    "Cp1HeightSystem",
    "Cp1SquareSystem",
    "PendulumSystem",
    "AuditResult",
    "ConvergenceReport",
    "PendulumEnergyBackend",
    "PerturbedBackend",
    "RateFit",
    "ToeplitzBackend",
    "WeylBackend",
    "audit_inf_spectrum",
    "cap_bump",
    "audit_nondegeneracy",
    "audit_normalization",
    "audit_product",
    "audit_quasipositivity",
    "audit_square",
    "default_hbars",
    "fit_rate",
    "run_convergence",
    "system_for",
]

SCHEMA = "qspec/1"
NORM_FLOOR = 1e-14
SLOPE_BAND = (0.8, 1.2)
R2_MIN = 0.95
NONDEGENERACY_HBAR = 0.05
TOEPLITZ_KS = (10, 20, 40, 80, 160, 320)
WEYL_HBARS = tuple(1.0 / n for n in (20, 40, 80, 160, 320))


class AuditError(RuntimeError):
    """A stage of an audit or convergence run failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


# -- rate fits -----------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    hbars: tuple
    norms: tuple
    slope: float
    intercept: float
    r2: float
    floor: float = NORM_FLOOR

    @property
    def used(self) -> tuple:
        return tuple(n > self.floor for n in self.norms)

    @property
    def n_used(self) -> int:
        return sum(self.used)

    @property
    def all_floor(self) -> bool:
        return self.n_used == 0

    def to_dict(self) -> dict:
        return {
            "hbars": list(self.hbars),
            "norms": list(self.norms),
            "slope": _finite_or_none(self.slope),
            "intercept": _finite_or_none(self.intercept),
            "r2": _finite_or_none(self.r2),
            "floor": self.floor,
            "floored": [h for h, u in zip(self.hbars, self.used) if not u],
        }


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def fit_rate(hbars, norms, floor: float = NORM_FLOOR) -> RateFit:
    """Least-squares line through ``(log ħ, log norm)`` for norms above ``floor``.

    With fewer than two usable points slope, intercept and r2 are NaN.
    """
    h = np.asarray(hbars, dtype=float)
    v = np.asarray(norms, dtype=float)
    if h.shape != v.shape or h.size == 0:
        raise ValueError("need matching, non-empty hbar and norm lists")
    if np.any(np.diff(h) >= 0):
        raise ValueError("hbars must be strictly decreasing")
    if np.any(v < 0):
        raise ValueError("norms must be nonnegative")
    use = v > floor
    slope = intercept = r2 = float("nan")
    if use.sum() >= 2:
        x, y = np.log(h[use]), np.log(v[use])
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss = float(((y - y.mean()) ** 2).sum())
        r2 = 1.0 - float((resid ** 2).sum()) / ss if ss > 0 else 1.0
        r2 = min(1.0, max(0.0, r2))
    return RateFit(tuple(float(a) for a in h), tuple(float(a) for a in v), float(slope), float(intercept),
                   float(r2), floor)


@dataclass(frozen=True)
class AuditResult:
    """Outcome of one axiom audit: the raw sweep, the fit and a verdict."""

    axiom: str
    fit: RateFit
    passed: bool
    criterion: str
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = self.fit.to_dict()
        d.update({"pass": bool(self.passed), "criterion": self.criterion})
        d.update(self.extra)
        return d


def _in_band(slope: float, band=SLOPE_BAND) -> bool:
    return math.isfinite(slope) and band[0] <= slope <= band[1]


# -- backends ------------------------------------------------------------------


class ToeplitzBackend:
    """Berezin–Toeplitz operators on CP¹ at ``ħ = 1/k``."""

    name = "toeplitz-cp1"

    def symbol(self, f) -> Cp1Symbol:
        if isinstance(f, Cp1Symbol):
            return f
        if isinstance(f, (int, float)):
            return Cp1Symbol.constant(float(f))
        return Cp1Symbol.from_expression(str(f))

    def k_of(self, hbar: float) -> int:
        k = int(round(1.0 / hbar))
        if abs(1.0 / k - hbar) > 1e-12 * hbar:
            raise ValueError(f"hbar = {hbar} is not of the form 1/k")
        return k

    def quantize(self, f, hbar: float) -> HermitianMatrix:
        return toeplitz_matrix(self.symbol(f), self.k_of(hbar))

    def product(self, f, g):
        return self.symbol(f) * self.symbol(g)

    def identity(self, hbar: float) -> np.ndarray:
        return np.eye(self.k_of(hbar) + 1)

    def compress(self, m, hbar: float) -> np.ndarray:
        return np.asarray(m)

    def sup(self, f) -> float:
        f = self.symbol(f)
        u, p = np.meshgrid(np.linspace(-1, 1, 401), np.linspace(0, 2 * np.pi, 128, endpoint=False))
        return float(np.abs(f(u, p)).max())

    def inf(self, f) -> float:
        f = self.symbol(f)
        u, p = np.meshgrid(np.linspace(-1, 1, 2001), np.linspace(0, 2 * np.pi, 128, endpoint=False))
        return float(f(u, p).min())

    def default_hbars(self):
        return tuple(1.0 / k for k in TOEPLITZ_KS)


class WeylBackend:
    """Weyl quantization on T*S¹, with defects measured on a trusted ξ-window.

    Symbols without a cutoff of their own are quantized on modes reaching
    ``ħ|m| ≤ xi_max + 3w``. Defect matrices are compressed to modes with
    ``ħ|m| ≤ xi_trust`` before taking norms, so edge artefacts of the
    Fourier truncation do not enter the audit.
    """

    name = "weyl-circle"

    def __init__(self, xi_max: float = 3.0, xi_trust: float = 2.0, taper: float = 2.0):
        if not 0 < xi_trust <= xi_max:
            raise ValueError("need 0 < xi_trust <= xi_max")
        self.xi_max, self.xi_trust, self.taper = float(xi_max), float(xi_trust), float(taper)

    def symbol(self, f) -> CircleSymbol:
        if isinstance(f, CircleSymbol):
            return f
        if isinstance(f, (int, float)):
            return CircleSymbol.constant(float(f))
        return CircleSymbol.from_expression(str(f), -self.xi_max, self.xi_max, width=self.taper)

    def truncation(self, hbar: float) -> WeylTruncation:
        return WeylTruncation(int(math.ceil((self.xi_max + 3 * self.taper) / hbar - 1e-9)), hbar)

    def quantize(self, f, hbar: float) -> HermitianMatrix:
        return weyl_matrix(self.symbol(f), self.truncation(hbar))

    def product(self, f, g):
        return self.symbol(f) * self.symbol(g)

    def identity(self, hbar: float):
        import scipy.sparse as sp
        return sp.identity(self.truncation(hbar).dim, format="csr")

    def compress(self, m, hbar: float):
        idx = window_indices(self.truncation(hbar), -self.xi_trust, self.xi_trust)
        return m[idx][:, idx]

    def _grid(self):
        x = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        xi = np.linspace(-self.xi_max - self.taper, self.xi_max + self.taper, 801)
        return np.meshgrid(x, xi)

    def sup(self, f) -> float:
        return float(np.abs(self.symbol(f)(*self._grid())).max())

    def inf(self, f) -> float:
        return float(self.symbol(f)(*self._grid()).min())

    def default_hbars(self):
        return WEYL_HBARS


class PerturbedBackend(ToeplitzBackend):
    """Test double: Toeplitz operators plus ``ħ·E`` for a fixed seeded Hermitian ``E``."""

    name = "perturbed-toeplitz"

    def __init__(self, seed: int = 0, strength: float = 1.0):
        self.seed, self.strength = seed, strength

    def quantize(self, f, hbar: float) -> HermitianMatrix:
        base = super().quantize(f, hbar).dense()
        rng = np.random.default_rng(self.seed)
        a = rng.standard_normal(base.shape) + 1j * rng.standard_normal(base.shape)
        e = (a + a.conj().T) / (2 * np.sqrt(base.shape[0]))
        return HermitianMatrix(base + self.strength * hbar * e, hbar)


class PendulumEnergyBackend:
    """Energy operator of the quantum spherical pendulum; only the bottom of its spectrum is audited."""

    name = "pendulum"

    def lowest(self, hbar: float) -> float:
        return ground_energy(hbar)

    def inf(self, f=None) -> float:
        return -1.0

    def default_hbars(self):
        return WEYL_HBARS


def cap_bump(center: float = 0.5, radius: float = 0.4) -> Cp1Symbol:
    """Smooth bump of height 1 supported in the cap ``|u − center| < radius``."""

    def f(u, phi):
        s = (np.asarray(u, dtype=float) - center) / radius
        inside = np.abs(s) < 1
        out = np.zeros(np.broadcast(u, phi).shape)
        s = np.broadcast_to(s, out.shape)
        inside = np.broadcast_to(inside, out.shape)
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out

    return Cp1Symbol(f, 0, 1.0, None, f"bump(u; {center}, {radius})", (center - radius, center + radius))


def _hbars(backend, hbars):
    hb = backend.default_hbars() if hbars is None else tuple(float(h) for h in hbars)
    if len(hb) < 2 or any(b >= a for a, b in zip(hb, hb[1:])):
        raise ValueError("need at least two strictly decreasing hbar values")
    return hb


def _defect(backend, a, b, hbar):
    d = backend.compress(a, hbar) - backend.compress(b, hbar)
    return matrix_norm(d)


# -- axiom audits --------------------------------------------------------------


def audit_normalization(backend, hbars=None) -> AuditResult:
    """Q1: ``‖Op(1) − Id‖`` per ``ħ``. Passes at the floor or with slope ≥ 0.8."""
    hb = _hbars(backend, hbars)
    norms = []
    for h in hb:
        op = backend.quantize(1.0, h)
        entries = op.entries
        norms.append(_defect(backend, entries, backend.identity(h), h))
    fit = fit_rate(hb, norms)
    ok = fit.all_floor or (fit.slope >= SLOPE_BAND[0])
    return AuditResult("q1", fit, ok, "all norms at floor, or slope >= 0.8")


def audit_quasipositivity(backend, f, hbars=None, check_sign: bool = True) -> AuditResult:
    """Q2: negative part ``max(0, −λ_min(Op f))`` for ``f ≥ 0``.

    The envelope constant ``C = max negpart/ħ`` is reported; the audit passes
    when the negative parts are at the floor or decay at least like ``ħ^0.8``.
    """
    hb = _hbars(backend, hbars)
    if check_sign and backend.inf(f) < -1e-12:
        raise ValueError("quasi-positivity audit needs a nonnegative symbol")
    neg = [max(0.0, -min_eigenvalue(_restricted(backend, f, h))) for h in hb]
    fit = fit_rate(hb, neg)
    env = max(n / h for n, h in zip(neg, hb))
    ok = fit.all_floor or fit.slope >= SLOPE_BAND[0]
    return AuditResult("q2", fit, ok, "negative part at floor, or slope >= 0.8", {"envelope_C": env})


def _restricted(backend, f, hbar):
    m = backend.quantize(f, hbar)
    if isinstance(backend, WeylBackend):
        return HermitianMatrix(backend.compress(m.entries, hbar), hbar)
    return m


def audit_nondegeneracy(backend, f, hbars=None, below: float = NONDEGENERACY_HBAR) -> AuditResult:
    """Q3: ``min_{ħ ≤ below} ‖Op(f)‖`` must be at least ``½·sup|f|``."""
    hb = _hbars(backend, hbars)
    sup = backend.sup(f)
    if sup == 0.0:
        raise ValueError("non-degeneracy audit is vacuous for f = 0")
    norms = [op_norm(backend.quantize(f, h)) for h in hb]
    tail = [n for n, h in zip(norms, hb) if h <= below + 1e-15]
    if not tail:
        raise ValueError(f"no hbar <= {below} in the sweep")
    liminf = min(tail)
    fit = fit_rate(hb, norms)
    return AuditResult("q3", fit, liminf >= 0.5 * sup, f"min norm over hbar <= {below} >= sup|f|/2",
                       {"liminf_proxy": liminf, "sup_f": sup})


def audit_product(backend, f, g, hbars=None, axiom: str = "q4") -> AuditResult:
    """Q4: ``‖Op(f)Op(g) − Op(fg)‖`` per ``ħ``; slope must lie in [0.8, 1.2].

    A sweep entirely at the floor (the formula holds exactly) passes with
    ``exact = True``; the band flag is reported separately.
    """
    hb = _hbars(backend, hbars)
    norms = []
    for h in hb:
        a = backend.quantize(f, h).entries
        b = backend.quantize(g, h).entries
        c = backend.quantize(backend.product(f, g), h).entries
        norms.append(_defect(backend, a @ b, c, h))
    fit = fit_rate(hb, norms)
    in_band = _in_band(fit.slope)
    exact = fit.all_floor
    return AuditResult(axiom, fit, in_band or exact, "slope in [0.8, 1.2], or all norms at floor",
                       {"in_band": in_band, "exact": exact})


def audit_square(backend, f, hbars=None) -> AuditResult:
    """Q5: :func:`audit_product` with ``g = f``."""
    return audit_product(backend, f, f, hbars, axiom="q5")


def audit_inf_spectrum(backend, f=None, hbars=None) -> AuditResult:
    """Gap ``|λ_min(ħ) − inf f|``; must shrink monotonically over the sweep."""
    hb = _hbars(backend, hbars)
    target = backend.inf(f)
    if isinstance(backend, PendulumEnergyBackend):
        lows = [backend.lowest(h) for h in hb]
    else:
        lows = [min_eigenvalue(_restricted(backend, f, h)) for h in hb]
    gaps = [abs(lo - target) for lo in lows]
    fit = fit_rate(hb, gaps)
    tol = 1e-12
    decreasing = all(b <= a + tol for a, b in zip(gaps, gaps[1:]))
    ok = fit.all_floor or (decreasing and gaps[-1] < gaps[0])
    return AuditResult("inf_lemma", fit, ok, "gap non-increasing and shrinking over the sweep",
                       {"inf_f": target, "lambda_min": lows})


# -- convergence harness -------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    backend: str
    system: str
    hbars: tuple
    distances: tuple
    deltas: tuple
    sizes: tuple
    monotone: bool
    strictly_decreasing: bool
    fit: RateFit
    audits: dict
    tolerances: dict
    config: dict = field(default_factory=dict)
    clouds: tuple = field(default=(), repr=False, compare=False)
    region: Optional[ClassicalSpectrumModel] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "backend": self.backend,
            "system": self.system,
            "config": self.config,
            "tolerances": self.tolerances,
            "per_hbar": [
                {"hbar": h, "distance": d, "delta": e, "size": s}
                for h, d, e, s in zip(self.hbars, self.distances, self.deltas, self.sizes)
            ],
            "monotone_within_delta": self.monotone,
            "strictly_decreasing": self.strictly_decreasing,
            "rate": self.fit.to_dict(),
            "axioms": {k: v.to_dict() for k, v in self.audits.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


class _System:
    backend = ""
    description = ""

    def cloud(self, hbar: float) -> JointSpectrumCloud:
        raise NotImplementedError

    def region(self, mesh: float) -> ClassicalSpectrumModel:
        raise NotImplementedError

    def default_hbars(self):
        raise NotImplementedError

    def audits(self, hbars) -> dict:
        return {}


class Cp1HeightSystem(_System):
    """``T_k(u)`` on CP¹ against the segment ``[−1, 1]``."""

    backend = "toeplitz-cp1"
    description = "height function u on CP1"

    def cloud(self, hbar):
        k = ToeplitzBackend().k_of(hbar)
        return joint_spectrum([toeplitz_matrix(Cp1Symbol.height(), k)])

    def region(self, mesh):
        return box_region([-1.0], [1.0], mesh)

    def default_hbars(self):
        return ToeplitzBackend().default_hbars()

    def audits(self, hbars):
        be = ToeplitzBackend()
        return {
            "q1": audit_normalization(be, hbars),
            "q4": audit_product(be, "u", "u", hbars),
            "q5": audit_square(be, "u", hbars),
            "inf_lemma": audit_inf_spectrum(be, "u", hbars),
        }


class Cp1SquareSystem(Cp1HeightSystem):
    """``(T_k(u) ⊗ 1, 1 ⊗ T_k(u))`` on CP¹ × CP¹ against the square ``[−1, 1]²``."""

    description = "heights (u1, u2) on CP1 x CP1"

    def cloud(self, hbar):
        k = ToeplitzBackend().k_of(hbar)
        return joint_spectrum(product_system([Cp1Symbol.height(), Cp1Symbol.height()], k))

    def region(self, mesh):
        return box_region([-1.0, -1.0], [1.0, 1.0], mesh)


class PendulumSystem(_System):
    """Quantum spherical pendulum ``(Ĵ, Ĥ)`` with energies capped at ``e_cap``."""

    backend = "pendulum"

    def __init__(self, e_cap: float = 3.0, normalized: bool = False, shift: float = 1.0):
        self.e_cap, self.normalized, self.shift = float(e_cap), bool(normalized), float(shift)
        self.description = f"spherical pendulum (J, H), H <= {self.e_cap}" + (
            f", energy shown as sqrt(H + {self.shift})" if normalized else "")

    def config(self, hbar):
        return PendulumConfig(hbar, self.e_cap, self.normalized, self.shift)

    def cloud(self, hbar):
        return joint_spectrum_pendulum(self.config(hbar))

    def region(self, mesh):
        return classical_region(self.config(1.0), mesh)

    def default_hbars(self):
        return (0.7, 0.5, 0.3, 0.05, 0.02)

    def audits(self, hbars):
        return {"inf_lemma": audit_inf_spectrum(PendulumEnergyBackend(), None, WEYL_HBARS)}


class CirclePendulumSystem(_System):
    """Weyl-quantized ``ξ² + cos x`` on T*S¹, trusted eigenvalues ``≤ e_cap``, against ``[−1, e_cap]``."""

    backend = "weyl-circle"

    def __init__(self, e_cap: float = 2.0):
        self.e_cap = float(e_cap)
        self.description = f"planar pendulum xi^2 + cos(x), E <= {self.e_cap}"

    def cloud(self, hbar):
        e = pendulum_circle_spectrum(hbar, self.e_cap)
        return JointSpectrumCloud(e[:, None], np.ones(e.size, dtype=int), hbar)

    def region(self, mesh):
        return box_region([-1.0], [self.e_cap], mesh)

    def default_hbars(self):
        return WEYL_HBARS

    def audits(self, hbars):
        be = WeylBackend()
        xi = CircleSymbol.xi_power(1, -be.xi_max, be.xi_max)
        return {
            "q1": audit_normalization(be, hbars),
            "q4": audit_product(be, CircleSymbol.cos_x(), xi, hbars),
            "q5": audit_square(be, CircleSymbol.cos_x(), hbars),
        }


def system_for(backend: str, symbols=(), e_cap: float = 3.0, normalized: bool = False, shift: float = 1.0):
    """Built-in convergence systems keyed by backend id."""
    if backend == "toeplitz-cp1":
        return Cp1SquareSystem() if len(symbols) >= 2 else Cp1HeightSystem()
    if backend == "pendulum":
        return PendulumSystem(e_cap, normalized, shift)
    if backend == "weyl-circle":
        return CirclePendulumSystem(e_cap)
    raise ValueError(f"unknown backend {backend!r}")


def default_hbars(backend: str):
    return system_for(backend).default_hbars()


def run_convergence(system, hbars=None, region: Optional[ClassicalSpectrumModel] = None,
                    mesh: Optional[float] = None, with_audits: bool = True,
                    config: Optional[dict] = None) -> ConvergenceReport:
    """Clouds, distances to the classical spectrum and axiom audits over a ħ sweep.

    The region mesh defaults to ``min(0.01, ħ_min/2)``. ``monotone`` allows
    increases up to the mesh; ``strictly_decreasing`` does not.
    """
    hb = tuple(float(h) for h in (system.default_hbars() if hbars is None else hbars))
    if len(hb) < 2 or any(b >= a for a, b in zip(hb, hb[1:])):
        raise AuditError("config", "need at least two strictly decreasing hbar values")
    if region is None:
        mesh = min(0.01, hb[-1] / 2) if mesh is None else float(mesh)
        try:
            region = system.region(mesh)
        except Exception as exc:  # noqa: BLE001 - tag and re-raise
            raise AuditError("region", str(exc)) from exc
    dists, deltas, sizes, clouds = [], [], [], []
    for h in hb:
        try:
            cloud = system.cloud(h)
        except Exception as exc:  # noqa: BLE001
            raise AuditError("spectrum", f"hbar={h}: {exc}") from exc
        if len(cloud) == 0:
            raise AuditError("spectrum", f"hbar={h}: empty joint spectrum in the window")
        clouds.append(cloud)
        d, delta = hausdorff_to_region(cloud, region)
        dists.append(d)
        deltas.append(delta)
        sizes.append(int(cloud.total))
    monotone = all(b <= a + e for a, b, e in zip(dists, dists[1:], deltas[1:]))
    strict = all(b < a for a, b in zip(dists, dists[1:]))
    audits = {}
    if with_audits:
        try:
            audits = system.audits(None)
        except Exception as exc:  # noqa: BLE001
            raise AuditError("audit", str(exc)) from exc
    tolerances = {
        "mesh": region.mesh,
        "norm_floor": NORM_FLOOR,
        "slope_band": list(SLOPE_BAND),
        "r2_min": R2_MIN,
        "nondegeneracy_hbar": NONDEGENERACY_HBAR,
        "hermitian_tol": 1e-12,
        "cluster_tol": "1e-8*(1+||T1||)",
    }
    return ConvergenceReport(system.backend, system.description, hb, tuple(dists), tuple(deltas),
                             tuple(sizes), monotone, strict, fit_rate(hb, dists), audits, tolerances,
                             dict(config or {}), tuple(clouds), region)


