"""``qspec``: joint spectra, axiom audits, convergence studies and polytope recovery from the shell.

Symbol grammar (for ``--symbol`` / ``--symbol2``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          integer exponents, right associative
    atom   := number | name | func '(' expr ')' | '(' expr ')'
    func   := cos | sin | exp | sqrt | abs

Variables are ``u`` (height) and ``phi`` (azimuth) on the sphere for
``toeplitz-cp1``, and ``x`` and ``xi`` on the cylinder for ``weyl-circle``.

Exit codes: 0 success (including audits whose verdict is negative),
2 configuration error, 3 computation error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .audit import (
    AuditError,
    PendulumEnergyBackend,
    SCHEMA,
    ToeplitzBackend,
    WeylBackend,
    audit_inf_spectrum,
    audit_nondegeneracy,
    audit_normalization,
    audit_product,
    audit_quasipositivity,
    audit_square,
    cap_bump,
    run_convergence,
    system_for,
)
from .files import (
    ArtifactError,
    points_csv,
    polyline_csv,
    read_points_csv,
    read_polyline_csv,
    render_svg,
)
from .geometry import LatticeFitError, delzant_check, recover_polytope
from .joint import JointSpectrumCloud, JointSpectrumError, joint_spectrum, joint_spectrum_random
from .operators import EigenSolverError, NotCommutingError
from .pendulum import PendulumConfig, classical_region, joint_spectrum_pendulum
from .symbols import SymbolError
from .toeplitz import Cp1Symbol, QuadratureError, moment_normalize, product_system, toeplitz_matrix
from .weyl import (
    CircleSymbol,
    TruncationError,
    WeylTruncation,
    pendulum_circle_spectrum,
    trusted_eigenvalues,
    weyl_matrix,
)

BACKENDS = ("toeplitz-cp1", "weyl-circle", "pendulum")
EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    backend: str | None = None
    symbol: str | None = None
    symbol2: str | None = None
    k: list = field(default_factory=list)
    hbar: list = field(default_factory=list)
    emax: float | None = None
    normalized: bool = False
    shift: float = 1.0
    mesh: float | None = None
    xi_max: float = 3.0
    points: str | None = None
    boundary: str | None = None
    out: str | None = None
    seed: int = 0
    skip_audits: bool = False
    crosscheck: bool = False

    def echo(self) -> dict:
        """The config as written into file headers; paths are reduced to file names."""
        d = asdict(self)
        for key in ("points", "boundary", "out"):
            if d[key] is not None:
                d[key] = os.path.basename(d[key])
        d["tool"] = f"qspec {__version__}"
        return d


# -- argument handling ---------------------------------------------------------


def _float_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"qspec: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qspec", description=__doc__.split("\n\n")[0],
                epilog=__doc__.split("\n\n", 1)[1], formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"qspec {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, symbols=True):
        sp.add_argument("--backend", choices=BACKENDS)
        if symbols:
            sp.add_argument("--symbol", help="principal symbol (see grammar)")
            sp.add_argument("--symbol2", help="second symbol; builds a d=2 product system on CP1 x CP1")
        sp.add_argument("--k", type=_int_list, default=[], help="comma list of k = 1/hbar (toeplitz-cp1)")
        sp.add_argument("--hbar", type=_float_list, default=[], help="comma list of hbar values")
        sp.add_argument("--emax", type=float, help="energy window top (pendulum, weyl-circle)")
        sp.add_argument("--normalized", action="store_true",
                        help="pendulum: energy shown as sqrt(E + shift); toeplitz-cp1: moment coordinates pi(1+u)")
        sp.add_argument("--shift", type=float, default=1.0)
        sp.add_argument("--mesh", type=float, help="region sampling step")
        sp.add_argument("--xi-max", dest="xi_max", type=float, default=3.0,
                        help="weyl-circle: cutoff window [-xi_max, xi_max]")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output path (stdout when omitted, where applicable)")

    js = sub.add_parser("jointspec", help="joint spectrum points CSV")
    common(js)
    js.add_argument("--crosscheck", action="store_true",
                    help="compare with the seeded random-combination method (dense systems only)")
    au = sub.add_parser("audit", help="axiom audit JSON")
    common(au)
    cv = sub.add_parser("converge", help="convergence report JSON + per-hbar CSV + SVG")
    common(cv)
    cv.add_argument("--skip-audits", dest="skip_audits", action="store_true")
    rc = sub.add_parser("recover", help="moment polytope JSON from a points CSV")
    rc.add_argument("--points", required=True)
    rc.add_argument("--k", type=_int_list, default=[])
    rc.add_argument("--out")
    pl = sub.add_parser("plot", help="SVG scatter of a points CSV")
    pl.add_argument("--points", required=True)
    pl.add_argument("--boundary")
    pl.add_argument("--out", required=True)
    bd = sub.add_parser("boundary", help="classical spectrum boundary polyline CSV")
    common(bd, symbols=False)
    return p


_COMMON_KEYS = ("backend", "symbol", "symbol2", "k", "hbar", "emax", "normalized", "shift", "mesh",
                "xi_max", "seed", "out")
_COMMAND_KEYS = {
    "jointspec": _COMMON_KEYS + ("crosscheck",),
    "audit": _COMMON_KEYS,
    "converge": _COMMON_KEYS + ("skip_audits",),
    "recover": ("points", "k", "out"),
    "plot": ("points", "boundary", "out"),
    "boundary": tuple(k for k in _COMMON_KEYS if k not in ("symbol", "symbol2")),
}


def argv_from_config(config: dict, directory: str | None = None) -> list:
    """Command line that reproduces a run from the config echoed in its output header.

    Paths in headers are bare file names; ``directory`` is prepended to them.
    """
    cmd = config["command"]
    defaults = RunConfig(cmd)
    argv = [cmd]
    for key in _COMMAND_KEYS[cmd]:
        val = config.get(key)
        if val is None or val == getattr(defaults, key):
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            argv.append(flag)
        elif isinstance(val, list):
            argv += [flag, ",".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in val)]
        elif key in ("points", "boundary", "out") and directory is not None:
            argv += [flag, os.path.join(directory, val)]
        else:
            argv += [flag, format(val, ".17g") if isinstance(val, float) else str(val)]
    return argv


def make_config(args) -> RunConfig:
    d = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
    cfg = RunConfig(**d)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Reject inconsistent configurations before any computation."""
    c = cfg.command
    if c in ("jointspec", "audit", "converge", "boundary") and cfg.backend is None:
        raise ConfigError("--backend is required")
    if any(k < 1 for k in cfg.k):
        raise ConfigError("--k values must be positive integers")
    if any(not (0 < h <= 1) for h in cfg.hbar):
        raise ConfigError("--hbar values must lie in (0, 1]")
    if cfg.mesh is not None and not cfg.mesh > 0:
        raise ConfigError("--mesh must be positive")
    if cfg.shift < 1:
        raise ConfigError("--shift must be >= 1")
    if cfg.emax is not None and not cfg.emax > -1:
        raise ConfigError("--emax must exceed -1")
    if c == "jointspec":
        if cfg.backend == "toeplitz-cp1":
            if not cfg.k:
                raise ConfigError("toeplitz-cp1 needs --k")
            if cfg.symbol is None:
                raise ConfigError("toeplitz-cp1 needs --symbol")
        elif cfg.backend == "weyl-circle":
            if not cfg.hbar:
                raise ConfigError("weyl-circle needs --hbar")
            if cfg.symbol2:
                raise ConfigError("weyl-circle supports a single symbol")
        elif cfg.backend == "pendulum" and not cfg.hbar:
            raise ConfigError("pendulum needs --hbar")
    if c in ("audit", "converge"):
        if cfg.backend == "toeplitz-cp1" and cfg.hbar:
            raise ConfigError("toeplitz-cp1 takes --k, not --hbar")
        if cfg.backend != "toeplitz-cp1" and cfg.k:
            raise ConfigError(f"{cfg.backend} takes --hbar, not --k")
        sweep = cfg.k or cfg.hbar
        if sweep and len(sweep) < 2:
            raise ConfigError("a sweep needs at least two values")
        if c == "converge" and cfg.backend == "toeplitz-cp1" and cfg.symbol not in (None, "u"):
            raise ConfigError("converge on toeplitz-cp1 uses the height system; --symbol must be 'u'")
    if c == "converge" and cfg.out is None:
        raise ConfigError("converge needs --out (a path prefix)")
    if c == "recover" and cfg.k and len(cfg.k) != 1:
        raise ConfigError("recover takes a single --k")
    if c == "boundary" and cfg.backend == "weyl-circle":
        raise ConfigError("boundary is available for pendulum and toeplitz-cp1")
    # symbols parse here so grammar errors are configuration errors
    if cfg.backend == "toeplitz-cp1":
        for s in (cfg.symbol, cfg.symbol2):
            if s is not None:
                Cp1Symbol.from_expression(s)
    elif cfg.backend == "weyl-circle":
        for s in (cfg.symbol, cfg.symbol2):
            if s is not None:
                CircleSymbol.from_expression(s, -cfg.xi_max, cfg.xi_max)


# -- commands ------------------------------------------------------------------


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _sorted_desc(vals):
    return sorted(set(vals), reverse=True)


def jointspec_clouds(cfg: RunConfig) -> list:
    if cfg.backend == "toeplitz-cp1":
        f = Cp1Symbol.from_expression(cfg.symbol)
        syms = [f] if cfg.symbol2 is None else [f, Cp1Symbol.from_expression(cfg.symbol2)]
        clouds = []
        for k in sorted(set(cfg.k)):
            ops = product_system(syms, k)
            cloud = joint_spectrum(ops)
            if cfg.crosscheck:
                _crosscheck(cloud, [op.to_matrix() for op in ops], cfg.seed)
            clouds.append(moment_normalize(cloud) if cfg.normalized else cloud)
        return clouds
    if cfg.backend == "weyl-circle":
        clouds = []
        for h in _sorted_desc(cfg.hbar):
            if cfg.symbol is None:
                e = pendulum_circle_spectrum(h, 2.0 if cfg.emax is None else cfg.emax)
            else:
                f = CircleSymbol.from_expression(cfg.symbol, -cfg.xi_max, cfg.xi_max)
                tr = WeylTruncation.covering(f, h)
                e = trusted_eigenvalues(weyl_matrix(f, tr), tr, (-cfg.xi_max, cfg.xi_max), cfg.emax)
            clouds.append(JointSpectrumCloud(e[:, None], np.ones(e.size, dtype=int), h))
        return clouds
    e_cap = 3.0 if cfg.emax is None else cfg.emax
    return [joint_spectrum_pendulum(PendulumConfig(h, e_cap, cfg.normalized, cfg.shift))
            for h in _sorted_desc(cfg.hbar)]


def _crosscheck(cloud, mats, seed):
    if mats[0].dim > 2000:
        raise ConfigError("--crosscheck is limited to dimension <= 2000")
    other = joint_spectrum_random(mats, seed=seed)
    if len(other) != len(cloud) or np.abs(other.points - cloud.points).max() > 1e-7:
        raise JointSpectrumError("random-combination cross-check disagrees with the primary path")


def cmd_jointspec(cfg: RunConfig) -> int:
    _emit(points_csv(jointspec_clouds(cfg), cfg.echo()), cfg.out)
    return EXIT_OK


def audit_report(cfg: RunConfig) -> dict:
    axioms = {}
    if cfg.backend == "toeplitz-cp1":
        be = ToeplitzBackend()
        hb = [1.0 / k for k in sorted(set(cfg.k))] or None
        f = cfg.symbol or "u"
        g = cfg.symbol2 or f
        axioms["q1"] = audit_normalization(be, hb)
        axioms["q2"] = audit_quasipositivity(be, "1-u", hb)
        axioms["q3"] = audit_nondegeneracy(be, cap_bump(), hb)
        axioms["q4"] = audit_product(be, f, g, hb)
        axioms["q5"] = audit_square(be, f, hb)
        axioms["inf_lemma"] = audit_inf_spectrum(be, f, hb)
    elif cfg.backend == "weyl-circle":
        be = WeylBackend(xi_max=cfg.xi_max, xi_trust=min(2.0, cfg.xi_max))
        hb = _sorted_desc(cfg.hbar) or None
        f = be.symbol(cfg.symbol) if cfg.symbol else CircleSymbol.cos_x()
        g = be.symbol(cfg.symbol2) if cfg.symbol2 else CircleSymbol.xi_power(1, -be.xi_max, be.xi_max)
        axioms["q1"] = audit_normalization(be, hb)
        axioms["q2"] = audit_quasipositivity(be, "cos(x)+1", hb)
        axioms["q3"] = audit_nondegeneracy(be, "(1+cos(x))/2", hb)
        axioms["q4"] = audit_product(be, f, g, hb)
        axioms["q5"] = audit_square(be, f, hb)
        axioms["inf_lemma"] = audit_inf_spectrum(be, "xi^2+cos(x)", hb)
    else:
        hb = _sorted_desc(cfg.hbar) or None
        axioms["inf_lemma"] = audit_inf_spectrum(PendulumEnergyBackend(), None, hb)
    return {
        "schema": SCHEMA,
        "backend": cfg.backend,
        "config": cfg.echo(),
        "axioms": {k: v.to_dict() for k, v in axioms.items()},
        "pass": all(v.passed for v in axioms.values()),
    }


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def cmd_audit(cfg: RunConfig) -> int:
    _emit(_json(audit_report(cfg)), cfg.out)
    return EXIT_OK


def _plot_cloud(clouds, limit=20000):
    """Smallest-ħ cloud that stays below ``limit`` points (the first one otherwise)."""
    pick = clouds[0]
    for c in clouds:
        if len(c) <= limit:
            pick = c
    return pick


def cmd_converge(cfg: RunConfig) -> int:
    e_cap = cfg.emax if cfg.emax is not None else (2.0 if cfg.backend == "weyl-circle" else 3.0)
    system = system_for(cfg.backend, [cfg.symbol, cfg.symbol2] if cfg.symbol2 else [],
                        e_cap, cfg.normalized, cfg.shift)
    if cfg.backend == "toeplitz-cp1":
        hb = [1.0 / k for k in sorted(set(cfg.k))] or None
    else:
        hb = _sorted_desc(cfg.hbar) or None
    rep = run_convergence(system, hb, mesh=cfg.mesh, with_audits=not cfg.skip_audits, config=cfg.echo())
    prefix = cfg.out
    _emit(rep.to_json(), prefix + ".json")
    lines = [*points_csv([], cfg.echo()).splitlines()[:-1], "hbar,distance,delta,size"]
    for h, d, e, s in zip(rep.hbars, rep.distances, rep.deltas, rep.sizes):
        lines.append(",".join([format(h, ".17g"), format(d, ".17g"), format(e, ".17g"), str(s)]))
    _emit("\n".join(lines) + "\n", prefix + ".csv")
    cloud = _plot_cloud(rep.clouds)
    bnd = rep.region.boundary if rep.region is not None and cloud.dim_d == 2 else []
    _emit(render_svg([cloud], bnd, title=f"{system.description}, hbar={cloud.hbar:.6g}"), prefix + ".svg")
    return EXIT_OK


def cmd_recover(cfg: RunConfig) -> int:
    clouds, meta = read_points_csv(cfg.points)
    cloud = clouds[-1]
    k = cfg.k[0] if cfg.k else int(round(1.0 / cloud.hbar))
    moment = False
    if meta.get("backend") == "toeplitz-cp1" and not meta.get("normalized", False):
        cloud, moment = moment_normalize(cloud), True
    poly = recover_polytope(cloud, k)
    g = poly.notes["affine"]
    out = {
        "schema": SCHEMA,
        "config": cfg.echo(),
        "source_config": meta,
        "k": k,
        "hbar": cloud.hbar,
        "moment_normalized": moment,
        "vertices": poly.vertices.tolist(),
        "lattice_vertices": None if poly.lattice_vertices is None else poly.lattice_vertices.tolist(),
        "edges": None if poly.edges is None else [list(e) for e in poly.edges],
        "snapped": poly.snapped,
        "lattice_scale": poly.lattice_scale.tolist(),
        "origin": poly.origin.tolist(),
        "affine_g": {"linear": g.linear.tolist(), "offset": g.offset.tolist(),
                     "deviation": g.deviation, "constant": g.constant},
        "residual": g.residual,
    }
    if cloud.dim_d == 2 and poly.snapped and not poly.degenerate:
        rep = delzant_check(poly)
        out["delzant"] = {"rational": rep.rational, "simple": rep.simple, "smooth": rep.smooth,
                          "pass": rep.passed, "vertices": rep.vertices}
    elif cloud.dim_d == 1:
        rep = delzant_check(poly) if poly.snapped else None
        out["delzant"] = None if rep is None else {"rational": rep.rational, "simple": rep.simple,
                                                   "smooth": rep.smooth, "pass": rep.passed}
    else:
        out["delzant"] = None
    _emit(_json(out), cfg.out)
    return EXIT_OK


def cmd_plot(cfg: RunConfig) -> int:
    clouds, _ = read_points_csv(cfg.points)
    boundary = read_polyline_csv(cfg.boundary)[0] if cfg.boundary else []
    _emit(render_svg(clouds, boundary), cfg.out)
    return EXIT_OK


def cmd_boundary(cfg: RunConfig) -> int:
    if cfg.backend == "pendulum":
        h = min(cfg.hbar) if cfg.hbar else 0.02
        pc = PendulumConfig(h, 3.0 if cfg.emax is None else cfg.emax, cfg.normalized, cfg.shift)
        polys = classical_region(pc, cfg.mesh).boundary
    else:
        lo, hi = (0.0, 2 * math.pi) if cfg.normalized else (-1.0, 1.0)
        polys = [np.array([[lo, lo], [hi, lo], [hi, hi], [lo, hi], [lo, lo]])]
    _emit(polyline_csv(polys, cfg.echo()), cfg.out)
    return EXIT_OK


COMMANDS = {
    "jointspec": cmd_jointspec,
    "audit": cmd_audit,
    "converge": cmd_converge,
    "recover": cmd_recover,
    "plot": cmd_plot,
    "boundary": cmd_boundary,
}

CONFIG_ERRORS = (ConfigError, SymbolError, ArtifactError, argparse.ArgumentTypeError)
COMPUTE_ERRORS = (AuditError, LatticeFitError, JointSpectrumError, EigenSolverError, NotCommutingError,
                  QuadratureError, TruncationError, MemoryError, ArithmeticError, ValueError, RuntimeError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = make_config(args)
        return COMMANDS[cfg.command](cfg)
    except CONFIG_ERRORS as exc:
        print(f"qspec: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"qspec: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except COMPUTE_ERRORS as exc:
        print(f"qspec: computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
