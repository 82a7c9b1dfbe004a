"""Experiment driver: YAML-configured runs behind a small CLI.

Subcommands

    forms       assemble and dump the reference quadratic forms
    energy      scaled total energy of a deformation at one level
    limit       plate-limit functionals of the configured field
    recover     build and store a recovery deformation
    converge    sweep levels and report scaled energies against the limit
    strain      sweep levels and report strain-moment gaps
    minimize    gradient descent on the scaled total energy
    identities  exact rational coefficient checks (needs no config)

Exit codes: 0 ok, 2 configuration problems, 3 numeric failures, 4 I/O.
All numeric reductions are fixed-order, so output value columns are
byte-identical across runs and --threads settings; wall_ms is the one
timing-dependent column.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np
import yaml

from .energy import AtomisticModel, e_total, e_total_gradient, in_s_delta
from .lattice import FilmConfig
from .limits import (
    Quadrature,
    TrigDisplacement,
    TrigForce,
    PolyDisplacement,
    coefficient_identities,
    e_vk,
    e_vk_nu,
    e_vk_nu_decoupled,
)
from .potentials import (
    MassSpring,
    NonPenParams,
    PairLaw,
    PenaltyParams,
    PenalizedLaw,
    lennard_jones,
    lennard_jones_deriv,
    quadratic_well,
    quadratic_well_deriv,
)
from .quadforms import assemble_forms
from .recovery import (
    build_recovery,
    scaled_energy_gap,
    strain_moment_report,
)

SCHEMA_GAP = "vkgap-1"
GAP_COLUMNS = ("schema", "eps", "nu", "h", "e_scaled", "e_limit", "gap_abs",
               "gap_rel", "max_dist", "i_over_h4", "wall_ms")
SCHEMA_MOMENT = "vkmom-1"
MOMENT_COLUMNS = ("schema", "eps", "nu", "h", "moment_gap", "wall_ms")
SCHEMA_TRACE = "vktrace-1"
TRACE_COLUMNS = ("schema", "iter", "energy", "grad_norm", "step")


class ConfigError(Exception):
    """Bad or missing configuration."""


class NumericError(Exception):
    """Numeric failure during a run (divergence, failed line search, ...)."""


# ---------------------------------------------------------------------------
# configuration

def _check_keys(d: dict, allowed, where: str):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys {unknown} in {where} (allowed: {sorted(allowed)})")


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing required key {key!r} in {where}")
    return d[key]


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path} must hold a mapping at top level")
    _check_keys(cfg, {"model", "field", "force", "film", "sweep", "level",
                      "quadrature", "minimize", "energy", "run"}, path)
    return cfg


def build_model(cfg: dict) -> AtomisticModel:
    mcfg = _need(cfg, "model", "config")
    _check_keys(mcfg, {"kind", "alpha", "beta", "penalty", "nonpen", "delta_adm"}, "model")
    kind = _need(mcfg, "kind", "model")
    alpha = float(mcfg.get("alpha", 1.0))
    beta = float(mcfg.get("beta", 1.0))
    try:
        if kind == "mass_spring":
            law = MassSpring(alpha=alpha, beta=beta)
        elif kind == "lj_pair":
            law = PairLaw(alpha=alpha, beta=beta)
        elif kind == "quadratic_pair":
            law = PairLaw(v1=quadratic_well, v2=quadratic_well,
                          dv1=quadratic_well_deriv, dv2=quadratic_well_deriv,
                          alpha=alpha, beta=beta)
        else:
            raise ConfigError(f"unknown model kind {kind!r}")
        bulk = law
        if "penalty" in mcfg and mcfg["penalty"] is not None:
            pcfg = mcfg["penalty"]
            _check_keys(pcfg, {"c", "r0", "r1"}, "model.penalty")
            bulk = PenalizedLaw(law, PenaltyParams(
                c=float(pcfg.get("c", 1.0)),
                r0=float(pcfg.get("r0", 0.0)),
                r1=float(pcfg.get("r1", 0.5))))
        nonpen = None
        if "nonpen" in mcfg and mcfg["nonpen"] is not None:
            ncfg = mcfg["nonpen"]
            _check_keys(ncfg, {"gamma", "delta"}, "model.nonpen")
            nonpen = NonPenParams(gamma=float(ncfg.get("gamma", 1.0)),
                                  delta=float(ncfg.get("delta", 0.25)))
        delta_adm = mcfg.get("delta_adm")
        return AtomisticModel(bulk=bulk, surface=law, nonpen=nonpen,
                              delta_adm=None if delta_adm is None else float(delta_adm))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _trig_terms(entries, where: str):
    out = []
    for e in entries or ():
        _check_keys(e, {"amp", "kx", "ky", "px", "py"}, where)
        out.append((float(_need(e, "amp", where)), float(e.get("kx", 0.0)),
                    float(e.get("ky", 0.0)), float(e.get("px", 0.0)),
                    float(e.get("py", 0.0))))
    return tuple(out)


def _poly_terms(entries, where: str):
    out = []
    for e in entries or ():
        _check_keys(e, {"i", "j", "c"}, where)
        out.append((int(e.get("i", 0)), int(e.get("j", 0)), float(_need(e, "c", where))))
    return tuple(out)


def _freq_unit(fcfg: dict, where: str) -> float:
    freq = fcfg.get("frequencies", "pi")
    if freq == "pi":
        return math.pi
    if freq == "raw":
        return 1.0
    raise ConfigError(f"{where}.frequencies must be 'pi' or 'raw', got {freq!r}")


def build_field(cfg: dict):
    fcfg = _need(cfg, "field", "config")
    _check_keys(fcfg, {"kind", "frequencies", "u1", "u2", "v"}, "field")
    kind = fcfg.get("kind", "trig")
    if kind == "trig":
        return TrigDisplacement(
            u1=_trig_terms(fcfg.get("u1"), "field.u1"),
            u2=_trig_terms(fcfg.get("u2"), "field.u2"),
            v=_trig_terms(fcfg.get("v"), "field.v"),
            freq_unit=_freq_unit(fcfg, "field"))
    if kind == "poly":
        if "frequencies" in fcfg:
            raise ConfigError("field.frequencies applies to trig fields only")
        return PolyDisplacement(
            u1=_poly_terms(fcfg.get("u1"), "field.u1"),
            u2=_poly_terms(fcfg.get("u2"), "field.u2"),
            v=_poly_terms(fcfg.get("v"), "field.v"))
    raise ConfigError(f"unknown field kind {kind!r}")


def build_force(cfg: dict):
    fcfg = cfg.get("force")
    if fcfg is None:
        return None
    _check_keys(fcfg, {"frequencies", "f1", "f2", "f3"}, "force")
    return TrigForce(
        f1=_trig_terms(fcfg.get("f1"), "force.f1"),
        f2=_trig_terms(fcfg.get("f2"), "force.f2"),
        f3=_trig_terms(fcfg.get("f3"), "force.f3"),
        freq_unit=_freq_unit(fcfg, "force"))


def film_lengths(cfg: dict) -> tuple[float, float]:
    fcfg = cfg.get("film") or {}
    _check_keys(fcfg, {"l1", "l2"}, "film")
    l1 = float(fcfg.get("l1", 1.0))
    l2 = float(fcfg.get("l2", 1.0))
    if l1 <= 0 or l2 <= 0:
        raise ConfigError("film lengths must be positive")
    return l1, l2


def _level_to_film(level: dict, lengths: tuple[float, float], where: str) -> FilmConfig:
    _check_keys(level, {"eps", "nu"}, where)
    eps = float(_need(level, "eps", where))
    nu = int(_need(level, "nu", where))
    if eps <= 0:
        raise ConfigError(f"{where}.eps must be positive")
    ns = []
    for l in lengths:
        n = l / eps
        if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)):
            raise ConfigError(f"{where}: eps={eps} does not divide side {l}")
        ns.append(int(round(n)))
    try:
        return FilmConfig(epsilon=eps, nu=nu, n1=ns[0], n2=ns[1])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_level(cfg: dict) -> FilmConfig:
    level = _need(cfg, "level", "config")
    return _level_to_film(level, film_lengths(cfg), "level")


def build_sweep(cfg: dict) -> tuple[str, list[FilmConfig]]:
    scfg = _need(cfg, "sweep", "config")
    _check_keys(scfg, {"regime", "levels"}, "sweep")
    regime = _need(scfg, "regime", "sweep")
    if regime not in ("ultrathin", "thin"):
        raise ConfigError(f"sweep.regime must be 'ultrathin' or 'thin', got {regime!r}")
    levels = _need(scfg, "levels", "sweep")
    if not isinstance(levels, list) or not levels:
        raise ConfigError("sweep.levels must be a non-empty list")
    lengths = film_lengths(cfg)
    films = [_level_to_film(lv, lengths, f"sweep.levels[{i}]") for i, lv in enumerate(levels)]
    for a, b in zip(films, films[1:]):
        if not b.epsilon < a.epsilon:
            raise ConfigError("sweep.levels must decrease strictly in eps")
        if regime == "ultrathin" and b.nu != a.nu:
            raise ConfigError("ultrathin sweep must keep nu constant")
        if regime == "thin" and b.nu < a.nu:
            raise ConfigError("thin sweep must not decrease nu")
    return regime, films


def build_quadrature(cfg: dict) -> Quadrature:
    qcfg = cfg.get("quadrature") or {}
    _check_keys(qcfg, {"m"}, "quadrature")
    m = int(qcfg.get("m", 64))
    try:
        return Quadrature(m=m, lengths=film_lengths(cfg))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def run_options(cfg: dict) -> dict:
    rcfg = cfg.get("run") or {}
    _check_keys(rcfg, {"diagnostics", "delta"}, "run")
    return {"diagnostics": bool(rcfg.get("diagnostics", False)),
            "delta": float(rcfg.get("delta", 0.1))}


# ---------------------------------------------------------------------------
# output

def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_rows(path: str, columns, rows: list[dict], fmt: str):
    if fmt == "csv":
        lines = [",".join(columns)]
        lines += [",".join(_fmt_cell(r.get(c)) for c in columns) for r in rows]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    elif fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2, allow_nan=True)
            fh.write("\n")
    else:
        raise ConfigError(f"unknown format {fmt!r}")


def _out_path(args, stem: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, f"{stem}.{args.format}")


def _write_matrix(fh, name: str, A: np.ndarray):
    fh.write(f"{name} {A.shape[0]}x{A.shape[1]}\n")
    for row in np.atleast_2d(A):
        fh.write(" ".join("%.17g" % v for v in row) + "\n")


# ---------------------------------------------------------------------------
# minimizer

@dataclass
class MinimizeResult:
    w: np.ndarray
    trace: list
    converged: bool
    failed: bool
    message: str


def minimize_atomistic(w0: np.ndarray, cfg: FilmConfig, model: AtomisticModel,
                       force=None, variant: str = "plain", iterations: int = 500,
                       gtol: float = 1e-10, threads: int = 1) -> MinimizeResult:
    """Descend the scaled total energy with Barzilai-Borwein trial steps and
    Armijo backtracking; the energy trace is strictly decreasing."""

    def value(w):
        return e_total(w, cfg, model, force=force, variant=variant, threads=threads)

    def grad(w):
        return e_total_gradient(w, cfg, model, force=force, variant=variant)

    w = np.array(w0, dtype=float)
    E = value(w)
    if not math.isfinite(E):
        raise NumericError("initial energy is not finite")
    g = grad(w)
    step = 1.0
    trace = []
    for it in range(iterations):
        gn = float(np.linalg.norm(g))
        trace.append({"iter": it, "energy": E, "grad_norm": gn, "step": step})
        if gn <= gtol:
            return MinimizeResult(w, trace, True, False, "gradient tolerance reached")
        t = step
        accepted = False
        for _ in range(80):
            w_try = w - t * g
            e_try = value(w_try)
            if e_try <= E - 1e-4 * t * gn * gn:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return MinimizeResult(w, trace, False, True, "line search failed")
        g_try = grad(w_try)
        s = w_try - w
        yv = g_try - g
        sy = float(np.sum(s * yv))
        step = float(np.sum(s * s)) / sy if sy > 0.0 else 2.0 * t
        step = min(max(step, 1e-14), 1e8)
        w, E, g = w_try, e_try, g_try
    gn = float(np.linalg.norm(g))
    trace.append({"iter": iterations, "energy": E, "grad_norm": gn, "step": step})
    return MinimizeResult(w, trace, gn <= gtol, False, "iteration budget exhausted")


# ---------------------------------------------------------------------------
# subcommands

def cmd_forms(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    forms = assemble_forms(model.bulk, model.surface,
                           rng=np.random.default_rng(args.seed))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "forms.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"model {cfg['model'].get('kind')}\n")
        fh.write("antiplane_defect %.17g\n" % forms.antiplane_defect)
        _write_matrix(fh, "q_cell", forms.q_cell.matrix)
        _write_matrix(fh, "q_surf", forms.q_surf.matrix)
        _write_matrix(fh, "vertical_block", forms.solver.K)
        _write_matrix(fh, "relax_map", forms.solver.bmap)
        _write_matrix(fh, "q_rel", forms.solver.rel_matrix)
    print(f"wrote {path}")
    return 0


def _recovery_context(cfg: dict, args):
    model = build_model(cfg)
    field = build_field(cfg)
    forms = assemble_forms(model.bulk, model.surface,
                           rng=np.random.default_rng(args.seed))
    return model, field, forms


def cmd_energy(args) -> int:
    cfg = load_config(args.config)
    ecfg = cfg.get("energy") or {}
    _check_keys(ecfg, {"deformation", "variant"}, "energy")
    variant = ecfg.get("variant", "plain")
    film = build_level(cfg)
    model, field, forms = _recovery_context(cfg, args)
    if "deformation" in ecfg:
        w = np.load(ecfg["deformation"])
        if w.shape != film.node_shape + (3,):
            raise ConfigError(
                f"deformation shape {w.shape} does not match level {film.node_shape + (3,)}")
    else:
        regime = cfg.get("sweep", {}).get("regime", "ultrathin")
        w = build_recovery(field, film, regime, forms)
    total = e_total(w, film, model, variant=variant, threads=args.threads)
    _, max_dist = in_s_delta(w, film, math.inf, threads=args.threads)
    row = {"eps": film.epsilon, "nu": film.nu, "h": film.h,
           "e_total": total, "e_over_h4": total / film.h ** 4, "max_dist": max_dist}
    path = _out_path(args, "energy")
    write_rows(path, tuple(row), [row], args.format)
    print(f"wrote {path}")
    return 0


def cmd_limit(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    field = build_field(cfg)
    force = build_force(cfg)
    forms = assemble_forms(model.bulk, model.surface,
                           rng=np.random.default_rng(args.seed))
    quad = build_quadrature(cfg)
    row = {"e_vk": e_vk(field, forms, quad, force=force)}
    if "level" in cfg:
        film = build_level(cfg)
        row["nu"] = film.nu
        row["e_vk_nu"] = e_vk_nu(field, film.nu, forms, quad, force=force)
        if forms.antiplane:
            row["e_vk_nu_decoupled"] = e_vk_nu_decoupled(field, film.nu, forms, quad)
    path = _out_path(args, "limit")
    write_rows(path, tuple(row), [row], args.format)
    print(f"wrote {path}")
    return 0


def cmd_recover(args) -> int:
    cfg = load_config(args.config)
    film = build_level(cfg)
    _, field, forms = _recovery_context(cfg, args)
    regime = cfg.get("sweep", {}).get("regime", "ultrathin")
    w = build_recovery(field, film, regime, forms)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "recovery.npy")
    np.save(path, w)
    _, max_dist = in_s_delta(w, film, math.inf, threads=args.threads)
    meta = {"eps": film.epsilon, "nu": film.nu, "h": film.h,
            "shape": list(w.shape), "max_dist": max_dist, "regime": regime}
    with open(os.path.join(args.out, "recovery.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    print(f"wrote {path}")
    return 0


def cmd_converge(args) -> int:
    cfg = load_config(args.config)
    model, field, forms = _recovery_context(cfg, args)
    force = build_force(cfg)
    regime, films = build_sweep(cfg)
    quad = build_quadrature(cfg)
    opts = run_options(cfg)
    rows = scaled_energy_gap(field, films, model, forms, regime, quad,
                             force_profile=force, diagnostics=opts["diagnostics"],
                             threads=args.threads)
    out = []
    for r in rows:
        out.append({"schema": SCHEMA_GAP, "eps": r.eps, "nu": r.nu, "h": r.h,
                    "e_scaled": r.e_scaled, "e_limit": r.e_limit,
                    "gap_abs": r.gap_abs, "gap_rel": r.gap_rel,
                    "max_dist": r.max_dist, "i_over_h4": r.i_over_h4,
                    "wall_ms": r.wall_ms})
    path = _out_path(args, "converge")
    write_rows(path, GAP_COLUMNS, out, args.format)
    print(f"wrote {path}")
    return 0


def cmd_strain(args) -> int:
    cfg = load_config(args.config)
    _, field, forms = _recovery_context(cfg, args)
    regime, films = build_sweep(cfg)
    quad = build_quadrature(cfg)
    rows = strain_moment_report(field, films, forms, regime, quad)
    out = [dict(schema=SCHEMA_MOMENT, **r) for r in rows]
    path = _out_path(args, "strain")
    write_rows(path, MOMENT_COLUMNS, out, args.format)
    print(f"wrote {path}")
    return 0


def cmd_minimize(args) -> int:
    cfg = load_config(args.config)
    film = build_level(cfg)
    model = build_model(cfg)
    mcfg = cfg.get("minimize") or {}
    _check_keys(mcfg, {"iterations", "gtol", "perturbation", "variant"}, "minimize")
    iterations = int(mcfg.get("iterations", 500))
    gtol = float(mcfg.get("gtol", 1e-10))
    pert = float(mcfg.get("perturbation", 0.01))
    variant = mcfg.get("variant", "plain")
    rng = np.random.default_rng(args.seed)
    w0 = film.node_positions()
    w0 = w0 + pert * film.epsilon * rng.standard_normal(w0.shape)
    res = minimize_atomistic(w0, film, model, variant=variant,
                             iterations=iterations, gtol=gtol, threads=args.threads)
    rows = [dict(schema=SCHEMA_TRACE, **t) for t in res.trace]
    path = _out_path(args, "minimize")
    write_rows(path, TRACE_COLUMNS, rows, args.format)
    print(f"wrote {path} ({res.message}, {len(res.trace)} rows)")
    if res.failed:
        raise NumericError(res.message)
    return 0


def cmd_identities(args) -> int:
    if args.config is not None:
        load_config(args.config)  # validate only; identities need no settings
    report = coefficient_identities(args.nu_max)
    rows = [{"schema": "vkid-1", **r} for r in report["rows"]]
    path = _out_path(args, "identities")
    write_rows(path, ("schema", "nu", "layer_sum", "closed_form", "linear_sum", "ok"),
               rows, args.format)
    print(f"wrote {path} (ok={report['ok']})")
    if not report["ok"]:
        raise NumericError("coefficient identities failed")
    return 0


# ---------------------------------------------------------------------------
# CLI plumbing

_COMMANDS = {
    "forms": cmd_forms,
    "energy": cmd_energy,
    "limit": cmd_limit,
    "recover": cmd_recover,
    "converge": cmd_converge,
    "strain": cmd_strain,
    "minimize": cmd_minimize,
    "identities": cmd_identities,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vkfilm",
        description="Numerical laboratory for atomistic films and their plate limits.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        if name == "identities":
            p.add_argument("--config", default=None)
            p.add_argument("--nu-max", type=int, default=50)
        else:
            p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    except (NumericError, ArithmeticError, FloatingPointError,
            np.linalg.LinAlgError, ValueError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
