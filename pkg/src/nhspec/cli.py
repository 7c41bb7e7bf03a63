"""Config-driven command-line front end.

Each subcommand reads one strict JSON config (optionally overridden by
flags), runs one experiment and writes ``report.json`` plus CSV artifacts
into the output directory. Exit codes: 0 success, 2 config error,
3 numerical failure, 4 precondition violation.
"""

import argparse
import copy
import datetime
import json
import os
import sys
import time
import traceback

import numpy as np

from . import __version__
from .basis import (estimate_riesz_constants, growth_check, make_system,
                    normalization_deviation, verify_biorthogonality)
from .errors import ConfigError, ConstructionError, NHSError, PreconditionError
from .evolution import heat_solve, morse_emergence, residual_check, sobolev_stability
from .matrix import build_matrix, crone_report, df_split
from .quantize import Symbol, apply_operator, compactness_verdict
from .report import csv_text, dumps, envelope, fmt
from .spectrum import invertibility_check, resolvent_membership, section_solve, spectrum_report
from .symexpr import SymbolSyntaxError, evaluate_array, parse
from .transform import (SpectralCoefficients, adjoint_transform, build_quadrature,
                        default_quadrature, forward_transform, inverse_transform, lp_norm,
                        parseval, parseval_mixed, sobolev_norm)

__all__ = ["main", "run", "load_config", "resolve_config", "SUBCOMMANDS"]

SUBCOMMANDS = ("basis-verify", "transform", "apply", "matrix", "gershgorin", "invertibility",
               "resolvent", "compactness", "evolve", "morse")

RNG_NAME = "numpy.random.PCG64"

DEFAULT_TOLERANCES = {
    "biorthogonality": 1e-8,
    "containment": 1e-8,
    "compact_tol": 0.1,
    "stabilize_rtol": 1e-3,
    "compact_threshold": 1e2,
    "residual_dt": 1e-5,
    "residual_t": 0.5,
    "sobolev_rtol": 1e-8,
    "crone_rtol": 1e-10,
}

# command blocks: key -> expected type(s)
_FUNCTION_KEYS = {"function": str, "coefficients": list, "random": dict}
_BLOCKS = {
    "basis-verify": {},
    "transform": {"f": dict, "p": list, "s": list},
    "apply": {"f": dict, "points": list},
    "matrix": {"sizes": list},
    "gershgorin": {"wider": int},
    "invertibility": {},
    "resolvent": {"lambda": (int, float, list)},
    "compactness": {"shells": list, "section_size": int},
    "evolve": {"f0": dict, "times": list, "s_values": list},
    "morse": {"f0": dict, "t_grid": list, "grid_per_dim": int},
}
_TOP = {"basis": (str, dict), "symbol": (str, dict), "N": int, "quad_order": (str, int),
        "seed": int, "threads": int, "tolerances": dict}
_TOP.update({k: dict for k in _BLOCKS})


# ---------------------------------------------------------------------------
# config parsing

def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(f"duplicate key '{k}'")
        out[k] = v
    return out


def load_config(text, source="<config>"):
    """Parse strict JSON; errors carry line and column."""
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicates,
                          parse_constant=lambda c: _bad_constant(c))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: line 1 column 1: top level must be an object")
    return data


def _bad_constant(name):
    raise ConfigError(f"non-finite constant {name} is not allowed")


def _check_type(value, types, path):
    types = types if isinstance(types, tuple) else (types,)
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{path}: expected {'/'.join(t.__name__ for t in types)}, got bool")
    if not isinstance(value, types):
        raise ConfigError(f"{path}: expected {'/'.join(t.__name__ for t in types)}, "
                          f"got {type(value).__name__}")


def _check_keys(block, allowed, path):
    for k, v in block.items():
        if k not in allowed:
            raise ConfigError(f"{path}.{k}: unknown key (allowed: {', '.join(sorted(allowed))})")
        _check_type(v, allowed[k], f"{path}.{k}")


def _validate(cfg):
    _check_keys(cfg, _TOP, "$")
    for name, keys in _BLOCKS.items():
        if name in cfg:
            _check_keys(cfg[name], keys, f"$.{name}")
    if isinstance(cfg.get("basis"), dict):
        _check_keys(cfg["basis"], {"name": str, "params": dict}, "$.basis")
        if "name" not in cfg["basis"]:
            raise ConfigError("$.basis.name: required")
    if isinstance(cfg.get("symbol"), dict):
        _check_keys(cfg["symbol"], {"kind": str, "expr": str, "alpha": str, "potential": str},
                    "$.symbol")
        kind = cfg["symbol"].get("kind", "auto")
        if kind not in ("auto", "multiplier", "separable", "general"):
            raise ConfigError(f"$.symbol.kind: unknown kind '{kind}'")
    _check_keys(cfg.get("tolerances", {}), {k: (int, float) for k in DEFAULT_TOLERANCES},
                "$.tolerances")
    if isinstance(cfg.get("quad_order"), str) and cfg["quad_order"] != "auto":
        raise ConfigError("$.quad_order: expected an integer or \"auto\"")
    if "N" in cfg and cfg["N"] < 1:
        raise ConfigError("$.N: must be positive")
    for block, key in (("transform", "f"), ("apply", "f"), ("evolve", "f0"), ("morse", "f0")):
        spec = cfg.get(block, {}).get(key)
        if spec is not None:
            _check_keys(spec, _FUNCTION_KEYS, f"$.{block}.{key}")
            if len(spec) != 1:
                raise ConfigError(f"$.{block}.{key}: give exactly one of function, coefficients, random")
            if "random" in spec:
                _check_keys(spec["random"], {"degree": int, "real": bool},
                            f"$.{block}.{key}.random")


def _parse_param(text):
    if "=" not in text:
        raise ConfigError(f"--basis-param '{text}': expected key=value")
    k, v = text.split("=", 1)
    try:
        val = json.loads(v)
    except json.JSONDecodeError:
        val = v
    return k.strip(), val


def resolve_config(cfg, overrides=None):
    """Validate, apply flag overrides and fill defaults. Returns a new dict."""
    cfg = copy.deepcopy(cfg)
    overrides = overrides or {}
    if overrides.get("basis") is not None:
        cfg["basis"] = {"name": overrides["basis"], "params": {}}
    if overrides.get("basis_params"):
        basis = cfg.get("basis", {"name": "torus"})
        basis = {"name": basis} if isinstance(basis, str) else dict(basis)
        params = dict(basis.get("params", {}))
        for text in overrides["basis_params"]:
            k, v = _parse_param(text)
            params[k] = v
        basis["params"] = params
        cfg["basis"] = basis
    sym_over = {k: overrides.get(k) for k in ("symbol", "symbol_kind", "alpha", "potential")}
    if any(v is not None for v in sym_over.values()):
        sym = cfg.get("symbol", {})
        sym = {"expr": sym} if isinstance(sym, str) else dict(sym)
        if sym_over["symbol"] is not None:
            sym["expr"] = sym_over["symbol"]
        if sym_over["alpha"] is not None:
            sym["alpha"] = sym_over["alpha"]
        if sym_over["potential"] is not None:
            sym["potential"] = sym_over["potential"]
        if sym_over["symbol_kind"] is not None:
            sym["kind"] = sym_over["symbol_kind"]
        cfg["symbol"] = sym
    for key, name in (("N", "N"), ("seed", "seed"), ("threads", "threads")):
        if overrides.get(key) is not None:
            cfg[name] = overrides[key]
    if overrides.get("quad_order") is not None:
        q = overrides["quad_order"]
        cfg["quad_order"] = q if q == "auto" else _int_flag(q, "--quad-order")
    _validate(cfg)
    basis = cfg.get("basis", "torus")
    cfg["basis"] = {"name": basis, "params": {}} if isinstance(basis, str) else \
        {"name": basis["name"], "params": dict(basis.get("params", {}))}
    if "symbol" in cfg:
        sym = cfg["symbol"]
        sym = {"expr": sym} if isinstance(sym, str) else dict(sym)
        sym.setdefault("kind", "auto")
        cfg["symbol"] = sym
    cfg.setdefault("N", 16)
    cfg.setdefault("quad_order", "auto")
    cfg.setdefault("seed", 0)
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(cfg.get("tolerances", {}))
    cfg["tolerances"] = tol
    return cfg


def _int_flag(text, flag):
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{flag}: expected an integer or 'auto', got '{text}'") from exc


# ---------------------------------------------------------------------------
# building blocks

def _system(cfg):
    b = cfg["basis"]
    try:
        return make_system(b["name"], **b["params"])
    except ConstructionError as exc:
        raise ConfigError(f"$.basis: {exc}") from exc


def _symbol(cfg, system):
    if "symbol" not in cfg:
        raise ConfigError("$.symbol: required for this command")
    sym = cfg["symbol"]
    kind = sym["kind"]
    try:
        if kind == "separable" or (kind == "auto" and "alpha" in sym):
            if "alpha" not in sym or "potential" not in sym:
                raise ConfigError("$.symbol: separable symbols need alpha and potential")
            return Symbol.separable(system, sym["alpha"], sym["potential"])
        if "expr" not in sym:
            raise ConfigError("$.symbol.expr: required")
        if kind == "multiplier":
            return Symbol.multiplier(system, sym["expr"])
        if kind == "general":
            return Symbol.general(system, sym["expr"])
        return Symbol.from_expression(system, sym["expr"])
    except (SymbolSyntaxError, ConstructionError) as exc:
        raise ConfigError(f"$.symbol: {exc}") from exc


def _quad(cfg, system, indices, extra=0.0):
    if cfg["quad_order"] == "auto":
        return default_quadrature(system, indices, extra_periods=extra)
    return build_quadrature(system.domain, int(cfg["quad_order"]))


def _function(spec, system, indices, seed, path):
    """f from a config block: expression in x, explicit coefficients or seeded random."""
    if spec is None:
        raise ConfigError(f"{path}: required")
    if "function" in spec:
        try:
            expr = parse(spec["function"])
            expr.validate(system.dimension, system.index_dim)
        except SymbolSyntaxError as exc:
            raise ConfigError(f"{path}.function: {exc}") from exc
        if expr.depends_on_xi():
            raise ConfigError(f"{path}.function: must depend on x only")

        def fun(points):
            env = {f"x{j + 1}": points[:, j] for j in range(points.shape[1])}
            return np.broadcast_to(evaluate_array(expr, env), (points.shape[0],)).astype(complex)

        return fun
    if "coefficients" in spec:
        l = system.index_dim
        table = {}
        for i, row in enumerate(spec["coefficients"]):
            if not isinstance(row, list) or len(row) != l + 2:
                raise ConfigError(f"{path}.coefficients[{i}]: expected [{l} index entries, re, im]")
            try:
                key = tuple(int(c) for c in row[:l])
                table[key] = complex(float(row[l]), float(row[l + 1]))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}.coefficients[{i}]: {exc}") from exc
        for key in table:
            if not system._admissible(np.array([key])).all():
                raise ConfigError(f"{path}.coefficients: index {key} is not admissible")
        return SpectralCoefficients.from_mapping(system, table, "L", indices)
    return _random_coefficients(spec["random"], system, indices, seed)


def _random_coefficients(spec, system, indices, seed):
    """Gaussian coefficients on indices with ``max |xi_j| <= degree``; real functions
    on complex systems pair ``xi`` with ``-xi`` conjugately."""
    degree = spec.get("degree", 5)
    real = spec.get("real", True)
    rng = np.random.Generator(np.random.PCG64(seed))
    pos = {k: i for i, k in enumerate(indices)}
    c = np.zeros(len(indices), dtype=complex)
    done = set()
    for k in indices:
        if k in done or max(abs(v) for v in k) > degree:
            continue
        if system.real_valued:
            c[pos[k]] = rng.standard_normal()
            done.add(k)
            continue
        if not real:
            c[pos[k]] = rng.standard_normal() + 1j * rng.standard_normal()
            done.add(k)
            continue
        mk = tuple(-v for v in k)
        if mk == k:
            c[pos[k]] = rng.standard_normal()
        elif mk in pos:
            z = rng.standard_normal() + 1j * rng.standard_normal()
            c[pos[k]], c[pos[mk]] = z, np.conj(z)
            done.add(mk)
        done.add(k)
    return SpectralCoefficients(tuple(indices), c, system, "L")


# ---------------------------------------------------------------------------
# subcommands; each returns (result dict, {filename: csv text})

def _cmd_basis_verify(cfg):
    system = _system(cfg)
    n = cfg["N"]
    indices = system.enumerate(n)
    quad = None if cfg["quad_order"] == "auto" else _quad(cfg, system, indices)
    check = verify_biorthogonality(system, n, quad=quad)
    riesz = estimate_riesz_constants(system, n, quad=quad)
    norm_dev = normalization_deviation(system, n, quad=quad)
    growth = growth_check(system, n)
    tol = cfg["tolerances"]["biorthogonality"]
    lams = system.eigenvalues(list(indices))
    brs = system.bracket(list(indices))
    rows = [list(k) + [fmt(z.real), fmt(z.imag), fmt(b)] for k, z, b in zip(indices, lams, brs)]
    head = [f"xi{j + 1}" for j in range(system.index_dim)] + ["lambda_re", "lambda_im", "bracket"]
    result = {
        "system": system.describe(),
        "biorthogonality": {"max_deviation": check.deviation, "tolerance": tol,
                            "pass": check.deviation < tol, "under_resolved": check.under_resolved,
                            "doubling_change": check.doubling_change, "quad_order": check.order},
        "riesz": {"k1": riesz.k1, "K1": riesz.K1, "k2": riesz.k2, "K2": riesz.K2,
                  "certified_for": riesz.certified_for, "estimator_not_certificate": True},
        "normalization_deviation": {"value": norm_dev, "diagnostic_only": True},
        "growth_ratio": {"value": growth, "estimator_not_certificate": True},
    }
    return result, {"eigen.csv": csv_text(head, rows)}


def _cmd_transform(cfg):
    system = _system(cfg)
    block = cfg.get("transform", {})
    indices = system.enumerate(cfg["N"])
    f = _function(block.get("f"), system, indices, cfg["seed"], "$.transform.f")
    quad = _quad(cfg, system, indices, extra=2.0)
    if isinstance(f, SpectralCoefficients):
        fhat = f

        def f_callable(points):
            return inverse_transform(fhat, points)

        f = f_callable
    fhat = forward_transform(f, system, indices, quad=quad)
    fstar = adjoint_transform(f, system, indices, quad=quad)
    vals = np.asarray(f(quad.nodes), dtype=complex)
    recon = np.asarray(inverse_transform(fhat, quad.nodes))
    l2sq = float(np.abs(vals) ** 2 @ quad.weights)
    roundtrip = float(np.max(np.abs(recon - vals)) / max(float(np.max(np.abs(vals))), 1e-300))
    pm = parseval_mixed(fhat, fstar)
    result = {
        "truncation": len(indices),
        "quad_order": quad.order,
        "under_resolved": fhat.under_resolved,
        "doubling_change": fhat.doubling_change,
        "l2_norm_sq_quadrature": l2sq,
        "parseval_mixed": pm,
        "parseval_plain": parseval(fhat, fhat),
        "parseval_relative_gap": abs(pm.real - l2sq) / max(l2sq, 1e-300),
        "roundtrip_max_relative_error": roundtrip,
        "lp_norms": {f"{p:g}": lp_norm(fhat, p, system) for p in block.get("p", [1, 2])},
        "lp_estimator": "sup norms from a grid search with local refinement",
        "sobolev_norms": {f"{s:g}": sobolev_norm(fhat, fstar, s) for s in block.get("s", [0, 1])},
        "notes": ["parseval_mixed uses L and L* coefficients; parseval_plain is sum |f^|^2"],
    }
    return result, {"coefficients.csv": fhat.to_csv(), "coefficients_star.csv": fstar.to_csv()}


def _cmd_apply(cfg):
    system = _system(cfg)
    symbol = _symbol(cfg, system)
    block = cfg.get("apply", {})
    indices = system.enumerate(cfg["N"])
    f = _function(block.get("f"), system, indices, cfg["seed"], "$.apply.f")
    if not isinstance(f, SpectralCoefficients):
        f = forward_transform(f, system, indices, quad=_quad(cfg, system, indices, extra=2.0))
    if "points" in block:
        pts = np.asarray(block["points"], dtype=float).reshape(-1, system.dimension)
    else:
        pts = default_quadrature(system, indices).nodes
    vals = apply_operator(symbol, f, pts)
    head = [f"x{j + 1}" for j in range(system.dimension)] + ["re", "im"]
    rows = [[fmt(c) for c in p] + [fmt(v.real), fmt(v.imag)] for p, v in zip(pts, vals)]
    result = {"symbol": symbol.describe(), "truncation": len(indices), "points": len(pts),
              "max_abs": float(np.max(np.abs(vals))) if len(vals) else 0.0}
    return result, {"values.csv": csv_text(head, rows)}


def _matrix(cfg, system, symbol, n=None):
    n = cfg["N"] if n is None else n
    quad = None
    if cfg["quad_order"] != "auto":
        quad = build_quadrature(system.domain, int(cfg["quad_order"]))
    return build_matrix(symbol, n, quad=quad)


def _cmd_matrix(cfg):
    system = _system(cfg)
    symbol = _symbol(cfg, system)
    m = _matrix(cfg, system, symbol)
    sizes = cfg.get("matrix", {}).get("sizes")
    crone = crone_report(m, sizes=sizes, rtol=cfg["tolerances"]["crone_rtol"])
    try:
        split = df_split(m).to_dict()
    except PreconditionError as exc:
        split = {"error": str(exc)}
    result = {"symbol": symbol.describe(), "size": m.size, "under_resolved": m.under_resolved,
              "doubling_change": m.doubling_change, "crone": crone, "df_split": split}
    return result, {"matrix.csv": m.to_csv()}


def _cmd_gershgorin(cfg):
    system = _system(cfg)
    symbol = _symbol(cfg, system)
    m = _matrix(cfg, system, symbol)
    wider = cfg.get("gershgorin", {}).get("wider")
    wm = _matrix(cfg, system, symbol, wider) if wider else None
    rep = spectrum_report(m, wider=wm, tol=cfg["tolerances"]["containment"],
                          compact_threshold=cfg["tolerances"]["compact_threshold"])
    discs = rep.discs
    l = system.index_dim
    rows = [list(d.index) + [fmt(d.center.real), fmt(d.center.imag), fmt(d.radius),
                             fmt(d.radius_truncated)] for d in discs]
    head = [f"xi{j + 1}" for j in range(l)] + ["center_re", "center_im", "radius",
                                                "radius_section"]
    result = {"symbol": symbol.describe(), "size": m.size, "tolerance": cfg["tolerances"]["containment"],
              "spectrum": rep}
    return result, {"discs.csv": csv_text(head, rows), "eigenvalues.csv": rep.eigen_csv()}


def _cmd_invertibility(cfg):
    system = _system(cfg)
    symbol = _symbol(cfg, system)
    m = _matrix(cfg, system, symbol)
    verdict = invertibility_check(m, compact_threshold=cfg["tolerances"]["compact_threshold"])
    result = {"symbol": symbol.describe(), "size": m.size, "invertibility": verdict}
    if verdict.conditions[0]:
        _, res = section_solve(m)
        result["section_solve_residual"] = res
    return result, {}


def _cmd_resolvent(cfg):
    system = _system(cfg)
    symbol = _symbol(cfg, system)
    lam = cfg.get("resolvent", {}).get("lambda", 0.0)
    if isinstance(lam, list):
        if len(lam) != 2:
            raise ConfigError("$.resolvent.lambda: expected a number or [re, im]")
        lam = complex(lam[0], lam[1])
    quad = None if cfg["quad_order"] == "auto" else build_quadrature(system.domain,
                                                                     int(cfg["quad_order"]))
    verdict = resolvent_membership(symbol, lam, cfg["N"], quad=quad,
                                   compact_threshold=cfg["tolerances"]["compact_threshold"])
    return {"symbol": symbol.describe(), "lambda": complex(lam), "size": cfg["N"],
            "resolvent": verdict,
            "in_resolvent_indicated": verdict.verdict == "satisfied"}, {}


def _cmd_compactness(cfg):
    system = _system(cfg)
    symbol = _symbol(cfg, system)
    block = cfg.get("compactness", {})
    tol = cfg["tolerances"]
    verdict = compactness_verdict(symbol, tol=tol["compact_tol"],
                                  stabilize_rtol=tol["stabilize_rtol"],
                                  shells=block.get("shells"),
                                  section_size=block.get("section_size"))
    est = verdict.estimate
    rows = [[fmt(r), fmt(v), str(n)] for r, v, n in
            zip(est.radii, est.shell_values, est.shell_sizes)]
    return ({"symbol": symbol.describe(), "compactness": verdict},
            {"shells.csv": csv_text(["radius", "shell_sup", "shell_size"], rows)})


def _initial(cfg, block, key, system, indices):
    f0 = _function(cfg.get(block, {}).get(key), system, indices, cfg["seed"], f"$.{block}.{key}")
    return f0


def _cmd_evolve(cfg):
    system = _system(cfg)
    symbol = _symbol(cfg, system)
    block = cfg.get("evolve", {})
    indices = system.enumerate(cfg["N"])
    f0 = _initial(cfg, "evolve", "f0", system, indices)
    times = [0.0] + [float(t) for t in block.get("times", [0.1, 1.0, 10.0]) if t > 0]
    s_values = tuple(float(s) for s in block.get("s_values", [0, 1, 2]))
    quad = None if cfg["quad_order"] == "auto" else _quad(cfg, system, indices)
    traj = heat_solve(symbol, f0, times, N=cfg["N"], quad=quad, s_values=s_values)
    tol = cfg["tolerances"]
    t_res, dt = float(tol["residual_t"]), float(tol["residual_dt"])
    r1 = residual_check(traj, t=t_res, dt=dt)
    r2 = residual_check(traj, t=t_res, dt=dt / 2)
    stab = sobolev_stability(traj, s_values=s_values, rtol=tol["sobolev_rtol"])
    result = {"symbol": symbol.describe(), "trajectory": traj,
              "residual": {"t": t_res, "dt": dt, "value": r1, "value_half_dt": r2,
                           "ratio": r1 / r2 if r2 > 0 else None},
              "sobolev_stability": stab}
    return result, {"frames.csv": traj.frames_csv(), "norms.csv": traj.norms_csv()}


def _cmd_morse(cfg):
    system = _system(cfg)
    symbol = _symbol(cfg, system)
    block = cfg.get("morse", {})
    indices = system.enumerate(cfg["N"])
    f0 = _initial(cfg, "morse", "f0", system, indices)
    t_grid = block.get("t_grid")
    res = morse_emergence(symbol, f0, t_grid=None if t_grid is None else np.asarray(t_grid, float),
                          N=cfg["N"], grid_per_dim=block.get("grid_per_dim", 64))
    rows = [[fmt(t), str(bool(p)), str(n)] for t, p, n in zip(res.times, res.passes, res.counts)]
    cp_rows = [[fmt(c) for c in p.location] + [fmt(p.value), fmt(p.hessian_det), str(p.index)]
               for p in res.last_report.critical_points]
    d = system.dimension
    return ({"symbol": symbol.describe(), "rng": {"generator": RNG_NAME, "seed": cfg["seed"]},
             "emergence": res},
            {"scan.csv": csv_text(["t", "passes", "count"], rows),
             "critical_points.csv": csv_text([f"x{j + 1}" for j in range(d)]
                                             + ["value", "hessian_det", "index"], cp_rows)})


_COMMANDS = {
    "basis-verify": _cmd_basis_verify,
    "transform": _cmd_transform,
    "apply": _cmd_apply,
    "matrix": _cmd_matrix,
    "gershgorin": _cmd_gershgorin,
    "invertibility": _cmd_invertibility,
    "resolvent": _cmd_resolvent,
    "compactness": _cmd_compactness,
    "evolve": _cmd_evolve,
    "morse": _cmd_morse,
}


# ---------------------------------------------------------------------------
# driver

def _exit_code(exc):
    if isinstance(exc, (ConfigError, SymbolSyntaxError)):
        return 2
    if isinstance(exc, PreconditionError):
        return 4
    return 3


def _limit_threads(k):
    if k is None:
        return None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(k))


def execute(subcommand, cfg):
    """Run a resolved config; returns ``(report envelope, {filename: text})``."""
    if subcommand not in _COMMANDS:
        raise ConfigError(f"unknown subcommand '{subcommand}'")
    t0 = time.perf_counter()
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    limiter = _limit_threads(cfg.get("threads"))
    try:
        result, files = _COMMANDS[subcommand](cfg)
    finally:
        if limiter is not None:
            limiter.unregister()
    body = {"command": subcommand, "version": __version__, "config": cfg, "result": result}
    sidecar = {"started": started, "elapsed_s": time.perf_counter() - t0,
               "files": sorted(files)}
    return envelope(body, sidecar), files


def _write(output_dir, report, files):
    os.makedirs(output_dir, exist_ok=True)
    with open(os.path.join(output_dir, "report.json"), "w") as fh:
        fh.write(dumps(report) + "\n")
    for name, text in files.items():
        with open(os.path.join(output_dir, name), "w", newline="") as fh:
            fh.write(text)


def run(subcommand, config, output_dir, overrides=None):
    """Run one experiment and write its reports.

    ``config`` is a dict, JSON text, or a path to a JSON file. Returns the
    exit status; on failure an error report is written when possible.
    """
    try:
        if isinstance(config, dict):
            raw = config
        elif config is None:
            raw = {}
        elif isinstance(config, str) and config.lstrip().startswith("{"):
            raw = load_config(config)
        elif isinstance(config, (str, os.PathLike)):
            try:
                with open(config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config '{config}': {exc.strerror}") from exc
            raw = load_config(text, source=str(config))
        else:
            raise ConfigError(f"unsupported config object {type(config).__name__}")
        cfg = resolve_config(raw, overrides)
        report, files = execute(subcommand, cfg)
    except Exception as exc:  # noqa: BLE001 - every failure maps to an exit code
        code = _exit_code(exc)
        kind = type(exc).__name__
        print(f"error: {subcommand}: {kind}: {exc}", file=sys.stderr)
        if not isinstance(exc, NHSError):
            traceback.print_exc(file=sys.stderr)
        if output_dir is not None:
            try:
                _write(output_dir, envelope({"command": subcommand, "version": __version__,
                                             "error": {"type": kind, "message": str(exc),
                                                       "exit_code": code}}), {})
            except OSError:
                pass
        return code
    if output_dir is not None:
        _write(output_dir, report, files)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="nhspec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", metavar="PATH", help="JSON experiment config")
        s.add_argument("--output", metavar="DIR", default=".", help="report directory")
        s.add_argument("--threads", type=int, metavar="K", help="cap on BLAS worker threads")
        s.add_argument("--seed", type=int, metavar="S", help="seed for random initial data")
        s.add_argument("--basis", metavar="NAME")
        s.add_argument("--basis-param", action="append", metavar="KEY=VALUE", dest="basis_params")
        s.add_argument("--symbol", metavar="EXPR")
        s.add_argument("--symbol-kind", choices=("auto", "multiplier", "separable", "general"))
        s.add_argument("--alpha", metavar="EXPR")
        s.add_argument("--potential", metavar="EXPR")
        s.add_argument("--N", type=int, dest="N", metavar="N", help="truncation size")
        s.add_argument("--quad-order", metavar="ORDER|auto")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("basis", "basis_params", "symbol", "symbol_kind",
                                               "alpha", "potential", "N", "quad_order", "seed",
                                               "threads")}
    return run(args.subcommand, args.config, args.output, overrides)


if __name__ == "__main__":
    sys.exit(main())
