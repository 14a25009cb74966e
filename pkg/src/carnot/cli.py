"""Command-line front end.

``carnot COMMAND [--config PATH] [--set KEY=VALUE ...] [--seed N]
[--output PATH] [--format json|csv] [--quiet]``

Exit codes: 0 success, 1 invalid algebra, 2 precondition violated,
3 numerical failure, 4 I/O error, 5 a catalog expectation did not hold.

JSON reports (schema ``carnot-report/1``) hold ``schema``, ``command``,
``config_hash``, ``config``, ``seed``, ``epsilons``, ``expectations`` (each with
its ``origin``) and a command-specific ``result``.  They contain no
timestamps, so identical inputs give identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from typing import List, Optional

import numpy as np

from . import __version__
from . import catalog
from .blowup import ConeSet, coverage_diagnostic, extract_G, integrate_curve, verify_blowup
from .config import (Config, ConfigError, build_algebra, build_law, build_manifold, config_hash,
                     parse_config, serialize_config)
from .errors import InvalidAlgebraError, NumericalError, PreconditionError
from .group import calibrate_norm
from .manifold import adapted_frame, parameter_grid, pointwise_degree, submanifold_degree
from .measure import intrinsic_measure, metric_factor, verify_density_limit

SCHEMA = "carnot-report/1"
EXIT_INVALID, EXIT_PRECONDITION, EXIT_NUMERICAL, EXIT_IO, EXIT_MISMATCH = 1, 2, 3, 4, 5

COMMANDS = ("validate-group", "bch", "degree", "strata", "measure", "metric-factor", "blowup",
            "curves", "engel-suite")


class Outcome:
    def __init__(self, result, rows=None, header=None, expectations=None, text=None,
                 status=0):
        self.result = result
        self.rows = rows or []
        self.header = header or []
        self.expectations = expectations or []
        self.text = text
        self.status = status


def _clean(obj):
    """JSON-safe copy with plain Python scalars and finite-or-string floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def _norm(law, seed):
    return calibrate_norm(law, seed=seed)


def _seed(cfg: Config) -> int:
    return cfg.integer("seed", 0)


def _expectations_for(entry_name: Optional[str], keys: List[str]):
    if entry_name is None:
        return []
    entry = catalog.get(entry_name)
    return [{"key": e.key, "description": e.description, "origin": e.origin}
            for e in entry.expected if e.key in keys]


def _group_name(cfg):
    g = cfg.text("group")
    return None if g == "inline" else g


# ---------------------------------------------------------------------------
# commands


def cmd_validate_group(cfg: Config, seed: int):
    alg = build_algebra(cfg)
    report = alg.validate()
    result = {"name": alg.name, "layers": list(alg.layer_dims), "valid": report.ok,
              "axiom": report.axiom, "indices": [i + 1 for i in report.indices],
              "message": report.message,
              "homogeneous_dimension": alg.homogeneous_dimension() if report.ok else None}
    text = "valid" if report.ok else report.message
    return Outcome(result, text=text, status=0 if report.ok else EXIT_INVALID)


def cmd_bch(cfg: Config, seed: int):
    alg = build_algebra(cfg)
    alg.require_valid()
    from .group import compute_group_law
    law = compute_group_law(alg)
    names = [f"x{i + 1}" for i in range(alg.q)] + [f"y{i + 1}" for i in range(alg.q)]
    P = [p.to_string(names) for p in law.P]
    text = "\n".join(f"P{i + 1} = {s}" for i, s in enumerate(P))
    return Outcome({"group": alg.name, "P": P}, text=text)


def cmd_degree(cfg: Config, seed: int):
    law = build_law(cfg)
    m = build_manifold(cfg, law)
    tol = cfg.number("tolerance", 1e-9)
    grid = parameter_grid(m, cfg.integer("grid", 21))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d, witness = submanifold_degree(m, grid, tol)
        degs = np.atleast_1d(pointwise_degree(m, grid, tol, warn=False))
    rows = [list(map(float, g)) + [int(k)] for g, k in zip(grid, degs)]
    result = {"degree": int(d), "witness": list(map(float, witness)),
              "homogeneous_dimension": m.algebra.homogeneous_dimension(),
              "grid_points": len(grid)}
    keys = {"deg3-exp": ["deg3-degree"], "trivial-plane": ["trivial-plane-degree"],
            "deg5-vertical": ["deg5-degree"]}.get(m.name, [])
    return Outcome(result, rows, list(m.params) + ["degree"],
                   _expectations_for(_group_name(cfg), keys))


def cmd_strata(cfg: Config, seed: int):
    law = build_law(cfg)
    m = build_manifold(cfg, law)
    expected = catalog.deg4_expected_degree if m.name == "deg4-parabola" else None
    grid = parameter_grid(m, cfg.integer("grid", 21))
    extra = cfg.rows("points")
    if extra is not None:
        grid = np.concatenate([grid, np.array(extra)])
    classes, mismatches = catalog.strata_classification(
        m, grid, cfg.number("tolerance", 1e-9), expected)
    result = {"counts": {("ambiguous" if k is None else str(k)): len(v)
                         for k, v in sorted(classes.items(), key=lambda kv: (kv[0] is None, kv[0] or 0))},
              "mismatches": mismatches}
    rows = [list(map(float, pt)) + [("ambiguous" if k is None else int(k))]
            for k, pts in classes.items() for pt in pts]
    rows.sort(key=lambda r: tuple(r[:-1]))
    keys = ["deg4-strata-points", "deg4-curves"] if expected is not None else []
    status = EXIT_MISMATCH if mismatches else 0
    return Outcome(result, rows, list(m.params) + ["degree"],
                   _expectations_for(_group_name(cfg), keys), status=status)


def cmd_measure(cfg: Config, seed: int):
    """Intrinsic measure of a region; with ``radii`` also the density limit at ``point``."""
    law = build_law(cfg)
    m = build_manifold(cfg, law)
    region = cfg.rows("region")
    region = [tuple(r) for r in region] if region else m.domain
    res = intrinsic_measure(m, region, quadrature=cfg.get("quadrature", "gauss"),
                            nodes=cfg.integer("nodes", 64),
                            samples=cfg.integer("samples", 10 ** 5), seed=seed)
    result = {"value": res.value, "standard_error": res.standard_error,
              "sample_count": res.sample_count, "method": res.method,
              "region": [list(r) for r in region]}
    rows = []
    if "radii" in cfg:
        norm = _norm(law, seed)
        dens = verify_density_limit(m, cfg.numbers("point"), cfg.numbers("radii"), norm,
                                    cfg.integer("samples", 10 ** 6), seed,
                                    cfg.integer("theta_samples", 10 ** 6))
        result["density"] = dens
        result["epsilons"] = dens["epsilons"]
        rows = [[r["r"], r["ratio"], r["standard_error"], r["relative_gap"]]
                for r in dens["rows"]]
    return Outcome(result, rows, ["r", "ratio", "standard_error", "relative_gap"])


def cmd_metric_factor(cfg: Config, seed: int):
    law = build_law(cfg)
    norm = _norm(law, seed)
    basis = cfg.rows("subspace")
    if basis is not None:
        sub = np.array(basis).T
        source = "given"
    else:
        m = build_manifold(cfg, law)
        frame = adapted_frame(m, cfg.numbers("point"))
        sub = frame.selected_basis()
        source = "adapted frame"
    mf = metric_factor(sub, norm, cfg.integer("samples", 10 ** 6), seed)
    return Outcome({"theta": mf.theta, "standard_error": mf.standard_error,
                    "sample_count": mf.sample_count, "subspace": mf.subspace.T,
                    "source": source, "epsilons": list(norm.epsilons)})


def cmd_blowup(cfg: Config, seed: int):
    law = build_law(cfg)
    m = build_manifold(cfg, law)
    norm = _norm(law, seed)
    limit = None
    basis = cfg.rows("limit.basis")
    if basis is not None:
        B = np.linalg.qr(np.array(basis).T)[0]
        half = cfg.rows("limit.halfspaces")
        limit = ConeSet(B, np.array(half) if half else np.zeros((0, law.q)))
    rep = verify_blowup(m, cfg.numbers("point"), cfg.numbers("radii", [0.4, 0.2, 0.1, 0.05]),
                        cfg.number("ball", 1.0), cfg.integer("points", 2000), norm, seed, limit)
    rep["epsilons"] = list(norm.epsilons)
    rows = [[r["r"], r["hausdorff"], r["directed_to_limit"], r["first_layer_lower_bound"]]
            for r in rep["rows"]]
    keys = ["deg4-limit-half-plane"] if m.name == "deg4-parabola" else []
    return Outcome(rep, rows, ["r", "hausdorff", "directed_to_limit", "first_layer_lower_bound"],
                   _expectations_for(_group_name(cfg), keys))


def cmd_curves(cfg: Config, seed: int):
    law = build_law(cfg)
    m = build_manifold(cfg, law)
    frame = adapted_frame(m, cfg.numbers("point"))
    lam = cfg.numbers("lambda")
    t_max = cfg.number("t_max", 0.1)
    steps = cfg.integer("steps", 10 ** 4)
    sol = integrate_curve(m, frame, lam, t_max, steps)
    t_values = cfg.numbers("t_values", [t_max * 10 ** (-k / 3) for k in range(7)])
    fit = extract_G(sol, frame, t_values)
    result = {"lambda": lam, "sigma": list(frame.sigma), "G": fit.G,
              "residual_slopes": {str(k): v for k, v in fit.residual_slopes.items()},
              "tangency_residual": sol.residual, "min_pivot_quality": sol.min_quality}
    targets = cfg.rows("targets")
    if targets is not None:
        result["coverage"] = coverage_diagnostic(m, frame, targets,
                                                 cfg.number("coverage_t_max", 1.0),
                                                 _norm(law, seed), seed=seed)
    idx = np.unique(np.searchsorted(sol.t_grid, t_values).clip(0, steps))
    rows = [[float(sol.t_grid[i])] + sol.coords[i].tolist() for i in idx]
    header = ["t"] + [f"c{i + 1}" for i in range(m.q)]
    return Outcome(result, rows, header)


def cmd_engel_suite(cfg: Config, seed: int):
    names = cfg.get("entries", "engel4 heisenberg1 e5").split()
    lines, exps, failed = [], [], 0
    for name in names:
        for e in catalog.get(name).expected:
            ok, detail = e.run()
            failed += not ok
            lines.append(f"{'PASS' if ok else 'FAIL'} {name}:{e.key} [{e.origin}] {detail}")
            exps.append({"entry": name, "key": e.key, "description": e.description,
                         "origin": e.origin, "passed": ok, "detail": detail})
    return Outcome({"passed": len(exps) - failed, "failed": failed}, expectations=exps,
                   text="\n".join(lines), status=EXIT_MISMATCH if failed else 0)


HANDLERS = {"validate-group": cmd_validate_group, "bch": cmd_bch, "degree": cmd_degree,
            "strata": cmd_strata, "measure": cmd_measure, "metric-factor": cmd_metric_factor,
            "blowup": cmd_blowup, "curves": cmd_curves, "engel-suite": cmd_engel_suite}


# ---------------------------------------------------------------------------
# driver


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="carnot", description="Submanifolds of stratified groups.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                   help="override or add a configuration entry")
    p.add_argument("--seed", type=int, help="seed (overrides the configuration)")
    p.add_argument("--output", metavar="PATH", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), help="report format")
    p.add_argument("--quiet", action="store_true", help="suppress progress text on stderr")
    p.add_argument("--version", action="version", version=f"carnot {__version__}")
    return p


def load(args) -> Config:
    cfg = Config()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        cfg.set(key.strip(), value.strip())
    if args.seed is not None:
        cfg.set("seed", args.seed)
    if args.command != "engel-suite" and "group" not in cfg:
        raise ConfigError("missing key 'group'")
    return cfg


def render(command: str, cfg: Config, out: Outcome, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if out.rows:
            w.writerow(out.header)
            w.writerows(_clean(out.rows))
        else:
            for k, v in sorted(_clean(out.result).items()):
                w.writerow([k, json.dumps(v, sort_keys=True)])
        return buf.getvalue()
    result = _clean(out.result)
    report = {"schema": SCHEMA, "version": __version__, "command": command,
              "config_hash": config_hash(cfg), "config": serialize_config(cfg),
              "seed": _seed(cfg), "epsilons": result.pop("epsilons", None),
              "expectations": _clean(out.expectations), "result": result}
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    warnings.simplefilter("ignore" if args.quiet else "default")
    try:
        cfg = load(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    fmt = args.format or cfg.get("format", "json")
    if fmt not in ("json", "csv"):
        print(f"error: unknown format {fmt!r}", file=sys.stderr)
        return EXIT_PRECONDITION
    try:
        out = HANDLERS[args.command](cfg, _seed(cfg))
        if isinstance(out.result, dict) and "epsilons" not in out.result \
                and args.command != "engel-suite" and out.status != EXIT_INVALID:
            out.result["epsilons"] = list(_norm(build_law(cfg), _seed(cfg)).epsilons)
    except InvalidAlgebraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if out.text is not None and not args.quiet and not (args.output or args.format):
        print(out.text)
        return out.status
    if out.text is not None and not args.quiet:
        print(out.text, file=sys.stderr)
    text = render(args.command, cfg, out, fmt)
    dest = args.output or cfg.get("output")
    try:
        if dest:
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return out.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
