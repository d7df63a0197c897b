"""Command-line entry point ``sojourn``.

Exit codes: 0 success, 1 invalid usage or configuration, 2 runtime failure.
The log level comes from ``SOJOURN_LOG_LEVEL`` (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .covariance import model_from_config
from .derived import fisher_field, student_field
from .experiments import ConfigError, ExperimentConfig, config_hash, normalize, run_experiment, write_outputs
from .field_sim import VectorFieldSample, centered_grid, simulate_vector_field
from .fieldio import load_field, save_field
from .geometry import Window, c1, c3_spectral, psi_ball_density
from .hermite import estimate_coefficients, fisher_indicator_G, hermite_rank, multi_indices, student_indicator_G
from .sojourn import excursion_counts
from .special import c2, c4, fisher_cdf, fisher_tail, student_cdf, student_hermite_c1, student_tail
from .stats import qq_points

__all__ = ["main", "parse_config", "RunManifest", "build_parser"]

log = logging.getLogger("sojourn_fields")

PROFILES = {"smoke": 100, "paper": 1000}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    tool_version: str
    config_hash: str
    master_seed: int
    started: str
    finished: str
    timings: dict[str, float]
    config: dict[str, Any]
    replications_failed: int = 0
    failures: list[dict[str, Any]] = field(default_factory=list)

    def write(self, path: str | os.PathLike) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def parse_config(path: str | os.PathLike) -> ExperimentConfig:
    """Load and validate an experiment configuration (a run manifest is accepted too)."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"configuration file not found: {p}"])
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{p}: not valid JSON-compatible text: {exc}"]) from None
    if isinstance(raw, dict) and "tool_version" in raw and "config" in raw:
        raw = raw["config"]
    return ExperimentConfig.from_dict(raw)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _writer(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def _emit(rows: Sequence[Sequence[Any]], header: Sequence[str], out: str | None) -> None:
    fh, close = _writer(out)
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    finally:
        if close:
            fh.close()


def _load_json(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError([f"configuration file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON-compatible text: {exc}"]) from None


# -- subcommands ------------------------------------------------------------


def cmd_simulate(args) -> int:
    raw = _load_json(args.config)
    allowed = {"covariance", "p", "d", "half_width", "spacing", "seed", "pad", "clip_tol"}
    bad = set(raw) - allowed
    if bad:
        raise ConfigError([f"unknown simulate key '{k}'" for k in sorted(bad)])
    cov = raw.get("covariance", {"family": args.covariance, "sigma": args.sigma, "theta": args.theta})
    if isinstance(cov, dict) and str(cov.get("family", "")).lower().startswith("gauss"):
        cov = {"family": cov["family"]}
    model = model_from_config(cov)
    d = int(raw.get("d", args.d))
    grid = centered_grid(d, float(raw.get("half_width", args.half_width)), float(raw.get("spacing", args.spacing)))
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    v = simulate_vector_field(
        model, int(raw.get("p", args.p)), grid, seed, pad=int(raw.get("pad", args.pad)), clip_tol=float(raw.get("clip_tol", args.clip_tol))
    )
    save_field(v, args.out)
    log.info("wrote %d-component field on %s to %s", v.p, grid.shape, args.out)
    return 0


def cmd_derive(args) -> int:
    v = load_field(args.input)
    if args.kind == "student":
        f = student_field(v, args.n)
    else:
        f = fisher_field(v, args.m, args.n)
    save_field(VectorFieldSample(f.grid, [f.values]), args.out)
    return 0


def cmd_excursion(args) -> int:
    v = load_field(args.input)
    if v.p != 1:
        raise ValueError(f"excursion expects a scalar field, got {v.p} components")
    from .field_sim import FieldSample

    f = FieldSample(v.grid, v.components[0])
    rows = []
    for r in args.r:
        w = Window(args.window, r, v.grid.d)
        cnt = excursion_counts(f, w, args.level)
        stat, tag = "", ""
        if args.theorem:
            raw = {
                "covariance": {"family": args.covariance} if args.covariance.startswith("gauss")
                else {"family": args.covariance, "sigma": args.sigma, "theta": args.theta},
                "field": {"kind": args.field, "n": args.n} if args.field == "student"
                else {"kind": "fisher", "m": args.m, "n": args.n},
                "theorem": args.theorem,
                "window": args.window,
                "radii": [r],
                "level": args.level,
                "d": v.grid.d,
                "spacing": v.grid.spacing,
                "replications": 1,
            }
            cfg = ExperimentConfig.from_dict(raw)
            stat, tag = normalize(cfg, cnt.area, r).statistic, args.theorem
        rows.append((float(r), float(args.level), cnt.area, stat, tag))
        if cnt.nan_cells:
            log.warning("r=%g: %d undefined cells excluded", r, cnt.nan_cells)
    _emit(rows, ["r", "level", "area", "statistic", "theorem_tag"], args.out)
    return 0


def cmd_experiment(args) -> int:
    cfg = parse_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.profile:
        changes["replications"] = PROFILES[args.profile]
    if changes:
        cfg = cfg.replace(**changes)
    print(json.dumps({"effective_config": cfg.to_dict()}, sort_keys=True), file=sys.stderr)
    started = _now()
    result = run_experiment(cfg, workers=args.workers)
    t0 = time.perf_counter()
    write_outputs(result, args.out)
    timings = dict(result.timings)
    timings["write"] = time.perf_counter() - t0
    RunManifest(
        tool_version=__version__,
        config_hash=config_hash(cfg),
        master_seed=cfg.master_seed,
        started=started,
        finished=_now(),
        timings=timings,
        config=cfg.to_dict(),
        replications_failed=len(result.failures),
        failures=[{"rep": f.rep, "error": f.error} for f in result.failures],
    ).write(Path(args.out) / "manifest.json")
    if result.failures and len(result.failures) == cfg.replications:
        log.error("every replication failed")
        return 2
    return 0


def cmd_constants(args) -> int:
    rows: list[tuple[str, str, float]] = []
    if args.which == "c2":
        rows.append(("c2", f"d={args.d};alpha={args.alpha}", c2(args.d, args.alpha)))
    elif args.which == "c4":
        rows.append(("c4", f"a={args.a};n={args.n};m={args.m}", c4(args.a, args.n, args.m)))
    elif args.which == "student-c1":
        rows.append(("student_hermite_c1", f"a={args.a};n={args.n}", student_hermite_c1(args.a, args.n)))
    else:
        rows.append(("student_cdf", f"u={args.a};n={args.n}", student_cdf(args.a, args.n)))
        rows.append(("student_tail", f"u={args.a};n={args.n}", student_tail(args.a, args.n)))
        if args.a >= 0:
            rows.append(("fisher_cdf", f"u={args.a};m={args.m};n={args.n}", fisher_cdf(args.a, args.m, args.n)))
            rows.append(("fisher_tail", f"u={args.a};m={args.m};n={args.n}", fisher_tail(args.a, args.m, args.n)))
    _emit(rows, ["name", "args", "value"], args.out)
    return 0


def cmd_geometry(args) -> int:
    if args.which == "psi":
        rho = np.linspace(0.0, 2.0 * args.r, args.points)
        vals = psi_ball_density(args.d, args.r, rho)
        _emit(list(zip(rho, np.atleast_1d(vals))), ["rho", "psi"], args.out)
        return 0
    w = Window(args.window, 1.0, args.d)
    if args.which == "c1":
        _emit([(args.kappa, args.alpha, c1(args.kappa, args.alpha, w))], ["kappa", "alpha", "c1"], args.out)
    else:
        res = c3_spectral(args.d, args.alpha, w, detail=True)
        _emit([(args.alpha, res.value, res.truncation, res.tail_bound)], ["alpha", "c3", "truncation", "tail_bound"], args.out)
    return 0


def cmd_hermite(args) -> int:
    if args.field == "student":
        G, p = student_indicator_G(args.a, args.n), args.n + 1
    else:
        G, p = fisher_indicator_G(args.a, args.m, args.n), args.m + args.n
    if args.which == "rank":
        res = hermite_rank(G, p, args.order, args.samples, args.seed)
        _emit([("" if res.kappa is None else res.kappa, int(res.inconclusive))], ["kappa", "inconclusive"], args.out)
        return 0
    nus = [nu for k in range(args.order + 1) for nu in multi_indices(p, k)]
    est = estimate_coefficients(G, nus, args.samples, args.seed)
    _emit([(str(nu), c.value, c.stderr) for nu, c in est.items()], ["nu", "estimate", "stderr"], args.out)
    return 0


def cmd_stats(args) -> int:
    with open(args.input, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "statistic" not in rows[0]:
        raise ValueError(f"{args.input}: expected a records file with a 'statistic' column")
    radii = sorted({float(row["r"]) for row in rows}) if "r" in rows[0] else [math.nan]
    if args.r is not None:
        radii = [args.r]
    out = []
    for r in radii:
        x = [float(row["statistic"]) for row in rows if math.isnan(r) or float(row["r"]) == r]
        if not x:
            raise ValueError(f"no records for r={r}")
        out.extend((r, t, s) for t, s in qq_points(x))
    _emit(out, ["r", "theoretical_quantile", "sample_quantile"], args.out)
    return 0


# -- parser ---------------------------------------------------------------------


def _add_cov(p):
    p.add_argument("--covariance", default="generalized_cauchy", choices=["gaussian", "generalized_cauchy", "cauchy"])
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--theta", type=float, default=0.25)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sojourn", description="Sojourn measures of Student and Fisher-Snedecor random fields.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="{simulate,derive,excursion,experiment,constants,geometry,hermite,stats}", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="simulate a Gaussian vector field and write it to a file")
    p.add_argument("--config", help="JSON file with covariance, p, d, half_width, spacing, seed, pad, clip_tol")
    _add_cov(p)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--half-width", type=float, default=8.0)
    p.add_argument("--spacing", type=float, default=0.25)
    p.add_argument("--seed", type=int)
    p.add_argument("--pad", type=int, default=2, help="initial circulant padding factor")
    p.add_argument("--clip-tol", type=float, default=1e-6, help="relative negative eigenvalue mass tolerated")
    p.add_argument("--out", required=True, help="output path (.csv for text, anything else for binary)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("derive", help="Student or Fisher-Snedecor transform of a vector field file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--kind", choices=["student", "fisher"], required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("excursion", help="excursion areas of a scalar field file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--window", choices=["disk", "square"], default="disk")
    p.add_argument("--r", type=float, nargs="+", required=True)
    p.add_argument("--theorem", choices=["Th3", "ThS", "Th6", "Th7", "Th8", "Th9"])
    p.add_argument("--field", choices=["student", "fisher"], default="fisher")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--n", type=int, default=2)
    _add_cov(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_excursion)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a configuration file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--workers", type=int, help="worker processes (default: available CPUs)")
    p.add_argument("--profile", choices=sorted(PROFILES), help="smoke: 100 replications, paper: 1000")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("constants", help="closed-form constants")
    p.add_argument("which", choices=["c2", "c4", "student-c1", "cdf"])
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("geometry", help="distance densities and window constants")
    p.add_argument("which", choices=["psi", "c1", "c3"])
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--window", choices=["disk", "square"], default="disk")
    p.add_argument("--kappa", type=int, default=1)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("hermite", help="Hermite coefficients and rank of exceedance indicators")
    p.add_argument("which", choices=["coeffs", "rank"])
    p.add_argument("--field", choices=["student", "fisher"], required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_hermite)

    p = sub.add_parser("stats", help="Q-Q export from a records file")
    p.add_argument("which", choices=["qq"])
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--r", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)
    return ap


def _configure_logging() -> None:
    level = os.environ.get("SOJOURN_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except ConfigError as exc:
        print(f"sojourn: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"sojourn: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"sojourn: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
