"""Declarative Monte Carlo harness: simulate, derive, measure, normalize, aggregate.

A configuration is a nested JSON-compatible mapping. Every replication owns
the seed ``child_seed(master_seed, rep)``, so results do not depend on how
replications are scheduled across workers. All radii are measured on nested
windows of one realization per replication.
"""

from __future__ import annotations

import csv
import difflib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .covariance import CovarianceModel, Dependence, classify_dependence, model_from_config
from .derived import fisher_field, student_field
from .field_sim import MixingMatrix, centered_grid, child_seed, mix, simulate_vector_field
from .geometry import Window, WindowKind
from .sojourn import (
    LevelCheck,
    LevelSchedule,
    NormalizedStatistic,
    area_from_mask,
    normalize_fisher_lrd,
    normalize_short_range,
    normalize_student_lrd,
    validate_moving_level,
)
from .special import fisher_tail, student_tail
from .stats import SampleSummary, moments, qq_fit, qq_points, skewness_stderr

__all__ = [
    "ConfigError",
    "FieldSpec",
    "ExperimentConfig",
    "Record",
    "RadiusSummary",
    "ExperimentResult",
    "run_experiment",
    "write_outputs",
    "SigmaEstimate",
    "estimate_sigma_short_range",
    "ScalingProbe",
    "variance_scaling_probe",
    "config_hash",
]

log = logging.getLogger(__name__)

STUDENT_TAGS = ("ThS", "Th6", "Th8", "Th10")
FISHER_TAGS = ("Th3", "Th7", "Th9", "Th11")
LONG_RANGE_TAGS = ("Th6", "Th7", "Th8", "Th9", "Th10", "Th11")
MIXING_REQUIRED = ("Th10", "Th11")
MIXING_FORBIDDEN = ("Th6", "Th7", "Th8", "Th9")
MOVING_LEVEL_TAGS = ("Th8", "Th9")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.errors))


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    n: int
    m: int = 1

    @property
    def p(self) -> int:
        return self.n + 1 if self.kind == "student" else self.m + self.n

    @property
    def kappa(self) -> int:
        return 1 if self.kind == "student" else 2

    def tail(self, a: float) -> float:
        return student_tail(a, self.n) if self.kind == "student" else fisher_tail(a, self.m, self.n)

    def to_config(self) -> dict[str, Any]:
        if self.kind == "student":
            return {"kind": "student", "n": self.n}
        return {"kind": "fisher", "m": self.m, "n": self.n}


_TOP_KEYS = {
    "covariance": None,
    "field": None,
    "mixing": None,
    "window": "disk",
    "radii": [32, 64, 128, 256],
    "level": {"kind": "constant", "a": 1.0},
    "replications": 1000,
    "spacing": 0.25,
    "master_seed": 0,
    "theorem": None,
    "d": 2,
    "pad": 2,
    "clip_tol": 1e-6,
}
_REQUIRED = ("covariance", "field", "theorem")


def _unknown(keys, valid, where: str) -> list[str]:
    out = []
    for k in keys:
        if k not in valid:
            near = difflib.get_close_matches(k, list(valid), n=1)
            hint = f"; did you mean '{near[0]}'?" if near else ""
            out.append(f"unknown key '{k}' in {where}{hint}")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    covariance: CovarianceModel
    field: FieldSpec
    theorem: str
    mixing: MixingMatrix | None = None
    window: WindowKind = WindowKind.DISK
    radii: tuple[float, ...] = (32.0, 64.0, 128.0, 256.0)
    level: LevelSchedule = LevelSchedule.constant(1.0)
    replications: int = 1000
    spacing: float = 0.25
    master_seed: int = 0
    d: int = 2
    pad: int = 2
    clip_tol: float = 1e-6

    # -- parsing ----------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        """Validate a raw mapping, collecting all errors before raising."""
        if not isinstance(raw, Mapping):
            raise ConfigError(["configuration must be a key-value mapping"])
        errors: list[str] = _unknown(raw.keys(), _TOP_KEYS, "configuration")
        for k in _REQUIRED:
            if k not in raw:
                errors.append(f"missing required key '{k}'")
        vals = {k: raw.get(k, v) for k, v in _TOP_KEYS.items()}

        model = None
        if "covariance" in raw:
            cov = raw["covariance"]
            if isinstance(cov, str):
                cov = {"family": cov}
            if not isinstance(cov, Mapping):
                errors.append("covariance must be a mapping with a 'family' key")
            else:
                try:
                    model = model_from_config(cov)
                except ValueError as exc:
                    errors.append(f"covariance: {exc}")

        fspec = None
        if "field" in raw:
            fspec = _parse_field(raw["field"], errors)

        mixing = None
        if vals["mixing"] is not None:
            try:
                mixing = MixingMatrix(np.asarray(vals["mixing"], dtype=float))
            except (ValueError, TypeError) as exc:
                errors.append(f"mixing: {exc}")

        try:
            window = WindowKind(str(vals["window"]).lower())
        except ValueError:
            errors.append(f"window must be 'disk' or 'square', got {vals['window']!r}")
            window = WindowKind.DISK

        radii: tuple[float, ...] = ()
        try:
            radii = tuple(float(r) for r in vals["radii"])
            if not radii:
                errors.append("radii must be a nonempty list")
            elif any(r <= 0 for r in radii):
                errors.append("radii must be positive")
            elif any(b <= a for a, b in zip(radii, radii[1:])):
                errors.append("radii must be strictly ascending")
        except (TypeError, ValueError):
            errors.append(f"radii must be a list of numbers, got {vals['radii']!r}")

        level = _parse_level(vals["level"], errors)

        def _int(name, lo):
            v = vals[name]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                errors.append(f"{name} must be an integer, got {v!r}")
                return _TOP_KEYS[name]
            if v < lo:
                errors.append(f"{name} must be >= {lo}, got {v}")
            return int(v)

        reps = _int("replications", 1)
        seed = _int("master_seed", 0)
        if isinstance(seed, int) and seed >= 2**64:
            errors.append("master_seed must fit in 64 bits")
        d = _int("d", 1)
        if d not in (1, 2):
            errors.append(f"d must be 1 or 2, got {d}")
        pad = _int("pad", 1)
        spacing = vals["spacing"]
        if not isinstance(spacing, (int, float)) or not spacing > 0:
            errors.append(f"spacing must be a positive number, got {spacing!r}")
        clip_tol = vals["clip_tol"]
        if not isinstance(clip_tol, (int, float)) or clip_tol < 0:
            errors.append(f"clip_tol must be a nonnegative number, got {clip_tol!r}")

        theorem = raw.get("theorem")
        if theorem is not None and theorem not in STUDENT_TAGS + FISHER_TAGS:
            errors.append(f"unknown theorem tag {theorem!r}; expected one of {sorted(STUDENT_TAGS + FISHER_TAGS)}")
            theorem = None

        if model is not None and fspec is not None and theorem is not None:
            errors.extend(_compatibility(model, fspec, theorem, mixing, level, d))
        if errors:
            raise ConfigError(errors)
        return cls(
            covariance=model,
            field=fspec,
            theorem=theorem,
            mixing=mixing,
            window=window,
            radii=radii,
            level=level,
            replications=reps,
            spacing=float(spacing),
            master_seed=seed,
            d=d,
            pad=pad,
            clip_tol=float(clip_tol),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"configuration is not valid JSON: {exc}"]) from None
        return cls.from_dict(raw)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError([f"configuration file not found: {p}"])
        return cls.from_json(p.read_text(encoding="utf-8"))

    def to_dict(self) -> dict[str, Any]:
        return {
            "covariance": self.covariance.to_config(),
            "field": self.field.to_config(),
            "mixing": None if self.mixing is None else self.mixing.entries.tolist(),
            "window": self.window.value,
            "radii": list(self.radii),
            "level": self.level.to_config(),
            "replications": self.replications,
            "spacing": self.spacing,
            "master_seed": self.master_seed,
            "theorem": self.theorem,
            "d": self.d,
            "pad": self.pad,
            "clip_tol": self.clip_tol,
        }

    def replace(self, **changes) -> "ExperimentConfig":
        raw = self.to_dict()
        raw.update(changes)
        return ExperimentConfig.from_dict(raw)

    # -- derived quantities -------------------------------------------------

    def window_at(self, r: float) -> Window:
        return Window(self.window, r, self.d)

    def grid(self):
        return centered_grid(self.d, self.window_at(max(self.radii)).half_width, self.spacing)

    @property
    def dependence(self) -> Dependence:
        return classify_dependence(self.covariance, self.d, self.field.kappa)


def _parse_field(raw, errors: list[str]) -> FieldSpec | None:
    if not isinstance(raw, Mapping):
        errors.append("field must be a mapping such as {'kind': 'fisher', 'm': 1, 'n': 2}")
        return None
    kind = str(raw.get("kind", "")).lower()
    if kind not in ("student", "fisher"):
        errors.append(f"field kind must be 'student' or 'fisher', got {raw.get('kind')!r}")
        return None
    valid = {"kind", "n"} if kind == "student" else {"kind", "m", "n"}
    errors.extend(_unknown(raw.keys(), valid, "field"))
    out = []
    for name in sorted(valid - {"kind"}):
        v = raw.get(name, 1 if name == "m" else None)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            errors.append(f"field.{name} must be a positive integer, got {v!r}")
            return None
        out.append(v)
    if kind == "student":
        return FieldSpec("student", n=out[0])
    return FieldSpec("fisher", n=out[1], m=out[0])


def _parse_level(raw, errors: list[str]) -> LevelSchedule:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return LevelSchedule.constant(float(raw))
    if not isinstance(raw, Mapping):
        errors.append(f"level must be a number or a mapping, got {raw!r}")
        return LevelSchedule.constant(1.0)
    kind = str(raw.get("kind", "constant")).lower()
    valid = {"kind", "a"} if kind == "constant" else {"kind", "c", "beta"}
    errors.extend(_unknown(raw.keys(), valid, "level"))
    try:
        if kind == "constant":
            return LevelSchedule.constant(float(raw.get("a", 1.0)))
        return LevelSchedule(kind, c=float(raw.get("c", 1.0)), beta=float(raw.get("beta", 0.0)))
    except (TypeError, ValueError) as exc:
        errors.append(f"level: {exc}")
        return LevelSchedule.constant(1.0)


def _compatibility(model, fspec, theorem, mixing, level, d) -> list[str]:
    errs = []
    if theorem in STUDENT_TAGS and fspec.kind != "student":
        errs.append(f"{theorem} concerns Student fields; got field kind '{fspec.kind}'")
    if theorem in FISHER_TAGS and fspec.kind != "fisher":
        errs.append(f"{theorem} concerns Fisher-Snedecor fields; got field kind '{fspec.kind}'")
    alpha = model.alpha
    if theorem in ("Th7", "Th9", "Th11"):
        if alpha is None or not (0 < alpha < d / 2):
            errs.append(f"{theorem} requires long-range α ∈ (0, d/2)")
    elif theorem in ("Th6", "Th8", "Th10"):
        if alpha is None or not (0 < alpha < d):
            errs.append(f"{theorem} requires long-range α ∈ (0, d)")
    elif theorem in ("Th3", "ThS"):
        if classify_dependence(model, d, fspec.kappa) is not Dependence.SHORT_RANGE:
            errs.append(f"{theorem} requires short-range dependence (α·κ > d with κ={fspec.kappa})")
    if theorem in MIXING_REQUIRED and mixing is None:
        errs.append(f"{theorem} requires a mixing matrix")
    if theorem in MIXING_FORBIDDEN and mixing is not None:
        errs.append(f"{theorem} assumes independent components; remove 'mixing' or use Th10/Th11")
    if mixing is not None and mixing.p != fspec.p:
        errs.append(f"mixing matrix is {mixing.p}x{mixing.p} but the field needs {fspec.p} components")
    if theorem == "Th11" and mixing is not None and mixing.p == fspec.p:
        if not (mixing.is_orthogonal and mixing.is_block_diagonal([fspec.m, fspec.n])):
            errs.append(f"Th11 requires an orthogonal block-diagonal mixing matrix with blocks {fspec.m} and {fspec.n}")
    if theorem in MOVING_LEVEL_TAGS:
        if alpha is not None and 0 < alpha < d:
            check = validate_moving_level(level, fspec.n, (alpha, d), fspec.kind)
            if check is LevelCheck.VIOLATES:
                errs.append(f"level schedule {level.to_config()} grows too fast for {theorem}")
    elif not level.is_constant:
        errs.append(f"{theorem} uses a constant level; moving levels need Th8 or Th9")
    if fspec.kind == "fisher":
        if level.is_constant and not level.a > 0:
            errs.append("Fisher levels must be positive")
    return errs


def config_hash(cfg: ExperimentConfig | Mapping[str, Any]) -> str:
    """SHA-256 of the canonical (sorted-key) JSON form."""
    import hashlib

    raw = cfg.to_dict() if isinstance(cfg, ExperimentConfig) else dict(cfg)
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- running --------------------------------------------------------------


@dataclass(frozen=True)
class Record:
    r: float
    rep: int
    level: float
    area: float
    statistic: float
    nan_cells: int


@dataclass(frozen=True)
class Failure:
    rep: int
    error: str


@dataclass
class RadiusSummary:
    r: float
    summary: SampleSummary
    skewness_se: float
    qq_r2: float
    failures: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[Record]
    failures: list[Failure]
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def failure_rate(self) -> float:
        return len(self.failures) / self.config.replications

    def statistics(self, r: float) -> np.ndarray:
        return np.array([rec.statistic for rec in self.records if rec.r == r])

    def areas(self, r: float) -> np.ndarray:
        return np.array([rec.area for rec in self.records if rec.r == r])

    def summaries(self) -> list[RadiusSummary]:
        out = []
        for r in self.config.radii:
            x = self.statistics(r)
            summ = moments(x)
            out.append(RadiusSummary(r, summ, skewness_stderr(x.size) if x.size >= 3 else math.nan, qq_fit(x).r_squared, len(self.failures)))
        return out


_WORKER_CACHE: dict[Any, list[np.ndarray]] = {}


def _masks(cfg: ExperimentConfig, grid) -> list[np.ndarray]:
    key = (grid, cfg.window, cfg.radii, cfg.d)
    if key not in _WORKER_CACHE:
        _WORKER_CACHE.clear()
        _WORKER_CACHE[key] = [cfg.window_at(r).mask(grid) for r in cfg.radii]
    return _WORKER_CACHE[key]


def _replicate(cfg: ExperimentConfig, rep: int):
    """Raw measurements for one replication: per radius (area, nan_cells), plus stage timings."""
    grid = cfg.grid()
    masks = _masks(cfg, grid)
    t0 = time.perf_counter()
    v = simulate_vector_field(cfg.covariance, cfg.field.p, grid, child_seed(cfg.master_seed, rep), pad=cfg.pad, clip_tol=cfg.clip_tol)
    if cfg.mixing is not None:
        v = mix(v, cfg.mixing)
    t1 = time.perf_counter()
    if cfg.field.kind == "student":
        f = student_field(v, cfg.field.n)
    else:
        f = fisher_field(v, cfg.field.m, cfg.field.n)
    t2 = time.perf_counter()
    out = []
    for r, mask in zip(cfg.radii, masks):
        c = area_from_mask(f.values, mask, cfg.level(r), grid.cell_volume)
        out.append((c.area, c.nan_cells))
    t3 = time.perf_counter()
    return out, {"simulate": t1 - t0, "derive": t2 - t1, "measure": t3 - t2}


def _replicate_safe(cfg: ExperimentConfig, rep: int):
    try:
        out, times = _replicate(cfg, rep)
        return rep, out, times, None
    except Exception as exc:  # a failed replication is recorded, never fatal
        return rep, None, {}, f"{type(exc).__name__}: {exc}"


def _replicate_chunk(cfg: ExperimentConfig, reps: Sequence[int]):
    return [_replicate_safe(cfg, rep) for rep in reps]


def normalize(cfg: ExperimentConfig, area: float, r: float) -> NormalizedStatistic:
    """Apply the normalization selected by ``cfg.theorem`` to a raw area."""
    a = cfg.level(r)
    w = cfg.window_at(r)
    fs = cfg.field
    params = {"a": a}
    tag = cfg.theorem
    if tag in ("Th3", "ThS"):
        return normalize_short_range(area, r, cfg.d, w, fs.tail(a), tag=tag, params=params)
    alpha = cfg.covariance.alpha
    if fs.kind == "student":
        return normalize_student_lrd(area, r, cfg.d, alpha, cfg.covariance, a, fs.n, w, tag=tag, params=params)
    return normalize_fisher_lrd(area, r, cfg.d, alpha, cfg.covariance, a, fs.m, fs.n, w, tag=tag, params=params)


def default_workers() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover
        return max(1, os.cpu_count() or 1)


def run_experiment(cfg: ExperimentConfig, *, workers: int | None = None) -> ExperimentResult:
    """Run all replications and normalize every (radius, replication) area.

    Output depends only on ``cfg``; ``workers`` changes scheduling only.
    """
    t_start = time.perf_counter()
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    grid = cfg.grid()
    for r in cfg.radii:
        if not cfg.window_at(r).fits(grid):
            raise ValueError(f"window of scale {r} does not fit the simulation grid")
    reps = list(range(cfg.replications))
    if workers == 1 or len(reps) < 2:
        raw = _replicate_chunk(cfg, reps)
    else:
        n_chunks = min(len(reps), workers * 4)
        chunks = [reps[i::n_chunks] for i in range(n_chunks)]
        raw = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_replicate_chunk, [cfg] * len(chunks), chunks):
                raw.extend(part)
    raw.sort(key=lambda item: item[0])

    t_norm = time.perf_counter()
    timings = {"simulate": 0.0, "derive": 0.0, "measure": 0.0}
    records: list[Record] = []
    failures: list[Failure] = []
    for rep, out, times, err in raw:
        for k, v in times.items():
            timings[k] += v
        if err is not None:
            log.warning("replication %d failed: %s", rep, err)
            failures.append(Failure(rep, err))
            continue
        for r, (area, nan_cells) in zip(cfg.radii, out):
            stat = normalize(cfg, area, r)
            records.append(Record(r, rep, cfg.level(r), area, stat.statistic, nan_cells))
    records.sort(key=lambda rec: (cfg.radii.index(rec.r), rec.rep))
    now = time.perf_counter()
    timings["normalize"] = now - t_norm
    timings["total"] = now - t_start
    if failures:
        log.warning("%d of %d replications failed", len(failures), cfg.replications)
    return ExperimentResult(cfg, records, failures, timings)


def _fmt(x: float) -> str:
    return repr(float(x))


def records_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["r", "rep", "level", "area", "statistic", "nan_cells"])
    for rec in result.records:
        wr.writerow([_fmt(rec.r), rec.rep, _fmt(rec.level), _fmt(rec.area), _fmt(rec.statistic), rec.nan_cells])
    return buf.getvalue()


def summary_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(
        ["r", "n", "mean", "variance", "skewness", "skewness_se", "excess_kurtosis", "ks_D", "ks_p", "qq_r2", "failures"]
    )
    for s in result.summaries():
        m = s.summary
        wr.writerow(
            [_fmt(s.r), m.n, _fmt(m.mean), _fmt(m.variance), _fmt(m.skewness), _fmt(s.skewness_se),
             _fmt(m.excess_kurtosis), _fmt(m.ks_D), _fmt(m.ks_p), _fmt(s.qq_r2), s.failures]
        )
    return buf.getvalue()


def qq_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["r", "theoretical_quantile", "sample_quantile"])
    for r in result.config.radii:
        for t, s in qq_points(result.statistics(r)):
            wr.writerow([_fmt(r), _fmt(t), _fmt(s)])
    return buf.getvalue()


def write_outputs(result: ExperimentResult, out_dir: str | os.PathLike) -> dict[str, Path]:
    """Write ``records.csv``, ``summary.csv`` and ``qq.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, text in (("records.csv", records_csv(result)), ("summary.csv", summary_csv(result)), ("qq.csv", qq_csv(result))):
        p = out / name
        p.write_text(text, encoding="utf-8", newline="")
        paths[name] = p
    return paths


# -- sigma^2 for short-range statistics -----------------------------------------


@dataclass(frozen=True)
class SigmaEstimate:
    value: float
    stderr: float
    n_fields: int
    cutoff: float


def _autocov_fft(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # unnormalized lag sums and pair counts with zero padding (no wrap-around)
    import scipy.fft as sfft

    shape = tuple(2 * n for n in z.shape)
    fz = sfft.rfftn(z, s=shape)
    sums = sfft.irfftn(fz * np.conj(fz), s=shape)
    ones = sfft.rfftn(np.ones(z.shape), s=shape)
    counts = np.rint(sfft.irfftn(ones * np.conj(ones), s=shape))
    return sums, counts


def estimate_sigma_short_range(
    cfg: ExperimentConfig,
    n_pairs: int,
    seed: int,
    *,
    half_width: float = 16.0,
    max_lag: float = 8.0,
    spacing: float | None = None,
) -> SigmaEstimate:
    """``sigma^2 = int Cov(zeta(0), zeta(x)) dx`` for the centered exceedance indicator ``zeta``.

    ``n_pairs`` independent fields on a ``2*half_width`` square are simulated,
    each giving an empirical lag covariance (pairs averaged per lattice lag).
    Covariances at equal lattice distance are pooled and integrated over
    ``rho`` with the weight ``2 pi rho`` by the trapezoid rule. The
    integration stops at the first radial shell (width one grid step) whose
    mean falls below twice its standard error. The standard error comes from
    the spread of the per-field integrals.

    ``spacing`` overrides the grid step of ``cfg``; the radial rule has an
    O(h) bias where the indicator covariance is steep, so a step well below
    the correlation length is advisable.
    """
    if cfg.d != 2:
        raise ValueError("sigma estimation is implemented for d = 2")
    if cfg.dependence is not Dependence.SHORT_RANGE:
        raise ValueError("sigma^2 diverges for long-range dependence; the estimator refuses this configuration")
    if n_pairs < 2:
        raise ValueError("need at least 2 independent fields")
    from .field_sim import GridSpec

    h = cfg.spacing if spacing is None else float(spacing)
    if not h > 0:
        raise ValueError("spacing must be positive")
    n = int(math.ceil(2 * half_width / h))
    grid = GridSpec(2, (n, n), h)
    a = cfg.level(half_width)
    tail = cfg.field.tail(a)
    k = np.arange(2 * n)
    lag1 = np.minimum(k, 2 * n - k)
    d2 = lag1[:, None] ** 2 + lag1[None, :] ** 2
    dist = np.sqrt(d2) * h
    n_shell = int(max_lag / h) + 1
    shell = np.rint(dist / h).astype(int)
    keep = shell < n_shell
    # exact lattice distances for the quadrature, rounded shells for the noise floor
    uniq, inv = np.unique(d2[keep], return_inverse=True)
    rho = np.sqrt(uniq) * h
    per_dist = np.empty((n_pairs, uniq.size))
    per_shell = np.empty((n_pairs, n_shell))
    dist_count = np.bincount(inv)
    shell_count = np.bincount(shell[keep], minlength=n_shell)
    for i in range(n_pairs):
        v = simulate_vector_field(cfg.covariance, cfg.field.p, grid, child_seed(seed, i), pad=cfg.pad, clip_tol=cfg.clip_tol)
        if cfg.mixing is not None:
            v = mix(v, cfg.mixing)
        f = student_field(v, cfg.field.n) if cfg.field.kind == "student" else fisher_field(v, cfg.field.m, cfg.field.n)
        zeta = (f.values > a).astype(float) - tail
        sums, counts = _autocov_fft(zeta)
        cov = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)[keep]
        per_dist[i] = np.bincount(inv, weights=cov) / dist_count
        per_shell[i] = np.bincount(shell[keep], weights=cov, minlength=n_shell) / shell_count
    mean = per_shell.mean(axis=0)
    se = per_shell.std(axis=0, ddof=1) / math.sqrt(n_pairs)
    below = np.flatnonzero((np.abs(mean) < 2 * se) & (np.arange(n_shell) > 0))
    cut = (int(below[0]) if below.size else n_shell - 1) * h
    use = rho <= cut + 1e-12
    if use.sum() > 1:
        integrals = trapezoid(2 * math.pi * rho[use] * per_dist[:, use], rho[use], axis=1)
    else:
        integrals = np.zeros(n_pairs)
    return SigmaEstimate(float(integrals.mean()), float(integrals.std(ddof=1) / math.sqrt(n_pairs)), n_pairs, float(cut))


# -- variance scaling --------------------------------------------------------------


@dataclass(frozen=True)
class ScalingProbe:
    radii: tuple[float, ...]
    variances: tuple[float, ...]
    variance_se: tuple[float, ...]
    slope: float
    slope_se: float
    predicted: float

    def rows(self) -> list[tuple[float, float, float]]:
        return [(r, v, self.predicted) for r, v in zip(self.radii, self.variances)]


def predicted_slope(cfg: ExperimentConfig) -> float:
    """``2d - kappa alpha`` for long-range configurations, ``d`` otherwise."""
    dep = cfg.dependence
    if dep is Dependence.LONG_RANGE:
        return 2 * cfg.d - cfg.field.kappa * cfg.covariance.alpha
    if dep is Dependence.SHORT_RANGE:
        return float(cfg.d)
    raise ValueError("no power-law prediction at the short/long boundary (logarithmic corrections)")


def variance_scaling_probe(cfg: ExperimentConfig, result: ExperimentResult | None = None, *, workers: int | None = None) -> ScalingProbe:
    """Log-log regression of ``Var M_r`` on ``r`` across the configured radii."""
    if len(cfg.radii) < 3:
        raise ValueError("variance scaling needs at least 3 radii")
    if result is None:
        result = run_experiment(cfg, workers=workers)
    var, var_se = [], []
    for r in cfg.radii:
        a = result.areas(r)
        v = float(np.var(a, ddof=1))
        var.append(v)
        var_se.append(v * math.sqrt(2.0 / (a.size - 1)))
    x = np.log(np.asarray(cfg.radii))
    y = np.log(np.asarray(var))
    # weights from the delta-method variance of log(var)
    coef, cov = np.polyfit(x, y, 1, cov="unscaled", w=1.0 / (np.asarray(var_se) / np.asarray(var)))
    return ScalingProbe(tuple(cfg.radii), tuple(var), tuple(var_se), float(coef[0]), float(math.sqrt(cov[0, 0])), predicted_slope(cfg))
