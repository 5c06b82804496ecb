"""Benchmark machinery: reference solutions, accuracy/stability/cost studies.

A study integrates a set of schemes over a shared ladder of step sizes and
measures, per run: the relative max-norm error of the membrane potential
against a cached fourth-order reference on a ``2^r``-times finer mesh,
relative errors of the action-potential biomarkers, the integrator wall
time (median over repeats), stability, and the Newton iteration total.

Rows serialize to CSV with the fixed header::

    scheme,order,h,e_inf,e_ta,e_tr,e_apd,cpu_s,stable,newton_iters

Floats are written with ``repr`` (shortest round-trip), undefined values as
empty fields, and booleans as ``true``/``false``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import statistics
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .beeler_reuter import StimulusProfile, beeler_reuter_system
from .postprocess import (
    BiomarkerUndefined,
    extract_biomarkers,
    biomarker_errors,
    linf_relative_error,
)
from .schemes import ALL_SCHEME_KEYS, SchemeSpec, integrate
from .splitsys import SplitSystem, TimeMesh, Trajectory

REPORT_FIELDS = (
    "scheme", "order", "h", "e_inf", "e_ta", "e_tr", "e_apd",
    "cpu_s", "stable", "newton_iters",
)
REPORT_HEADER = ",".join(REPORT_FIELDS)

DEFAULT_STEPS = (0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625)
DEFAULT_REFINE = 8


class ConfigError(ValueError):
    """Invalid benchmark configuration (bad key, value, or mesh ladder)."""


@dataclass(frozen=True)
class RunConfig:
    """Benchmark problem setup shared by all commands."""

    model: str = "beeler-reuter"
    t_end: float = 396.0
    refine: int = DEFAULT_REFINE
    repeats: int = 5
    stim_start: float = 20.0
    stim_width: float = 1.0
    stim_charge: float = 50.0
    stim_exponent: int = 5
    cache_dir: Optional[str] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(
                f"unknown model {self.model!r}; available: {sorted(MODELS)}"
            )
        if not (self.t_end > 0.0):
            raise ConfigError("t_end must be positive")
        if self.refine < 0:
            raise ConfigError("refine must be non-negative")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")


_CONFIG_TYPES = {
    "model": str,
    "t_end": float,
    "refine": int,
    "repeats": int,
    "stim_start": float,
    "stim_width": float,
    "stim_charge": float,
    "stim_exponent": int,
    "cache_dir": str,
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment) into typed
    overrides for :class:`RunConfig`.  Unknown keys or unparseable values
    raise :class:`ConfigError`."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"line {lineno}: unknown option {key!r}")
        try:
            out[key] = _CONFIG_TYPES[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return out


def load_config(path: Optional[str] = None, **overrides) -> RunConfig:
    """Build a :class:`RunConfig` from an optional config file plus keyword
    overrides (``None`` overrides are dropped)."""
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        values.update(parse_config_text(p.read_text()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown options: {sorted(unknown)}")
    return RunConfig(**values)


def _build_beeler_reuter(cfg: RunConfig) -> SplitSystem:
    stim = StimulusProfile(
        t_start=cfg.stim_start,
        width=cfg.stim_width,
        charge=cfg.stim_charge,
        exponent=cfg.stim_exponent,
    )
    return beeler_reuter_system(stimulus=stim, t_end=cfg.t_end)


def _build_linear_test(cfg: RunConfig) -> SplitSystem:
    # Scalar decay y' = -y, a stiff-free sanity model with a known solution.
    return SplitSystem(
        dim=1,
        stabilized=1,
        eval_a=lambda t, y: np.array([-1.0]),
        eval_b=lambda t, y: np.zeros(1),
        y0=np.array([1.0]),
        t_end=cfg.t_end,
        name="linear-test",
    )


MODELS = {
    "beeler-reuter": _build_beeler_reuter,
    "linear-test": _build_linear_test,
}


def build_system(cfg: RunConfig) -> SplitSystem:
    return MODELS[cfg.model](cfg)


# ---------------------------------------------------------------------------
# Reference solutions with on-disk caching.

def reference_signature(cfg: RunConfig, m_ref: int) -> str:
    """Digest identifying a reference run: model, problem parameters, mesh,
    and the package version (bumping the version invalidates caches)."""
    from . import __version__

    parts = [
        "rk_4",
        cfg.model,
        repr(float(cfg.t_end)),
        str(int(m_ref)),
        __version__,
    ]
    if cfg.model == "beeler-reuter":
        parts += [
            repr(float(cfg.stim_start)),
            repr(float(cfg.stim_width)),
            repr(float(cfg.stim_charge)),
            str(int(cfg.stim_exponent)),
        ]
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


def _cache_path(cfg: RunConfig, m_ref: int) -> Optional[Path]:
    if cfg.cache_dir is None:
        return None
    sig = reference_signature(cfg, m_ref)
    return Path(cfg.cache_dir) / f"ionstep_ref_{sig[:20]}.npz"


def _try_load_reference(path: Path, cfg: RunConfig, m_ref: int, dim: int):
    if not path.is_file():
        return None
    try:
        with np.load(path, allow_pickle=False) as data:
            sig = str(data["signature"])
            states = np.asarray(data["states"], dtype=float)
            digest = str(data["digest"])
    except Exception:
        return None  # unreadable or truncated file: recompute
    if sig != reference_signature(cfg, m_ref):
        return None
    if states.shape != (m_ref + 1, dim):
        return None
    if hashlib.sha256(states.tobytes()).hexdigest() != digest:
        return None  # content corrupted on disk
    return Trajectory(TimeMesh(cfg.t_end, m_ref), states)


def reference_trajectory(cfg: RunConfig, m_ref: int) -> tuple[Trajectory, bool]:
    """Fourth-order reference on ``m_ref`` steps; returns the trajectory and
    whether it came from the cache.  A reference that fails to integrate is
    a hard error."""
    sys_ = build_system(cfg)
    path = _cache_path(cfg, m_ref)
    if path is not None:
        cached = _try_load_reference(path, cfg, m_ref, sys_.dim)
        if cached is not None:
            return cached, True
    traj, report = integrate(sys_, SchemeSpec("rk", 4), m_ref)
    if not report.stable:
        raise RuntimeError(
            f"reference run diverged at node {report.failure_index} "
            f"(m_ref = {m_ref}); refine the reference mesh"
        )
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(
            path,
            states=traj.states,
            signature=reference_signature(cfg, m_ref),
            digest=hashlib.sha256(traj.states.tobytes()).hexdigest(),
        )
    return traj, False


# ---------------------------------------------------------------------------
# Study rows.

@dataclass(frozen=True)
class RunRow:
    """One (scheme, step size) measurement."""

    scheme: str  # family, e.g. "eab"
    order: int
    h: float
    e_inf: Optional[float]
    e_ta: Optional[float]
    e_tr: Optional[float]
    e_apd: Optional[float]
    cpu_s: float
    stable: bool
    newton_iters: int
    m: Optional[int] = None  # not serialized; kept for in-process consumers

    @property
    def key(self) -> str:
        return f"{self.scheme}_{self.order}"


def steps_to_mesh_sizes(t_end: float, steps: Sequence[float]) -> list[int]:
    """Convert step sizes to step counts, validating that each divides the
    duration and is a multiple of three (required by the interpolant)."""
    ms = []
    for h in steps:
        if not (h > 0.0):
            raise ConfigError(f"step size must be positive, got {h}")
        m = round(t_end / h)
        if m < 3 or abs(m * h - t_end) > 1e-8 * t_end:
            raise ConfigError(f"step {h} does not divide the duration {t_end}")
        if m % 3 != 0:
            raise ConfigError(
                f"step {h} gives {m} steps; step counts must be multiples of 3"
            )
        ms.append(m)
    if len(set(ms)) != len(ms):
        raise ConfigError("duplicate step sizes")
    return ms


def _is_pow2(q: int) -> bool:
    return q >= 1 and (q & (q - 1)) == 0


def study_reference_size(t_end: float, steps: Sequence[float], refine: int) -> int:
    """Reference step count shared by a study: ``2^refine`` times the
    coarsest mesh.  Every study mesh must divide it by a power of two so
    its nodes are a subset of the reference nodes."""
    ms = steps_to_mesh_sizes(t_end, steps)
    m_ref = max(min(ms), 1) << refine
    for h, m in zip(steps, ms):
        q, rem = divmod(m_ref, m)
        if rem != 0 or not _is_pow2(q):
            raise ConfigError(
                f"step {h} is not a power-of-two refinement of the coarsest step"
            )
    return m_ref


def timed_integrate(sys_: SplitSystem, spec: SchemeSpec, m: int, repeats: int):
    """Integrate ``repeats`` times (identical deterministic runs) and report
    the median integrator wall time.  Unstable runs are not repeated."""
    traj, report = integrate(sys_, spec, m)
    times = [report.wall_time_s]
    if report.stable:
        for _ in range(repeats - 1):
            traj, report = integrate(sys_, spec, m)
            times.append(report.wall_time_s)
    return traj, report, statistics.median(times)


def measure_case(
    cfg: RunConfig,
    sys_: SplitSystem,
    spec: SchemeSpec,
    m: int,
    ref: Trajectory,
    ref_bm,
    repeats: Optional[int] = None,
) -> RunRow:
    """Run one scheme at one step size and assemble its report row."""
    traj, report, cpu = timed_integrate(sys_, spec, m, repeats or cfg.repeats)
    h = sys_.t_end / m
    e_inf = e_ta = e_tr = e_apd = None
    if report.stable:
        e_inf = linf_relative_error(traj, ref)
        if ref_bm is not None:
            try:
                errs = biomarker_errors(extract_biomarkers(traj), ref_bm)
                e_ta, e_tr, e_apd = errs["e_ta"], errs["e_tr"], errs["e_apd"]
            except BiomarkerUndefined:
                pass
    return RunRow(
        scheme=spec.family,
        order=spec.order,
        h=h,
        e_inf=e_inf,
        e_ta=e_ta,
        e_tr=e_tr,
        e_apd=e_apd,
        cpu_s=cpu,
        stable=report.stable,
        newton_iters=report.newton_iterations,
        m=m,
    )


@dataclass(frozen=True)
class StudyResult:
    rows: tuple[RunRow, ...]
    slopes: dict  # scheme key -> fitted order or None
    m_ref: int
    reference_cached: bool


def _reference_biomarkers(ref: Trajectory):
    try:
        return extract_biomarkers(ref)
    except BiomarkerUndefined:
        return None


def fit_slope(rows: Sequence[RunRow]) -> Optional[float]:
    """Least-squares slope of log error against log step size over the
    stable rows; undefined with fewer than two usable points."""
    hs, es = [], []
    for row in rows:
        if row.stable and row.e_inf is not None and math.isfinite(row.e_inf) and row.e_inf > 0:
            hs.append(math.log(row.h))
            es.append(math.log(row.e_inf))
    if len(hs) < 2:
        return None
    return float(np.polyfit(hs, es, 1)[0])


def convergence_study(
    cfg: RunConfig,
    schemes: Sequence[str] = ALL_SCHEME_KEYS,
    steps: Sequence[float] = DEFAULT_STEPS,
    repeats: Optional[int] = None,
    extra_steps: Optional[dict] = None,
) -> StudyResult:
    """Error-versus-step-size study over a scheme set.

    ``extra_steps`` may add finer steps for individual schemes (keyed by
    scheme identifier), used when a scheme is unstable on most of the
    common ladder and needs more points for a slope fit.
    """
    steps = sorted(set(steps), reverse=True)
    specs = [SchemeSpec.parse(s) for s in schemes]
    per_scheme_steps = {}
    all_steps = list(steps)
    for spec in specs:
        mine = list(steps)
        if extra_steps and spec.key in extra_steps:
            mine += [h for h in extra_steps[spec.key] if h not in mine]
            all_steps += [h for h in extra_steps[spec.key] if h not in all_steps]
        per_scheme_steps[spec.key] = sorted(set(mine), reverse=True)

    m_ref = study_reference_size(cfg.t_end, all_steps, cfg.refine)
    ref, cached = reference_trajectory(cfg, m_ref)
    ref_bm = _reference_biomarkers(ref)
    sys_ = build_system(cfg)

    rows = []
    for spec in specs:
        for h in per_scheme_steps[spec.key]:
            m = round(cfg.t_end / h)
            rows.append(measure_case(cfg, sys_, spec, m, ref, ref_bm, repeats))

    slopes = {
        spec.key: fit_slope([r for r in rows if r.key == spec.key]) for spec in specs
    }
    return StudyResult(tuple(rows), slopes, m_ref, cached)


def stability_study(
    cfg: RunConfig,
    schemes: Sequence[str] = ALL_SCHEME_KEYS,
    steps: Sequence[float] = DEFAULT_STEPS,
) -> list[RunRow]:
    """Stability-only sweep: no reference, no error columns, single run per
    cell."""
    steps = sorted(set(steps), reverse=True)
    steps_to_mesh_sizes(cfg.t_end, steps)
    sys_ = build_system(cfg)
    rows = []
    for key in schemes:
        spec = SchemeSpec.parse(key)
        for h in steps:
            m = round(cfg.t_end / h)
            traj, report = integrate(sys_, spec, m)
            rows.append(
                RunRow(
                    scheme=spec.family,
                    order=spec.order,
                    h=sys_.t_end / m,
                    e_inf=None,
                    e_ta=None,
                    e_tr=None,
                    e_apd=None,
                    cpu_s=report.wall_time_s,
                    stable=report.stable,
                    newton_iters=report.newton_iterations,
                    m=m,
                )
            )
    return rows


def monotone_tail(rows: Sequence[RunRow]) -> list[RunRow]:
    """Rows of one scheme restricted to the asymptotic tail: starting from
    the finest stable step, extend to coarser steps while the error keeps
    increasing.  Pre-asymptotic plateaus and error spikes are dropped."""
    usable = [r for r in rows if r.stable and r.e_inf is not None and r.e_inf > 0]
    usable.sort(key=lambda r: r.h)  # finest first
    tail: list[RunRow] = []
    for row in usable:
        if tail and row.e_inf <= tail[-1].e_inf:
            break
        tail.append(row)
    return tail


@dataclass(frozen=True)
class CostRow:
    scheme: str
    order: int
    h: float
    e_inf: float
    cpu_s: float
    newton_iters: int

    @property
    def key(self) -> str:
        return f"{self.scheme}_{self.order}"


def cost_study(rows: Sequence[RunRow], target: float = 1e-3) -> list[CostRow]:
    """For each scheme present in ``rows``, pick the measurement whose error
    is closest to ``target`` on a log scale (within the monotone tail) and
    report its cost.  Schemes with no usable rows are omitted."""
    if not (target > 0.0):
        raise ConfigError("cost target must be positive")
    by_key: dict[str, list[RunRow]] = {}
    for row in rows:
        by_key.setdefault(row.key, []).append(row)
    out = []
    for key in sorted(by_key):
        tail = monotone_tail(by_key[key])
        if not tail:
            continue
        best = min(tail, key=lambda r: abs(math.log(r.e_inf / target)))
        out.append(
            CostRow(
                scheme=best.scheme,
                order=best.order,
                h=best.h,
                e_inf=best.e_inf,
                cpu_s=best.cpu_s,
                newton_iters=best.newton_iters,
            )
        )
    return out


# ---------------------------------------------------------------------------
# CSV serialization.

def _fmt_opt(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def write_report_csv(path, rows: Sequence[RunRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_FIELDS)
        for r in rows:
            writer.writerow(
                [
                    r.scheme,
                    r.order,
                    repr(float(r.h)),
                    _fmt_opt(r.e_inf),
                    _fmt_opt(r.e_ta),
                    _fmt_opt(r.e_tr),
                    _fmt_opt(r.e_apd),
                    repr(float(r.cpu_s)),
                    "true" if r.stable else "false",
                    r.newton_iters,
                ]
            )


def read_report_csv(path) -> list[RunRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(REPORT_FIELDS):
            raise ConfigError(f"unexpected report header in {path}")
        for rec in reader:
            opt = lambda s: None if s == "" else float(s)
            rows.append(
                RunRow(
                    scheme=rec["scheme"],
                    order=int(rec["order"]),
                    h=float(rec["h"]),
                    e_inf=opt(rec["e_inf"]),
                    e_ta=opt(rec["e_ta"]),
                    e_tr=opt(rec["e_tr"]),
                    e_apd=opt(rec["e_apd"]),
                    cpu_s=float(rec["cpu_s"]),
                    stable=rec["stable"] == "true",
                    newton_iters=int(rec["newton_iters"]),
                )
            )
    return rows


def trajectory_header(dim: int) -> list[str]:
    if dim == 8:
        return ["t", "W1", "W2", "W3", "W4", "W5", "W6", "Ca", "V"]
    return ["t"] + [f"y{i + 1}" for i in range(dim)]


def write_trajectory_csv(path, traj: Trajectory) -> None:
    dim = traj.states.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trajectory_header(dim))
        for t, row in zip(traj.mesh.nodes, traj.states):
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


# ---------------------------------------------------------------------------
# Published-table comparison.

def load_expectations(path: Optional[str] = None) -> dict:
    """Load the packaged benchmark expectations (or a user-provided JSON
    file with the same structure): the step ladder, per-scheme error cells
    (null marks a run expected to diverge), and cells excluded from the
    value comparison."""
    if path is None:
        text = resources.files("ionstep").joinpath("data/expectations.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad expectations file: {exc}") from exc
    for field in ("steps", "table"):
        if field not in data:
            raise ConfigError(f"expectations file lacks {field!r}")
    data.setdefault("non_binding", [])
    return data


@dataclass(frozen=True)
class ExpectationCheck:
    scheme_key: str
    h: float
    expected: Optional[float]  # None: expected to diverge
    measured: Optional[float]
    stable: bool
    binding: bool
    stability_ok: bool
    value_ok: Optional[bool]  # None when no value comparison applies


def check_expectations(rows: Sequence[RunRow], expectations: dict, ratio: float = 10.0):
    """Compare study rows against the expectation table.

    Stability must match the table exactly (a null cell means diverge).
    Where both sides have values, the measurement must fall within
    ``ratio`` of the published value; cells listed as non-binding are
    reported but never fail the value check.
    """
    steps = expectations["steps"]
    non_binding = {(k, float(h)) for k, h in expectations["non_binding"]}
    by_cell = {}
    for row in rows:
        by_cell[(row.key, round(row.h, 12))] = row
    checks = []
    for key, cells in expectations["table"].items():
        if len(cells) != len(steps):
            raise ConfigError(f"expectations row {key!r} has {len(cells)} cells")
        for h, expected in zip(steps, cells):
            row = by_cell.get((key, round(float(h), 12)))
            if row is None:
                continue  # scheme or step not part of this study
            stability_ok = (expected is not None) == row.stable
            binding = (key, float(h)) not in non_binding
            value_ok = None
            if expected is not None:
                if not row.stable or row.e_inf is None:
                    value_ok = False
                else:
                    value_ok = expected / ratio <= row.e_inf <= expected * ratio
            checks.append(
                ExpectationCheck(
                    scheme_key=key,
                    h=float(h),
                    expected=expected,
                    measured=row.e_inf if row.stable else None,
                    stable=row.stable,
                    binding=binding,
                    stability_ok=stability_ok,
                    value_ok=value_ok,
                )
            )
    return checks


def expectation_verdicts(checks: Sequence[ExpectationCheck]) -> tuple[bool, bool]:
    """(stability pattern matches, binding values within tolerance)."""
    stability = all(c.stability_ok for c in checks)
    values = all(c.value_ok for c in checks if c.binding and c.value_ok is not None)
    return stability, values
