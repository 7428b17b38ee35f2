"""Parameter sweeps, figure presets and CSV/JSON artifacts.

A sweep is the Cartesian product of its axes, taken in the order the axes are
listed (last axis varying fastest). An axis may bind several parameters at
once, e.g. ``("N", "M")`` with values ``[(4, 2), (6, 3)]``.

Output layout under the sweep directory::

    manifest.json
    summary.csv
    stationary/<point>.csv
    gradient/<point>.csv
    abm/<point>_series.csv, abm/<point>_hist.csv

``<point>`` is the canonical encoding from :func:`point_name`. Every file is a
pure function of the spec, so rerunning a sweep rewrites identical bytes.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import __version__
from .abm import SimConfig, abm_run
from .game import GameParams
from .markov import build_chain, gradient_field, stationary

log = logging.getLogger(__name__)

SUMMARY_SCHEMA = 1
PARAM_FIELDS = tuple(f.name for f in fields(GameParams))
SUMMARY_HEADER = PARAM_FIELDS + (
    "rho_CI", "rho_T", "rho_U", "f_CI", "f_T", "f_U", "residual", "iterations",
)
STATIONARY_HEADER = ("i_CI", "i_T", "i_U", "probability")
GRADIENT_HEADER = ("i_CI", "i_T", "drift_CI", "drift_T")
SERIES_HEADER = ("event", "i_CI", "i_T", "i_U")
HIST_HEADER = ("i_CI", "i_T", "i_U", "visits")
OUTPUT_KINDS = ("stationary", "gradient", "summary", "abm")

# Short names used on the command line and in file names.
ALIASES = {"RT": "R_T", "RU": "R_U", "rounds": "rounds_override", "rounds-override": "rounds_override"}
SHORT = {"R_T": "RT", "R_U": "RU", "rounds_override": "rounds"}
INT_FIELDS = {"Z", "N", "M"}


class SweepError(RuntimeError):
    """One or more sweep points failed; ``failures`` maps point name to message."""

    def __init__(self, failures: dict[str, str]):
        self.failures = failures
        lines = "\n".join(f"  {name}: {msg}" for name, msg in failures.items())
        super().__init__(f"{len(failures)} sweep point(s) failed:\n{lines}")


class PointError(RuntimeError):
    def __init__(self, params: GameParams, cause: Exception):
        self.params = params
        self.cause = cause
        super().__init__(f"{point_name(params)}: {type(cause).__name__}: {cause}")


def param_name(key: str) -> str:
    name = ALIASES.get(key, key)
    if name not in PARAM_FIELDS:
        raise ValueError(f"unknown parameter {key!r}; expected one of {', '.join(PARAM_FIELDS)}")
    return name


def _coerce(name: str, value):
    if value is None:
        return None
    if name in INT_FIELDS:
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"parameter {name} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def fmt(value) -> str:
    """Shortest round-trip text for a CSV cell or file name."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def point_name(params: GameParams) -> str:
    """Sorted ``key=value`` segments joined by underscores."""
    items = []
    for name, value in params.as_dict().items():
        if value is None:
            continue
        items.append((SHORT.get(name, name), fmt(value)))
    return "_".join(f"{k}={v}" for k, v in sorted(items))


@dataclass(frozen=True)
class AbmSettings:
    steps: int = 1_000_000
    burn_in: int = 100_000
    seed: int = 0
    payoff_mode: str = "expected"
    groups_per_evaluation: int = 1
    record_every: int = 1000


@dataclass(frozen=True)
class SweepSpec:
    """Base parameters, sweep axes and what to write where.

    ``base`` holds raw parameter overrides; points are resolved against the
    :class:`GameParams` defaults so that an unset ``mu`` becomes ``1 / Z`` at
    every point.
    """

    base: dict = field(default_factory=dict)
    axes: tuple[tuple[tuple[str, ...], tuple[tuple, ...]], ...] = ()
    outputs: tuple[str, ...] = ("summary",)
    out_dir: Path | None = None
    jobs: int = 1
    tol: float = 1e-12
    max_iters: int = 10_000_000
    method: str = "direct"
    abm: AbmSettings = AbmSettings()
    name: str = ""

    def __post_init__(self):
        base = {param_name(k): _coerce(param_name(k), v) for k, v in self.base.items()}
        object.__setattr__(self, "base", base)
        axes = []
        for names, values in self.axes:
            names = tuple(param_name(n) for n in ((names,) if isinstance(names, str) else names))
            rows = []
            for v in values:
                v = tuple(v) if isinstance(v, (list, tuple)) else (v,)
                if len(v) != len(names):
                    raise ValueError(f"axis {','.join(names)} value {v!r} has wrong arity")
                rows.append(tuple(_coerce(n, x) for n, x in zip(names, v)))
            if not rows:
                raise ValueError(f"axis {','.join(names)} has no values")
            axes.append((names, tuple(rows)))
        object.__setattr__(self, "axes", tuple(axes))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        for kind in self.outputs:
            if kind not in OUTPUT_KINDS:
                raise ValueError(f"unknown output kind {kind!r}; expected one of {OUTPUT_KINDS}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.method not in ("direct", "power"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.out_dir is not None:
            object.__setattr__(self, "out_dir", Path(self.out_dir))
        # resolving every point surfaces bad values before any work starts
        points = self.points()
        if {"stationary", "summary"} & set(self.outputs):
            for p in points:
                if p.mu == 0:
                    raise ValueError("invalid mu=0.0: stationary outputs require mu > 0")

    @property
    def size(self) -> int:
        n = 1
        for _, values in self.axes:
            n *= len(values)
        return n

    def points(self) -> list[GameParams]:
        out = []
        for combo in itertools.product(*(values for _, values in self.axes)):
            kw = dict(self.base)
            for (names, _), row in zip(self.axes, combo):
                kw.update(zip(names, row))
            out.append(GameParams(**kw))
        return out

    def with_overrides(self, **changes) -> "SweepSpec":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return SweepSpec(**kw)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "base": dict(sorted(self.base.items())),
            "axes": [{"name": list(n), "values": [list(v) for v in vals]} for n, vals in self.axes],
            "outputs": list(self.outputs),
            "tol": self.tol,
            "max_iters": self.max_iters,
            "method": self.method,
            "abm": {f.name: getattr(self.abm, f.name) for f in fields(AbmSettings)},
        }


# --- config parsing -----------------------------------------------------------

CONFIG_KEYS = {"name", "base", "axes", "outputs", "out", "jobs", "tol", "max_iters", "method", "abm"}


def _axes_from_json(raw) -> list:
    # {"M": [0, 1]} or {"N,M": [[4, 2], ...]} or [{"name": ..., "values": ...}]
    if isinstance(raw, dict):
        items = [(k.split(","), v) for k, v in raw.items()]
    elif isinstance(raw, list):
        items = []
        for entry in raw:
            unknown = set(entry) - {"name", "values"}
            if unknown:
                raise ValueError(f"unknown axis key {sorted(unknown)[0]!r}")
            name = entry["name"]
            items.append((name.split(",") if isinstance(name, str) else name, entry["values"]))
    else:
        raise ValueError("axes must be an object or a list")
    return [(tuple(n.strip() for n in names), values) for names, values in items]


def parse_config(path: str | os.PathLike | None = None, overrides: dict | None = None,
                 axes: list | None = None, **settings) -> SweepSpec:
    """Build a :class:`SweepSpec` from a JSON file plus overrides.

    ``overrides`` maps parameter names (``RT``/``RU`` aliases allowed) to
    values and wins over the file's ``base``; ``axes`` replaces the file's
    axes when given; remaining keyword arguments (``out``, ``jobs``, ``tol``,
    ``max_iters``, ``method``, ``outputs``, ``abm``) override top-level keys.
    Unknown keys raise :class:`ValueError` naming the key.
    """
    doc: dict = {}
    if path is not None:
        with open(path) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError(f"{path}: config must be a JSON object")
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config key {sorted(unknown)[0]!r}")
    for k, v in settings.items():
        if k not in CONFIG_KEYS:
            raise ValueError(f"unknown setting {k!r}")
        if v is not None:
            doc[k] = v
    base = {param_name(k): v for k, v in doc.get("base", {}).items()}
    for k, v in (overrides or {}).items():
        if v is not None:
            base[param_name(k)] = v
    axis_list = _axes_from_json(doc.get("axes", {})) if axes is None else axes
    abm_raw = dict(doc.get("abm", {}))
    abm_fields = {f.name for f in fields(AbmSettings)}
    bad = set(abm_raw) - abm_fields
    if bad:
        raise ValueError(f"unknown abm key {sorted(bad)[0]!r}")
    kw = {
        "name": doc.get("name", ""),
        "base": base,
        "axes": tuple(axis_list),
        "outputs": tuple(doc.get("outputs", ("summary",))),
        "out_dir": doc.get("out"),
        "abm": AbmSettings(**abm_raw),
    }
    for key in ("jobs", "tol", "max_iters", "method"):
        if key in doc:
            kw[key] = doc[key]
    return SweepSpec(**kw)


def parse_axis(text: str) -> tuple[tuple[str, ...], list]:
    """``"M=0,1,2"`` or ``"N:M=4:2,6:3"`` into an axis entry."""
    if "=" not in text:
        raise ValueError(f"axis {text!r} must look like name=v1,v2,...")
    names, values = text.split("=", 1)
    names = tuple(param_name(n.strip()) for n in names.split(":"))
    rows = []
    for item in values.split(","):
        parts = item.split(":")
        if len(parts) != len(names):
            raise ValueError(f"axis {text!r}: value {item!r} needs {len(names)} part(s)")
        rows.append(tuple(float(x) for x in parts))
    return names, rows


# --- presets -----------------------------------------------------------------

BASELINE = {"Z": 100, "N": 4, "M": 2, "tv": 1.0, "R_T": 6.0, "R_U": 8.0,
            "sigma": 0.1, "w": 0.8, "beta": 5.0}


def _log_grid(lo: int, hi: int, per_decade: int = 4) -> list[float]:
    return [float(f"{10 ** (k / per_decade):.6g}") for k in range(lo * per_decade, hi * per_decade + 1)]


BETA_CURVE = sorted(set(_log_grid(-4, 1)) | {2.0, 6.0, 10.0})
MU_CURVE = sorted(set(_log_grid(-5, 0)) | {1e-5, 1e-4, 1e-3})

_PRESET_AXES = {
    "fig2": [(("M",), [0, 2, 4])],
    "fig3": [(("M",), [0, 1, 2, 3, 4])],
    "fig4": [(("M",), [0, 1, 2, 3, 4])],
    "fig5": [(("R_U",), [6.66, 7.98, 9.96])],
    "fig6": [(("tv",), [3.0, 7.0, 11.0])],
    "fig7": [(("sigma",), [1.0, 3.0, 5.0])],
    "fig8": [(("w",), [2 / 3, 4 / 5, 6 / 7])],
    "fig9": [(("beta",), BETA_CURVE)],
    "fig10": [(("mu",), MU_CURVE)],
    "fig11": [(("N", "M"), [(4, 2), (6, 3), (8, 4), (10, 5)])],
}
_PRESET_OUTPUTS = {
    "fig3": ("summary",),
    "fig4": ("summary",),
}
PRESETS = tuple(_PRESET_AXES)


def preset(name: str, **settings) -> SweepSpec:
    """Parameter grid behind one of the figures, at the baseline otherwise."""
    if name not in _PRESET_AXES:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    kw = {
        "name": name,
        "base": dict(BASELINE),
        "axes": tuple(_PRESET_AXES[name]),
        "outputs": _PRESET_OUTPUTS.get(name, ("summary", "stationary", "gradient")),
    }
    kw.update(settings)
    return SweepSpec(**kw)


# --- running -----------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    params: GameParams
    rho: tuple[float, float, float]
    fbar: tuple[float, float, float]
    residual: float
    iterations: int
    wall_time: float = 0.0

    def cells(self) -> list[str]:
        values = [getattr(self.params, n) for n in PARAM_FIELDS]
        values += [*self.rho, *self.fbar, self.residual, self.iterations]
        return [fmt(v) for v in values]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def stationary_csv(states, Z: int, pi) -> str:
    rows = ((int(a), int(b), int(Z - a - b), fmt(float(p))) for (a, b), p in zip(states, pi))
    return _csv_text(STATIONARY_HEADER, rows)


def gradient_csv(field_) -> str:
    rows = ((int(a), int(b), fmt(float(dc)), fmt(float(dt)))
            for (a, b), (dc, dt) in zip(field_.states, field_.drift))
    return _csv_text(GRADIENT_HEADER, rows)


def summary_csv(rows: list[SummaryRow]) -> str:
    return _csv_text(SUMMARY_HEADER, (r.cells() for r in rows))


def run_point(params: GameParams, outputs=("summary",), out_dir: str | Path | None = None,
              tol: float = 1e-12, max_iters: int = 10_000_000, method: str = "direct",
              abm: AbmSettings = AbmSettings()) -> tuple[SummaryRow | None, dict[str, str]]:
    """Compute the requested artifacts for one parameter point.

    Returns the summary row (``None`` when no stationary output was asked for)
    and a mapping from artifact kind to CSV text. With ``out_dir`` the files
    are also written there. Failures are re-raised as :class:`PointError`.
    """
    t0 = time.perf_counter()
    files: dict[str, str] = {}
    row = None
    try:
        chain = build_chain(params)
        if {"stationary", "summary"} & set(outputs):
            res = stationary(chain, tol=tol, max_iters=max_iters, method=method)
            row = SummaryRow(params, res.rho, res.fbar, res.residual, res.iterations)
            if "stationary" in outputs:
                files["stationary"] = stationary_csv(chain.states, params.Z, res.distribution)
        if "gradient" in outputs:
            files["gradient"] = gradient_csv(gradient_field(chain))
        if "abm" in outputs:
            sim = abm_run(SimConfig(params, abm.steps, abm.burn_in, abm.seed, abm.payoff_mode,
                                    abm.groups_per_evaluation, record_every=abm.record_every))
            files["abm_series"] = _csv_text(SERIES_HEADER, sim.series)
            files["abm_hist"] = _csv_text(
                HIST_HEADER,
                ((int(a), int(b), int(params.Z - a - b), int(v))
                 for (a, b), v in zip(sim.states, sim.visits)),
            )
    except Exception as exc:
        raise PointError(params, exc) from exc
    wall = time.perf_counter() - t0
    if row is not None:
        row = SummaryRow(row.params, row.rho, row.fbar, row.residual, row.iterations, wall)
    log.info("point %s done in %.2fs", point_name(params), wall)
    if out_dir is not None:
        write_point_files(Path(out_dir), params, files)
    return row, files


def artifact_path(out_dir: Path, params: GameParams, kind: str) -> Path:
    name = point_name(params)
    if kind.startswith("abm_"):
        return out_dir / "abm" / f"{name}_{kind[4:]}.csv"
    return out_dir / kind / f"{name}.csv"


def write_point_files(out_dir: Path, params: GameParams, files: dict[str, str]) -> None:
    for kind, text in files.items():
        _write(artifact_path(out_dir, params, kind), text)


def _point_task(args):
    params, spec = args
    try:
        row, files = run_point(params, spec.outputs, None, spec.tol, spec.max_iters,
                               spec.method, spec.abm)
    except PointError as exc:
        return params, None, None, str(exc.cause)
    return params, row, files, None


def run_sweep(spec: SweepSpec) -> list[SummaryRow]:
    """Evaluate every point of ``spec`` and write its artifacts.

    Points run in a process pool of ``spec.jobs`` workers; results are
    collected and written in sweep order, so the output does not depend on
    scheduling. Raises :class:`SweepError` after writing whatever succeeded
    if any point failed.
    """
    points = spec.points()
    log.info("sweep %s: %d point(s), %d job(s)", spec.name or "<unnamed>", len(points), spec.jobs)
    tasks = [(p, spec) for p in points]
    if spec.jobs == 1 or len(points) == 1:
        results = list(map(_point_task, tasks))
    else:
        with ProcessPoolExecutor(max_workers=min(spec.jobs, len(points))) as pool:
            results = list(pool.map(_point_task, tasks))

    rows, failures = [], {}
    for params, row, files, error in results:
        if error is not None:
            failures[point_name(params)] = error
            continue
        if spec.out_dir is not None:
            write_point_files(spec.out_dir, params, files)
        if row is not None:
            rows.append(row)
    if spec.out_dir is not None:
        if "summary" in spec.outputs:
            _write(spec.out_dir / "summary.csv", summary_csv(rows))
        _write(spec.out_dir / "manifest.json", manifest_json(spec, points))
    if failures:
        raise SweepError(failures)
    return rows


def manifest_json(spec: SweepSpec, points: list[GameParams]) -> str:
    doc = {
        "software": "trustdyn",
        "version": __version__,
        "summary_schema": SUMMARY_SCHEMA,
        "spec": spec.to_json(),
        "points": [
            {"name": point_name(p), "params": p.as_dict()} for p in points
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
