"""Command-line front end: ingestion, configuration and the four commands.

Commands
--------
fit        optimize smoothing parameters, write model artifact + accuracy
forecast   k-ahead forecasts from a saved artifact or an inline fit
decompose  seasonal-trend decomposition, exported as plot-ready CSV panels
evaluate   rolling-origin forecast grid with per-origin / per-horizon MAPE

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 fit infeasible.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .calendars import CalendarEvent, build_dims
from .decompose import LoessConfig, mstl, stlplot_export
from .evaluate import accuracy, grid_to_csv, mforecast
from .hw import (
    FitInfeasibleError,
    ModelSpec,
    ModelState,
    SmoothingParams,
    forecast,
    project_dims,
    reduce_check,
)
from .optimize import OptimConfig, find_params
from .timeseries import DataError, DimsSpec, SeasonSpec, TimeSeries

log = logging.getLogger(__name__)

ARTIFACT_SCHEMA_VERSION = 1


class UsageError(ValueError):
    """Bad command line or configuration file."""


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _parse_timestamp(text: str, row: int) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError as exc:
        raise DataError(f"row {row}: unparseable timestamp {text!r}") from exc
    if stamp.tzinfo is not None:
        stamp = stamp.astimezone(timezone.utc).replace(tzinfo=None)
    return stamp


def ingest(path) -> TimeSeries:
    """Read a ``timestamp,value`` CSV into a gap-free series.

    Duplicate timestamps (clock-change repeats) are averaged; a single
    missing step is filled by linear interpolation; longer gaps are
    rejected. Timestamps must be ISO-8601 at a fixed nominal step.
    """
    rows: list[tuple[datetime, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:2]] != ["timestamp", "value"]:
            raise DataError(f"{path}: expected header 'timestamp,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise DataError(f"row {lineno}: expected 2 columns, got {len(row)}")
            stamp = _parse_timestamp(row[0], lineno)
            try:
                value = float(row[1])
            except ValueError as exc:
                raise DataError(f"row {lineno}: unparseable value {row[1]!r}") from exc
            rows.append((stamp, value))
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows")

    for (prev, _), (cur, _) in zip(rows, rows[1:]):
        if cur < prev:
            raise DataError(f"non-monotone timestamps: {cur.isoformat()} after {prev.isoformat()}")

    # Average duplicate timestamps (daylight-saving fall-back produces them).
    deduped: list[tuple[datetime, float]] = []
    averaged = 0
    i = 0
    while i < len(rows):
        j = i
        total = 0.0
        while j < len(rows) and rows[j][0] == rows[i][0]:
            total += rows[j][1]
            j += 1
        if j - i > 1:
            averaged += 1
        deduped.append((rows[i][0], total / (j - i)))
        i = j

    diffs = [b[0] - a[0] for a, b in zip(deduped, deduped[1:])]
    step = min(diffs)
    if step <= timedelta(0):
        raise DataError("could not infer a positive step")

    values = [deduped[0][1]]
    interpolated = 0
    for (prev_t, prev_v), (cur_t, cur_v) in zip(deduped, deduped[1:]):
        gap = cur_t - prev_t
        steps, rem = divmod(gap, step)
        if rem:
            raise DataError(
                f"timestamp {cur_t.isoformat()} is not a whole number of steps "
                f"after {prev_t.isoformat()} (step {step})"
            )
        if steps > 2:
            raise DataError(
                f"gap of {steps - 1} missing steps between {prev_t.isoformat()} "
                f"and {cur_t.isoformat()}; at most one consecutive missing step is filled"
            )
        if steps == 2:
            values.append((prev_v + cur_v) / 2.0)
            interpolated += 1
            log.warning(
                "missing step at %s interpolated as %s",
                (prev_t + step).isoformat(), (prev_v + cur_v) / 2.0,
            )
        values.append(cur_v)
    if averaged:
        log.warning("averaged %d duplicated timestamp(s)", averaged)
    if interpolated:
        log.warning("interpolated %d missing step(s)", interpolated)
    return TimeSeries(values=np.array(values), step=step, start=deduped[0][0])


def read_calendar_csv(path) -> list[CalendarEvent]:
    """Read events from ``event_id,group,date_start,span_days`` CSV."""
    events = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["event_id", "group", "date_start", "span_days"]
        if header is None or [c.strip().lower() for c in header[:4]] != expected:
            raise DataError(f"{path}: expected header 'event_id,group,date_start,span_days'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 4:
                raise DataError(f"row {lineno}: expected 4 columns, got {len(row)}")
            try:
                start = date.fromisoformat(row[2].strip())
                span = int(row[3])
            except ValueError as exc:
                raise DataError(f"row {lineno}: {exc}") from exc
            events.append(CalendarEvent(
                event_id=row[0].strip(), recurrence_group=row[1].strip(),
                date_start=start, span_days=span,
            ))
    return events


# ---------------------------------------------------------------------------
# Configuration file
# ---------------------------------------------------------------------------

@dataclass
class SeasonDecl:
    cycle_length: int
    mode: str
    init_method: str
    id: str


@dataclass
class DimsDecl:
    group: str
    mode: str
    init_method: str


@dataclass
class RunConfig:
    data: Path
    calendar: Path | None = None
    seasons: list[SeasonDecl] = field(default_factory=list)
    dims: list[DimsDecl] = field(default_factory=list)
    trend: str = "additive"
    damping: bool = False
    ar: bool = False
    algorithm: str = "nelder_mead"
    objective: str = "rmse"
    max_evals: int = 2000
    tolerance: float = 1e-8
    restarts: int = 3
    rng_seed: int = 0
    horizon: int = 24
    first_origin: int | None = None
    origin_step: int | None = None
    policy: str = "fixed"

    def model_spec(self, ts: TimeSeries) -> ModelSpec:
        return ModelSpec.for_series(
            ts, trend=self.trend, damping_enabled=self.damping,
            ar_adjustment_enabled=self.ar,
        )

    def optim_config(self) -> OptimConfig:
        return OptimConfig(
            algorithm=self.algorithm, objective=self.objective,
            max_evals=self.max_evals, tolerance=self.tolerance,
            restarts=self.restarts, rng_seed=self.rng_seed,
        )


_FLAGS = {"on": True, "off": False, "true": True, "false": False}


def parse_config(path) -> RunConfig:
    """Parse the flat ``key = value`` run configuration.

    ``season`` and ``dims`` keys may repeat:
        season = 24 multiplicative ratio_to_ma [id]
        dims   = Holidays multiplicative neutral
    Relative paths resolve against the config file's directory.
    """
    path = Path(path)
    base = path.parent
    values: dict[str, str] = {}
    seasons: list[SeasonDecl] = []
    dims: list[DimsDecl] = []
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key == "season":
            parts = value.split()
            if len(parts) not in (3, 4):
                raise UsageError(
                    f"{path}:{lineno}: season needs 'cycle mode init_method [id]'"
                )
            try:
                cycle = int(parts[0])
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad cycle length {parts[0]!r}") from None
            sid = parts[3] if len(parts) == 4 else f"s{cycle}"
            seasons.append(SeasonDecl(cycle, parts[1], parts[2], sid))
        elif key == "dims":
            parts = value.split()
            if len(parts) != 3:
                raise UsageError(f"{path}:{lineno}: dims needs 'group mode init_method'")
            dims.append(DimsDecl(*parts))
        elif key in values:
            raise UsageError(f"{path}:{lineno}: duplicate key {key!r}")
        else:
            values[key] = value

    if "data" not in values:
        raise UsageError(f"{path}: missing required key 'data'")

    cfg = RunConfig(data=(base / values.pop("data")).resolve(), seasons=seasons, dims=dims)
    if "calendar" in values:
        cfg.calendar = (base / values.pop("calendar")).resolve()

    def take(key, conv, attr=None):
        if key in values:
            raw = values.pop(key)
            try:
                setattr(cfg, attr or key, conv(raw))
            except (ValueError, KeyError):
                raise UsageError(f"{path}: bad value {raw!r} for {key!r}") from None

    take("trend", str)
    take("damping", lambda v: _FLAGS[v.lower()])
    take("ar", lambda v: _FLAGS[v.lower()])
    take("algorithm", str)
    take("objective", str)
    take("max_evals", int)
    take("tolerance", float)
    take("restarts", int)
    take("rng_seed", int)
    take("horizon", int)
    take("first_origin", int)
    take("origin_step", int)
    take("policy", str)
    if values:
        raise UsageError(f"{path}: unknown key(s): {', '.join(sorted(values))}")
    return cfg


def load_series(cfg: RunConfig) -> TimeSeries:
    """Ingest the data file and attach the declared seasonal structure."""
    ts = ingest(cfg.data)
    for decl in cfg.seasons:
        ts = ts.add_season(SeasonSpec(
            id=decl.id, cycle_length=decl.cycle_length,
            mode=decl.mode, init_method=decl.init_method,
        ))
    if cfg.dims:
        if cfg.calendar is None:
            raise UsageError("dims declared but no calendar file configured")
        events = read_calendar_csv(cfg.calendar)
        steps_per_day = int(timedelta(days=1) / ts.step)
        wanted = {d.group: d for d in cfg.dims}
        events = [ev for ev in events if ev.recurrence_group in wanted]
        specs = build_dims(
            ts, events, steps_per_day,
            mode={g: d.mode for g, d in wanted.items()},
            init_method={g: d.init_method for g, d in wanted.items()},
        )
        built = {s.id for s in specs}
        missing = set(wanted) - built
        if missing:
            raise DataError(f"calendar has no usable events for group(s): {sorted(missing)}")
        for spec in specs:
            ts = ts.add_dims(spec)
    return ts


# ---------------------------------------------------------------------------
# Model artifact
# ---------------------------------------------------------------------------

def _spec_to_json(spec: ModelSpec) -> dict:
    return {
        "trend": spec.trend,
        "damping_enabled": spec.damping_enabled,
        "ar_adjustment_enabled": spec.ar_adjustment_enabled,
        "season_modes": list(spec.season_modes),
        "dims_modes": list(spec.dims_modes),
    }


def _params_to_json(params: SmoothingParams) -> dict:
    return {
        "alpha": params.alpha,
        "gamma": params.gamma,
        "deltas": list(params.deltas),
        "deltas_dims": list(params.deltas_dims),
        "phi": params.phi,
        "ar1": params.ar1,
    }


def save_artifact(path, ts: TimeSeries, spec: ModelSpec, params: SmoothingParams,
                  state: ModelState, objective: float) -> None:
    doc = {
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "spec": _spec_to_json(spec),
        "seasons": [
            {"id": s.id, "cycle_length": s.cycle_length, "mode": s.mode,
             "init_method": s.init_method}
            for s in ts.seasons
        ],
        "dims": [
            {"id": d.id, "mode": d.mode, "length": d.length,
             "occurrences": list(d.occurrences), "init_method": d.init_method}
            for d in ts.dims
        ],
        "params": _params_to_json(params),
        "state": {
            "level": state.level,
            "trend": state.trend,
            "seasonal": {k: list(map(float, v)) for k, v in state.seasonal.items()},
            "dims": {k: list(map(float, v)) for k, v in state.dims.items()},
            "last_residual": state.last_residual,
            "position": state.position,
        },
        "objective": objective,
        "series": {
            "start": ts.start.isoformat(),
            "step_seconds": ts.step.total_seconds(),
            "length": len(ts),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_artifact(path) -> tuple[ModelSpec, SmoothingParams, ModelState, list[DimsSpec], dict]:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != ARTIFACT_SCHEMA_VERSION:
        raise DataError(f"unsupported artifact schema version {version!r}")
    spec = ModelSpec(
        trend=doc["spec"]["trend"],
        damping_enabled=doc["spec"]["damping_enabled"],
        ar_adjustment_enabled=doc["spec"]["ar_adjustment_enabled"],
        season_modes=tuple(doc["spec"]["season_modes"]),
        dims_modes=tuple(doc["spec"]["dims_modes"]),
    )
    params = SmoothingParams(
        alpha=doc["params"]["alpha"],
        gamma=doc["params"]["gamma"],
        deltas=tuple(doc["params"]["deltas"]),
        deltas_dims=tuple(doc["params"]["deltas_dims"]),
        phi=doc["params"]["phi"],
        ar1=doc["params"]["ar1"],
    )
    # Rebuild the index maps in declaration order: the engine pairs rings
    # with spec modes positionally, and the JSON was dumped with sorted keys.
    season_ids = [s["id"] for s in doc["seasons"]]
    dims_ids = [d["id"] for d in doc["dims"]]
    state = ModelState(
        level=doc["state"]["level"],
        trend=doc["state"]["trend"],
        seasonal={sid: np.array(doc["state"]["seasonal"][sid]) for sid in season_ids},
        dims={did: np.array(doc["state"]["dims"][did]) for did in dims_ids},
        last_residual=doc["state"]["last_residual"],
        position=doc["state"]["position"],
    )
    dims = [
        DimsSpec(id=d["id"], mode=d["mode"], length=d["length"],
                 occurrences=tuple(d["occurrences"]), init_method=d["init_method"])
        for d in doc["dims"]
    ]
    return spec, params, state, dims, doc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fit(ts: TimeSeries, cfg: RunConfig):
    spec = cfg.model_spec(ts)
    params, fit = find_params(ts, spec, cfg.optim_config())
    return spec, params, fit


def cmd_fit(cfg: RunConfig, out: Path) -> int:
    ts = load_series(cfg)
    spec, params, fit = _fit(ts, cfg)
    save_artifact(out / "model.json", ts, spec, params, fit.final_state, fit.objective)
    report = accuracy(fit)
    _write_json(out / "accuracy.json", {
        "rmse": report.rmse,
        "mape": report.mape,
        "aic": report.aic if report.aic != float("-inf") else None,
        "n_obs": report.n_obs,
        "k_params": report.k_params,
        "warmup": report.warmup,
        "params": _params_to_json(params),
        "model": reduce_check(spec),
    })
    log.info("fit: objective %.6g, %s", fit.objective, reduce_check(spec))
    return 0


def cmd_forecast(cfg: RunConfig, out: Path, model_path: Path | None) -> int:
    ts = load_series(cfg)
    if model_path is not None:
        spec, params, state, dims_specs, _doc = load_artifact(model_path)
        projection_source = tuple(dims_specs)
        origin = state.position
        start = datetime.fromisoformat(_doc["series"]["start"])
        step = timedelta(seconds=_doc["series"]["step_seconds"])
    else:
        spec, params, fit = _fit(ts, cfg)
        state = fit.final_state
        projection_source = ts.dims
        origin = state.position
        start, step = ts.start, ts.step
    projection = project_dims(projection_source, origin, cfg.horizon)
    values = forecast(state, spec, params, cfg.horizon, projection)
    with open(out / "forecast.csv", "w", newline="") as fh:
        fh.write("timestamp,forecast\n")
        for k, v in enumerate(values, start=1):
            stamp = start + (origin + k - 1) * step
            fh.write(f"{stamp.isoformat()},{float(v)!r}\n")
    return 0


def cmd_decompose(cfg: RunConfig, out: Path) -> int:
    ts = load_series(cfg)
    result = mstl(ts, LoessConfig())
    if not result.converged:
        log.warning("decomposition hit the iteration cap before converging")
    written = stlplot_export(result, out)
    log.info("decompose: wrote %d files to %s", len(written), out)
    return 0


def cmd_evaluate(cfg: RunConfig, out: Path) -> int:
    ts = load_series(cfg)
    if cfg.first_origin is None:
        raise UsageError("evaluate requires first_origin in the config")
    step = cfg.origin_step if cfg.origin_step is not None else cfg.horizon
    spec = cfg.model_spec(ts)
    if cfg.policy == "fixed":
        params, _fit_res = find_params(ts.prefix(cfg.first_origin), spec, cfg.optim_config())
        grid = mforecast(
            ts, spec, first_origin=cfg.first_origin, step=step,
            horizon=cfg.horizon, policy="fixed", params=params,
        )
    else:
        grid = mforecast(
            ts, spec, first_origin=cfg.first_origin, step=step,
            horizon=cfg.horizon, policy="refit_per_origin",
            optim_config=cfg.optim_config(),
        )
    grid_to_csv(grid, ts, out / "grid.csv")
    _write_json(out / "summary.json", {
        "grand_mape": grid.grand_mape,
        "per_origin": [
            {"origin_timestamp": ts.timestamp_at(o - 1).isoformat(), "mape": m}
            for o, m in zip(grid.origins, grid.per_origin_mape.tolist())
        ],
        "per_horizon": [
            {"horizon_step": k + 1, "mape": m}
            for k, m in enumerate(grid.per_horizon_mape.tolist())
        ],
    })
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hwdims", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("fit", "forecast", "decompose", "evaluate"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="run configuration file")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override rng seed")
        cmd.add_argument("--verbose", action="store_true")
        if name == "forecast":
            cmd.add_argument("--model", default=None,
                             help="model artifact from a previous fit (else fits inline)")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.rng_seed = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "fit":
            return cmd_fit(cfg, out)
        if args.command == "forecast":
            model = Path(args.model) if getattr(args, "model", None) else None
            return cmd_forecast(cfg, out, model)
        if args.command == "decompose":
            return cmd_decompose(cfg, out)
        return cmd_evaluate(cfg, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FitInfeasibleError as exc:
        print(f"fit infeasible: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
