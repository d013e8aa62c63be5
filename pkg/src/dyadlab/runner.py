"""Batch runs on disk: cell CSVs, manifest, metric summaries and reports.

Layout of a run directory::

    manifest.json           config echo, seed table, version, timestamp
    summary.json            per-cell metric summary
    cells/<cell>.csv        one row per (dyad, round)
    metrics/*.csv           tidy per-round metric series
    trajectories/<cell>.csv continuous mode, when enabled
    report/                 written by ``report``

A run is staged in a hidden sibling directory and moved into place only
when every cell has been written, so a failed run leaves nothing behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__
from .config import RunConfig, serialize_config
from .embodied import ArenaConfig, BodyState, ContinuousRoundRecord, run_continuous_dyad
from .engine import DyadConfig, RoundRecord, dyad_seed, run_dyad
from .games import Action, Game, Outcome
from .metrics import (
    SurprisalParams,
    efficacy,
    has_predictions,
    late_mean,
    mean_surprisal,
    prediction_accuracy,
)
from .rl_core import TDParams

MANIFEST_VERSION = 1
DEFAULT_OUT = "dyadlab_runs/latest"
ENV_OUT = "DYADLAB_OUT"
LATE_WINDOW = 200

DISCRETE_COLUMNS = ("dyad",) + tuple(f.name for f in fields(RoundRecord))
CONTINUOUS_COLUMNS = ("dyad",) + tuple(f.name for f in fields(ContinuousRoundRecord))
TRAJECTORY_COLUMNS = ("dyad", "round", "step", "seat", "x", "y", "theta", "action")


class RunError(RuntimeError):
    pass


class ReportError(RuntimeError):
    def __init__(self, message: str, cells: list[str] | None = None):
        self.cells = list(cells or [])
        super().__init__(message)


def cell_id(model: str, opponent: str, game: str) -> str:
    return f"{model}__vs__{opponent}__{game}"


def resolve_output_dir(cli_out: str | None, config: RunConfig) -> Path:
    for candidate in (cli_out, config.output_dir, os.environ.get(ENV_OUT)):
        if candidate:
            return Path(candidate)
    return Path(DEFAULT_OUT)


# -- CSV encoding -----------------------------------------------------------

def _enc(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, Action):
        return value.code
    if isinstance(value, Outcome):
        return value.value
    return str(value)


def _dec_action(s: str) -> Optional[Action]:
    return Action.from_code(s) if s else None


def _dec_bool(s: str) -> Optional[bool]:
    if s == "":
        return None
    if s not in ("0", "1"):
        raise ValueError(f"bad flag {s!r}")
    return s == "1"


_DECODERS = {
    "round": int,
    "action_a": Action.from_code,
    "action_b": Action.from_code,
    "outcome_a": Outcome,
    "outcome_b": Outcome,
    "reward_a": int,
    "reward_b": int,
    "prediction_a": _dec_action,
    "prediction_b": _dec_action,
    "pred_correct_a": _dec_bool,
    "pred_correct_b": _dec_bool,
    "steps": int,
    "switches_a": int,
    "switches_b": int,
    "timeout": _dec_bool,
    "initial_prediction_a": _dec_action,
    "initial_prediction_b": _dec_action,
}


def encode_cell(dyads: list[list[RoundRecord]], continuous: bool) -> str:
    columns = CONTINUOUS_COLUMNS if continuous else DISCRETE_COLUMNS
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    names = columns[1:]
    for d, records in enumerate(dyads):
        for rec in records:
            w.writerow([d] + [_enc(getattr(rec, n)) for n in names])
    return buf.getvalue()


def read_cell_csv(path: str | Path) -> list[list[RoundRecord]]:
    """Parse a cell CSV back into per-dyad record lists."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header == CONTINUOUS_COLUMNS:
            cls = ContinuousRoundRecord
        elif header == DISCRETE_COLUMNS:
            cls = RoundRecord
        else:
            raise ValueError(f"unexpected header {list(header)}")
        names = header[1:]
        dyads: list[list[RoundRecord]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            d = int(row[0])
            if d == len(dyads):
                dyads.append([])
            elif d != len(dyads) - 1:
                raise ValueError(f"line {lineno}: dyad index {d} out of order")
            dyads[d].append(cls(**{n: _DECODERS[n](v) for n, v in zip(names, row[1:])}))
    return dyads


# -- metrics ----------------------------------------------------------------

def summarize_cell(dyads: list[list[RoundRecord]], surprisal: SurprisalParams
                   ) -> tuple[dict, dict[str, list[float]]]:
    """Scalar summary and per-round series for one cell."""
    rounds = len(dyads[0])
    late = max(0, rounds - LATE_WINDOW)
    late_records = [rec for dyad in dyads for rec in dyad[late:]]
    s_series = mean_surprisal(dyads, surprisal).per_round_mean
    summary = {
        "dyads": len(dyads),
        "rounds": rounds,
        "efficacy": efficacy(dyads, "a"),
        "efficacy_late": efficacy(late_records, "a"),
        "opponent_efficacy": efficacy(dyads, "b"),
        "mean_surprisal": late_mean(s_series, 0),
        "mean_surprisal_late": late_mean(s_series, late),
        "prediction_error": None,
        "prediction_error_late": None,
    }
    series = {"surprisal": s_series}
    if has_predictions(dyads, "a"):
        acc, err = prediction_accuracy(dyads, "a")
        summary["prediction_error"] = err
        summary["prediction_error_late"] = 1.0 - late_mean(acc, late)
        series["prediction_accuracy"] = acc
    if isinstance(dyads[0][0], ContinuousRoundRecord):
        n = len(dyads) * rounds
        flat = [rec for dyad in dyads for rec in dyad]
        summary["mean_steps"] = sum(r.steps for r in flat) / n
        summary["switches_per_round_a"] = sum(r.switches_a for r in flat) / n
        summary["timeouts"] = sum(1 for r in flat if r.timeout)
    return summary, series


# -- running ----------------------------------------------------------------

@dataclass(frozen=True)
class CellTask:
    model: str
    opponent: str
    game: Game
    dyads: int
    rounds: int
    base_seed: int
    params: TDParams
    predictor_input: str
    surprisal: SurprisalParams
    arena: Optional[ArenaConfig] = None
    trajectories: bool = False

    @property
    def cell(self) -> str:
        return cell_id(self.model, self.opponent, self.game.name)

    def seeds(self) -> list[int]:
        return [dyad_seed(self.base_seed, self.model, self.opponent, self.game.name, d)
                for d in range(self.dyads)]


@dataclass
class CellResult:
    cell: str
    csv_text: str
    summary: dict
    series: dict[str, list[float]]
    trajectory_text: Optional[str] = None


def run_cell_task(task: CellTask) -> CellResult:
    dyads = []
    traj_rows: list[list] | None = [] if task.trajectories and task.arena else None
    for d, seed in enumerate(task.seeds()):
        config = DyadConfig(task.game, task.model, task.opponent, task.rounds, seed,
                            task.params, task.predictor_input)
        if task.arena is None:
            dyads.append(run_dyad(config))
            continue
        sink = None
        if traj_rows is not None:
            def sink(rnd, step, seat, body: BodyState, action, _d=d):
                traj_rows.append([_d, rnd, step, seat, body.x, body.y, body.theta, action.code])
        dyads.append(run_continuous_dyad(config, task.arena, sink))
    summary, series = summarize_cell(dyads, task.surprisal)
    traj_text = None
    if traj_rows is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        w.writerows(traj_rows)
        traj_text = buf.getvalue()
    return CellResult(task.cell, encode_cell(dyads, task.arena is not None), summary, series, traj_text)


def build_tasks(config: RunConfig, base_dir: Path | None = None) -> list[CellTask]:
    grid = config.experiment_grid(base_dir)
    arena = config.arena_config() if config.mode == "continuous" else None
    return [
        CellTask(model, opponent, game, grid.dyads_per_cell, grid.rounds, grid.base_seed,
                 config.td_params(), config.predictor_input, config.surprisal_params(),
                 arena, config.emit_trajectories)
        for model, opponent, game in grid.cells()
    ]


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _write_json(path: Path, data) -> None:
    _write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def _series_csv(name: str, keyed: list[tuple[CellTask, list[float]]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("model", "opponent", "game", "round", name))
    for task, values in keyed:
        for t, v in enumerate(values):
            w.writerow((task.model, task.opponent, task.game.name, t, repr(v)))
    return buf.getvalue()


def _summary_doc(tasks: list[CellTask], results: dict[str, dict]) -> dict:
    return {
        "cells": [
            {"cell": t.cell, "model": t.model, "opponent": t.opponent, "game": t.game.name,
             **results[t.cell]}
            for t in tasks
        ]
    }


def build_manifest(config: RunConfig, tasks: list[CellTask]) -> dict:
    return {
        "manifest_version": MANIFEST_VERSION,
        "artifact_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": serialize_config(config),
        "games": {t.game.name: t.game.to_dict() for t in tasks},
        "cells": [
            {"cell": t.cell, "model": t.model, "opponent": t.opponent, "game": t.game.name,
             "file": f"cells/{t.cell}.csv", "dyads": t.dyads, "rounds": t.rounds,
             "seeds": t.seeds()}
            for t in tasks
        ],
    }


def run_command(config: RunConfig, out: str | Path | None = None, jobs: int = 1,
                base_dir: Path | None = None, overwrite: bool = False, log=None) -> Path:
    """Execute a run and return the final run directory."""
    if jobs < 1:
        raise RunError(f"--jobs must be >= 1, got {jobs}")
    target = Path(out) if out is not None else resolve_output_dir(None, config)
    if target.exists() and any(target.iterdir()) and not overwrite:
        raise RunError(f"output directory {target} is not empty (use --overwrite to replace it)")
    tasks = build_tasks(config, base_dir)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{target.name}.", suffix=".partial", dir=target.parent))
    except OSError as exc:
        raise RunError(f"output directory {target} is not writable: {exc}") from exc

    try:
        summaries: dict[str, dict] = {}
        series: dict[str, dict[str, list[float]]] = {}

        def collect(result: CellResult) -> None:
            _write_text(staging / "cells" / f"{result.cell}.csv", result.csv_text)
            if result.trajectory_text is not None:
                _write_text(staging / "trajectories" / f"{result.cell}.csv", result.trajectory_text)
            summaries[result.cell] = result.summary
            series[result.cell] = result.series
            if log:
                log(f"{result.cell}: efficacy {result.summary['efficacy']:.3f}")

        if jobs == 1:
            for task in tasks:
                collect(run_cell_task(task))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for result in pool.map(run_cell_task, tasks):
                    collect(result)

        _write_json(staging / "summary.json", _summary_doc(tasks, summaries))
        for name in ("surprisal", "prediction_accuracy"):
            keyed = [(t, series[t.cell][name]) for t in tasks if name in series[t.cell]]
            _write_text(staging / "metrics" / f"{name}.csv", _series_csv(name, keyed))
        _write_json(staging / "manifest.json", build_manifest(config, tasks))

        if target.exists():
            shutil.rmtree(target)
        os.replace(staging, target)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return target


# -- reporting --------------------------------------------------------------

def load_manifest(run_dir: Path) -> dict:
    path = run_dir / "manifest.json"
    if not run_dir.is_dir():
        raise ReportError(f"{run_dir} is not a directory")
    if not path.exists():
        raise ReportError(f"{run_dir} has no manifest.json; is it a run directory?")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path} is corrupt: {exc}") from None


def report_command(run_dir: str | Path, out: str | Path | None = None,
                   emit_plots: bool | None = None) -> Path:
    """Recompute metrics from the cell CSVs and write summary JSON and SVG plots."""
    from .config import parse_config
    from .plots import write_experiment_plots

    run_dir = Path(run_dir)
    manifest = load_manifest(run_dir)
    config = parse_config(manifest)
    surprisal = config.surprisal_params()
    if emit_plots is None:
        emit_plots = config.emit_plots

    problems, bad_cells = [], []
    cells = []
    for entry in manifest["cells"]:
        path = run_dir / entry["file"]
        try:
            dyads = read_cell_csv(path)
            expected = entry["dyads"] * entry["rounds"]
            got = sum(len(d) for d in dyads)
            if got != expected or any(len(d) != entry["rounds"] for d in dyads):
                raise ValueError(f"{got} rows, expected {expected}")
        except FileNotFoundError:
            problems.append(f"{entry['cell']}: missing {entry['file']}")
            bad_cells.append(entry["cell"])
            continue
        except (ValueError, KeyError, StopIteration) as exc:
            problems.append(f"{entry['cell']}: corrupt ({exc})")
            bad_cells.append(entry["cell"])
            continue
        summary, series = summarize_cell(dyads, surprisal)
        cells.append((entry, summary, series))
    if not manifest["cells"]:
        raise ReportError(f"{run_dir}: manifest lists no cells")
    if problems:
        raise ReportError("cannot report:\n  " + "\n  ".join(problems), bad_cells)

    report_dir = Path(out) if out is not None else run_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "cells": [
            {"cell": e["cell"], "model": e["model"], "opponent": e["opponent"], "game": e["game"],
             **summary}
            for e, summary, _ in cells
        ]
    }
    _write_json(report_dir / "summary.json", doc)
    if emit_plots:
        write_experiment_plots(cells, report_dir, manifest.get("games", {}))
    return report_dir
