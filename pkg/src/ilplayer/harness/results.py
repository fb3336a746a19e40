"""Metrics, result records, CSV/JSON emission and restart aggregation."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..ilp_solver import SolveStatus

METRIC_FIELDS = ("accuracy", "per_variable_accuracy", "feasibility_rate", "objective_gap", "fallback_fraction")
CSV_FIELDS = ("method", "task", "config_hash", "seed", "epoch", "train_loss") + METRIC_FIELDS


@dataclass
class Metrics:
    """Test-split metrics; accuracies and rates in percent."""

    accuracy: float
    per_variable_accuracy: float
    feasibility_rate: float
    objective_gap: float
    fallback_fraction: float
    count: int = 0

    @classmethod
    def compute(cls, y, y_star, feasible, gap, statuses) -> "Metrics":
        y = np.asarray(y)
        y_star = np.asarray(y_star)
        fallbacks = sum(1 for s in statuses if s == SolveStatus.INFEASIBLE_FALLBACK)
        return cls(
            accuracy=100.0 * float(np.mean(np.all(y == y_star, axis=1))),
            per_variable_accuracy=100.0 * float(np.mean(y == y_star)),
            feasibility_rate=100.0 * float(np.mean(feasible)),
            objective_gap=float(np.mean(gap)),
            fallback_fraction=fallbacks / len(statuses) if statuses else 0.0,
            count=len(y),
        )


@dataclass
class EpochRow:
    epoch: int
    train_loss: float | None
    metrics: Metrics


@dataclass
class ResultRecord:
    method: str
    task: str
    config: dict
    config_hash: str
    seed: int
    history: list = field(default_factory=list)  # EpochRow, epoch 0 is the untrained model
    wall_clock: float = 0.0
    solver_calls: int = 0
    status_counts: dict = field(default_factory=lambda: {s.value: 0 for s in SolveStatus})

    def count_statuses(self, statuses):
        self.solver_calls += len(statuses)
        for s in statuses:
            self.status_counts[SolveStatus(s).value] += 1

    @property
    def final(self) -> Metrics:
        return self.history[-1].metrics

    @property
    def best(self) -> Metrics:
        return max((row.metrics for row in self.history), key=lambda m: m.accuracy)

    def rows(self) -> list[dict]:
        out = []
        for row in self.history:
            rec = {
                "method": self.method, "task": self.task, "config_hash": self.config_hash,
                "seed": self.seed, "epoch": row.epoch, "train_loss": row.train_loss,
            }
            rec.update({k: getattr(row.metrics, k) for k in METRIC_FIELDS})
            out.append(rec)
        return out

    def deterministic_view(self) -> dict:
        """Everything except the wall clock."""
        data = asdict(self)
        data.pop("wall_clock")
        return data


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for rec in records:
            for row in rec.rows():
                writer.writerow([_fmt(row[k]) for k in CSV_FIELDS])


def read_results_csv(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = dict(raw)
            row["seed"] = int(row["seed"])
            row["epoch"] = int(row["epoch"])
            row["train_loss"] = float(row["train_loss"]) if row["train_loss"] else None
            for k in METRIC_FIELDS:
                row[k] = float(row[k])
            out.append(row)
    return out


def _mean_std(values) -> dict:
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "n": int(arr.size)}


def summarize(records) -> list[dict]:
    """Group restarts by ``(method, task, config_hash)``; mean and population std."""
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec.method, rec.task, rec.config_hash), []).append(rec)
    out = []
    for (method, task, chash), recs in groups.items():
        summary = {
            "method": method, "task": task, "config_hash": chash, "config": recs[0].config,
            "seeds": [r.seed for r in recs],
            "last_accuracy": _mean_std([r.final.accuracy for r in recs]),
            "best_accuracy": _mean_std([r.best.accuracy for r in recs]),
            "per_variable_accuracy": _mean_std([r.final.per_variable_accuracy for r in recs]),
            "feasibility_rate": _mean_std([r.final.feasibility_rate for r in recs]),
            "objective_gap": _mean_std([r.final.objective_gap for r in recs]),
            "solver_calls": sum(r.solver_calls for r in recs),
            "status_counts": {k: sum(r.status_counts[k] for r in recs) for k in recs[0].status_counts},
            "wall_clock": sum(r.wall_clock for r in recs),
        }
        calls = summary["solver_calls"]
        fb = summary["status_counts"][SolveStatus.INFEASIBLE_FALLBACK.value]
        summary["fallback_fraction"] = fb / calls if calls else 0.0
        out.append(summary)
    return out


def emit_results(records, out_dir) -> tuple[Path, Path]:
    """Write ``results.csv`` (one row per record and epoch) and ``summary.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    json_path = out_dir / "summary.json"
    write_results_csv(records, csv_path)
    json_path.write_text(json.dumps(summarize(records), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path
