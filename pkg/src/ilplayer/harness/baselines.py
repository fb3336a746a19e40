"""Untrained reference predictors: the box-only solver and LP relaxation with greedy rounding."""

from __future__ import annotations

import time

import numpy as np

from ..datasets import Dataset, Split
from ..ilp_solver import IlpInstance, LpStatus, solve_lp_relaxation
from ..lattice import Lattice
from ..comboptnet import CombOptNetLayer
from .config import ExperimentConfig
from .models import evaluate, knapsack_spec
from .results import EpochRow


class BoxModel:
    """Minimise the cost over the box alone."""

    kind = "box"

    def __init__(self, low, high):
        self.lattice = Lattice.identity(low, high)
        self.layer = CombOptNetLayer(self.lattice)
        self.n = self.lattice.n

    def predict(self, split: Split):
        costs = np.asarray(split.inputs, dtype=float)
        y, statuses = self.layer.solve(np.zeros((0, self.n)), np.zeros(0), costs)
        return np.rint(y).astype(np.int64), statuses


def greedy_rounding(values, weights, capacity) -> np.ndarray:
    """Take items by decreasing fractional value, skipping any that no longer fit."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(-values, kind="stable")
    y = np.zeros(values.size, dtype=np.int64)
    load = 0.0
    for i in order:
        if load + weights[i] <= capacity + 1e-9:
            y[i] = 1
            load += weights[i]
    return y


class LpMaxModel:
    """LP relaxation on the true weights and prices, then greedy rounding."""

    kind = "lp_max"

    def __init__(self, dataset: Dataset):
        self.spec = knapsack_spec(dataset)

    def relaxation(self, weights, prices) -> np.ndarray:
        s = self.spec
        inst = IlpInstance(-s.scale * prices, (s.scale * weights)[None], [s.scale * s.capacity],
                           np.zeros(s.items), np.ones(s.items))
        lp = solve_lp_relaxation(inst)
        if lp.status != LpStatus.OPTIMAL:
            raise RuntimeError(f"knapsack relaxation returned {lp.status}")
        return lp.point

    def predict(self, split: Split):
        out = []
        for w, p in zip(split.extra["weights"], split.extra["prices"]):
            out.append(greedy_rounding(self.relaxation(w, p), w, self.spec.capacity))
        return np.array(out), []


def _single_row_record(config, dataset, model, method):
    from .training import new_record

    config = config or ExperimentConfig(task=dataset.task, method=method, epochs=0)
    record = new_record(config, method)
    start = time.perf_counter()
    metrics, statuses = evaluate(model, dataset)
    record.count_statuses(statuses)
    record.history.append(EpochRow(0, None, metrics))
    record.wall_clock = time.perf_counter() - start
    return record


def baseline_box_constrained(dataset: Dataset, config: ExperimentConfig | None = None):
    if dataset.task == "knapsack":
        raise ValueError("the box-only baseline needs explicit costs (rc or wsc datasets)")
    gt = dataset.ground_truth
    return _single_row_record(config, dataset, BoxModel(gt["box_low"], gt["box_high"]), "box")


def baseline_lp_max_knapsack(dataset: Dataset, config: ExperimentConfig | None = None):
    if dataset.task != "knapsack":
        raise ValueError("the LP relaxation baseline applies to knapsack datasets only")
    return _single_row_record(config, dataset, LpMaxModel(dataset), "lp_max")
