"""Cartesian ablation grids over experiment settings, optionally on a process pool."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor

from ..datasets import Dataset
from .config import ExperimentConfig

WORKERS_ENV = "ILPLAYER_WORKERS"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, value)


def expand_grid(base: ExperimentConfig, grid: dict, seeds) -> list[ExperimentConfig]:
    """One config per combination of grid values and seed, in a fixed order."""
    keys = sorted(grid)
    configs = []
    for values in itertools.product(*(grid[k] for k in keys)):
        for seed in seeds:
            configs.append(ExperimentConfig.from_dict({**base.to_dict(), **dict(zip(keys, values)), "seed": seed}))
    return configs


def _run_one(args):
    from .training import train

    config, dataset = args
    return train(config, dataset)[1]


def run_ablation_grid(base: ExperimentConfig, grid: dict, dataset: Dataset, seeds=(0,), workers: int | None = None):
    """Train every grid cell and return the result records in grid order."""
    configs = expand_grid(base, grid, seeds)
    workers = worker_count() if workers is None else workers
    jobs = [(c, dataset) for c in configs]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))
