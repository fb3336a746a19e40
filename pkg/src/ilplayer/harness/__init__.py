"""Experiment driver: training loops, baselines, metrics and the command line."""

from .ablation import expand_grid, run_ablation_grid
from .baselines import baseline_box_constrained, baseline_lp_max_knapsack, greedy_rounding
from .config import ExperimentConfig, load_config
from .models import evaluate, load_checkpoint, save_checkpoint
from .results import Metrics, ResultRecord, emit_results, read_results_csv, summarize
from .training import baseline_mlp, train, train_knapsack, train_static_constraints

__all__ = [
    "ExperimentConfig", "Metrics", "ResultRecord", "baseline_box_constrained", "baseline_lp_max_knapsack",
    "baseline_mlp", "emit_results", "evaluate", "expand_grid", "greedy_rounding", "load_checkpoint",
    "load_config", "read_results_csv", "run_ablation_grid", "save_checkpoint", "summarize", "train",
    "train_knapsack", "train_static_constraints",
]
