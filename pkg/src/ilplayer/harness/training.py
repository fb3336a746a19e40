"""Training loops for learned constraints, the knapsack extractor and the MLP baseline."""

from __future__ import annotations

import logging
import time

import numpy as np

from ..constraints import ConstraintSet, pull_back_gradients, random_init, to_matrix_form
from ..datasets import Dataset
from ..nn import Adam, LossKind, Mlp, loss_and_gradient, normalize_cost, normalize_cost_backward
from .config import ExperimentConfig
from .models import ConstraintModel, KnapsackModel, MlpBaselineModel, evaluate, knapsack_spec, model_lattice
from .results import EpochRow, ResultRecord

log = logging.getLogger(__name__)

MLP_BASELINE_HIDDEN = (100, 100, 100)
TRAIN_STREAM = 1  # keeps training draws independent of a dataset generated with the same seed


def training_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, TRAIN_STREAM])


def ground_truth_count(dataset: Dataset) -> int:
    if dataset.task == "knapsack":
        return 1
    return len(dataset.ground_truth["b"])


def new_record(config: ExperimentConfig, method: str) -> ResultRecord:
    return ResultRecord(method, config.task, config.to_dict(), config.config_hash(), config.seed)


def _batches(rng, n_items, batch_size):
    perm = rng.permutation(n_items)
    return [perm[i : i + batch_size] for i in range(0, n_items, batch_size)]


def _run_epochs(config, dataset, model, step, record, rng):
    """Shared loop: epoch 0 evaluates the untrained model, later epochs train then evaluate."""
    start = time.perf_counter()
    metrics, statuses = evaluate(model, dataset)
    record.count_statuses(statuses)
    record.history.append(EpochRow(0, None, metrics))
    n_train = len(dataset.train)
    for epoch in range(1, config.epochs + 1):
        losses = [step(idx) for idx in _batches(rng, n_train, config.batch_size)]
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            metrics, statuses = evaluate(model, dataset)
            record.count_statuses(statuses)
            record.history.append(EpochRow(epoch, float(np.mean(losses)), metrics))
            log.info("%s %s seed=%d epoch=%d loss=%.5f acc=%.1f", record.method, record.task,
                     config.seed, epoch, np.mean(losses), metrics.accuracy)
    record.wall_clock = time.perf_counter() - start
    return record


def train_static_constraints(config: ExperimentConfig, dataset: Dataset, constraints: ConstraintSet | None = None):
    """Learn ``multiplier * m`` constraints from (cost, solution) pairs.

    Returns ``(ConstraintModel, ResultRecord)``.
    """
    if dataset.task not in ("rc", "wsc"):
        raise ValueError(f"static-constraint training needs an rc or wsc dataset, got {dataset.task!r}")
    rng = training_rng(config.seed)
    lattice = model_lattice(dataset)
    if constraints is None:
        constraints = random_init(dataset.n, config.multiplier * ground_truth_count(dataset),
                                  config.parametrization, rng)
    model = ConstraintModel(constraints, lattice, config.backward_config)
    opt = Adam(constraints.parameters(), lr=config.lr)
    record = new_record(config, "comboptnet")
    costs = normalize_cost(dataset.train.inputs)
    targets = lattice.to_frame(dataset.train.labels)
    loss_kind = LossKind(config.loss)

    def step(idx):
        A, b = to_matrix_form(constraints)
        ctx = model.layer.forward(A, b, costs[idx])
        record.count_statuses(ctx.statuses)
        loss, dy = loss_and_gradient(loss_kind, ctx.y, targets[idx])
        grad = model.layer.backward(ctx, dy / len(idx))
        opt.step(pull_back_gradients(constraints, grad.dA.sum(axis=0), grad.db.sum(axis=0)))
        constraints.check()
        return loss

    _run_epochs(config, dataset, model, step, record, rng)
    return model, record


def train_knapsack(config: ExperimentConfig, dataset: Dataset):
    """Learn the item extractor end to end through the solver.

    Returns ``(KnapsackModel, ResultRecord)``.
    """
    if dataset.task != "knapsack":
        raise ValueError(f"train_knapsack needs a knapsack dataset, got {dataset.task!r}")
    spec = knapsack_spec(dataset)
    rng = training_rng(config.seed)
    d = dataset.train.inputs.shape[-1]
    mlp = Mlp([d, config.hidden, 2], rng, sigmoid_output=True,
              out_low=[spec.weight_low, spec.price_low], out_high=[spec.weight_high, spec.price_high])
    model = KnapsackModel(mlp, spec, config.backward_config)
    opt = Adam(mlp.parameters(), lr=config.lr)
    record = new_record(config, "comboptnet")
    feats = dataset.train.inputs
    labels = dataset.train.labels.astype(float)
    loss_kind = LossKind(config.loss)

    def step(idx):
        x = feats[idx]
        out, cache = mlp.forward(x.reshape(-1, d))
        w = out[:, 0].reshape(len(idx), -1)
        p = out[:, 1].reshape(len(idx), -1)
        A, b, c_raw, c = model.instance(w, p)
        ctx = model.layer.forward(A, b, c)
        record.count_statuses(ctx.statuses)
        loss, dy = loss_and_gradient(loss_kind, ctx.y, labels[idx])
        grad = model.layer.backward(ctx, dy / len(idx))
        dw = spec.scale * grad.dA[:, 0, :]
        dp = -spec.scale * normalize_cost_backward(c_raw, grad.dc)
        opt.step(mlp.backward(cache, np.stack([dw, dp], axis=-1).reshape(-1, 2)))
        if not all(np.all(np.isfinite(q)) for q in mlp.parameters()):
            raise FloatingPointError("extractor parameters became non-finite")
        return loss

    _run_epochs(config, dataset, model, step, record, rng)
    return model, record


def baseline_mlp(config: ExperimentConfig, dataset: Dataset):
    """Three hidden ReLU layers of width 100 regressing the normalized solution.

    Returns ``(MlpBaselineModel, ResultRecord)``.
    """
    rng = training_rng(config.seed)
    lattice = dataset.lattice()
    normalize_inputs = dataset.task != "knapsack"
    tmp = MlpBaselineModel(None, lattice, normalize_inputs)
    x = tmp.features(dataset.train.inputs)
    targets = lattice.to_frame(dataset.train.labels)
    mlp = Mlp([x.shape[1], *MLP_BASELINE_HIDDEN, dataset.n], rng)
    model = MlpBaselineModel(mlp, lattice, normalize_inputs)
    opt = Adam(mlp.parameters(), lr=config.lr)
    record = new_record(config, "mlp")

    def step(idx):
        out, cache = mlp.forward(x[idx])
        loss, g = loss_and_gradient(LossKind.MSE, out, targets[idx])
        opt.step(mlp.backward(cache, g / len(idx)))
        return loss

    _run_epochs(config, dataset, model, step, record, rng)
    return model, record


def train(config: ExperimentConfig, dataset: Dataset):
    """Dispatch on ``config.method``; returns ``(model or None, ResultRecord)``."""
    from .baselines import baseline_box_constrained, baseline_lp_max_knapsack

    if config.task != dataset.task:
        raise ValueError(f"config task {config.task!r} does not match dataset task {dataset.task!r}")
    if config.method == "mlp":
        return baseline_mlp(config, dataset)
    if config.method == "box":
        return None, baseline_box_constrained(dataset, config)
    if config.method == "lp_max":
        return None, baseline_lp_max_knapsack(dataset, config)
    if dataset.task == "knapsack":
        return train_knapsack(config, dataset)
    return train_static_constraints(config, dataset)
