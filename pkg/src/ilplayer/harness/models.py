"""Predictors evaluated by the harness and their checkpoint format."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..comboptnet import BackwardConfig, CombOptNetLayer
from ..constraints import ConstraintSet, to_matrix_form
from ..datasets import Dataset, KnapsackDatasetSpec, Split
from ..lattice import Lattice
from ..nn import Mlp, normalize_cost
from .results import Metrics

CHECKPOINT_VERSION = 1
GT_FEAS_TOL = 1e-7


def model_lattice(dataset: Dataset) -> Lattice:
    """Frame the learnable parameters live in for this task."""
    if dataset.task == "knapsack":
        return Lattice.identity(dataset.ground_truth["box_low"], dataset.ground_truth["box_high"])
    return dataset.lattice()


def knapsack_spec(dataset: Dataset) -> KnapsackDatasetSpec:
    return KnapsackDatasetSpec(**dataset.spec)


def ground_truth_feasible(dataset: Dataset, split: Split, y) -> np.ndarray:
    y = np.asarray(y)
    gt = dataset.ground_truth
    if dataset.task == "knapsack":
        return np.sum(split.extra["weights"] * y, axis=1) <= gt["capacity"] + GT_FEAS_TOL
    A = np.asarray(gt["A"], dtype=float)
    b = np.asarray(gt["b"], dtype=float)
    if dataset.task == "wsc":
        return np.all(y @ A.T >= b - GT_FEAS_TOL, axis=1)
    z = dataset.lattice().to_frame(y)
    return np.all(z @ A.T <= b + GT_FEAS_TOL, axis=1)


def true_objective(dataset: Dataset, split: Split, y) -> np.ndarray:
    """Minimisation objective under the ground-truth costs."""
    y = np.asarray(y, dtype=float)
    if dataset.task == "knapsack":
        return -np.sum(split.extra["prices"] * y, axis=1)
    return np.sum(split.inputs * y, axis=1)


def evaluate(model, dataset: Dataset, split: str = "test"):
    """Return ``(Metrics, statuses)`` of ``model`` on one split."""
    data = dataset.split(split)
    y, statuses = model.predict(data)
    feasible = ground_truth_feasible(dataset, data, y)
    gap = true_objective(dataset, data, y) - true_objective(dataset, data, data.labels)
    return Metrics.compute(y, data.labels, feasible, gap, statuses), statuses


class ConstraintModel:
    """Learned constraints ``A z <= b`` in the frame of ``lattice``; costs come from the input."""

    kind = "constraints"

    def __init__(self, constraints: ConstraintSet, lattice: Lattice, backward: BackwardConfig = BackwardConfig()):
        self.constraints = constraints
        self.lattice = lattice
        self.layer = CombOptNetLayer(lattice, backward)

    def predict(self, split: Split):
        A, b = to_matrix_form(self.constraints)
        z, statuses = self.layer.solve(A, b, normalize_cost(split.inputs))
        return self.lattice.from_frame(z), statuses

    def to_dict(self) -> dict:
        return {"constraints": self.constraints.to_dict(),
                "backward": {"temperature": self.layer.config.temperature, "basis": self.layer.config.basis.value}}

    @classmethod
    def from_dict(cls, data: dict, dataset: Dataset) -> "ConstraintModel":
        return cls(ConstraintSet.from_dict(data["constraints"]), model_lattice(dataset),
                   BackwardConfig(**data["backward"]))


class KnapsackModel:
    """Per-item MLP producing (weight, price); capacity fixed at the known value."""

    kind = "knapsack"

    def __init__(self, mlp: Mlp, spec: KnapsackDatasetSpec, backward: BackwardConfig = BackwardConfig()):
        self.mlp = mlp
        self.spec = spec
        self.lattice = Lattice.identity(np.zeros(spec.items), np.ones(spec.items))
        self.layer = CombOptNetLayer(self.lattice, backward)

    def item_parameters(self, features):
        """Predicted weights and prices, each ``(N, items)``."""
        features = np.asarray(features, dtype=float)
        out = self.mlp(features.reshape(-1, features.shape[-1]))
        shape = features.shape[:-1]
        return out[:, 0].reshape(shape), out[:, 1].reshape(shape)

    def instance(self, weights, prices):
        """Scaled solver inputs ``(A, b, c_raw, c)`` for a batch."""
        s = self.spec.scale
        A = (s * weights)[:, None, :]
        b = np.full((len(weights), 1), s * self.spec.capacity)
        c_raw = -s * prices
        return A, b, c_raw, normalize_cost(c_raw)

    def predict(self, split: Split):
        w, p = self.item_parameters(split.inputs)
        A, b, _, c = self.instance(w, p)
        y, statuses = self.layer.solve(A, b, c)
        return np.rint(y).astype(np.int64), statuses

    def to_dict(self) -> dict:
        return {"mlp": self.mlp.to_dict(),
                "backward": {"temperature": self.layer.config.temperature, "basis": self.layer.config.basis.value}}

    @classmethod
    def from_dict(cls, data: dict, dataset: Dataset) -> "KnapsackModel":
        return cls(Mlp.from_dict(data["mlp"]), knapsack_spec(dataset), BackwardConfig(**data["backward"]))


class MlpBaselineModel:
    """Direct regression of the normalized solution, rounded and clamped to the box."""

    kind = "mlp"

    def __init__(self, mlp: Mlp, lattice: Lattice, normalize_inputs: bool = True):
        self.mlp = mlp
        self.lattice = lattice
        self.normalize_inputs = normalize_inputs

    def features(self, inputs):
        x = np.asarray(inputs, dtype=float).reshape(len(inputs), -1)
        return normalize_cost(x) if self.normalize_inputs else x

    def predict(self, split: Split):
        z = self.mlp(self.features(split.inputs))
        y = np.rint(z * self.lattice.scale + self.lattice.center).astype(np.int64)
        return np.clip(y, self.lattice.low, self.lattice.high), []

    def to_dict(self) -> dict:
        return {"mlp": self.mlp.to_dict(), "normalize_inputs": self.normalize_inputs}

    @classmethod
    def from_dict(cls, data: dict, dataset: Dataset) -> "MlpBaselineModel":
        lattice = Lattice.normalized(dataset.ground_truth["box_low"], dataset.ground_truth["box_high"])
        return cls(Mlp.from_dict(data["mlp"]), lattice, data["normalize_inputs"])


MODEL_TYPES = {cls.kind: cls for cls in (ConstraintModel, KnapsackModel, MlpBaselineModel)}


def save_checkpoint(model, config, path, optimizer=None) -> None:
    data = {"checkpoint_version": CHECKPOINT_VERSION, "kind": model.kind,
            "config": config.to_dict(), "model": model.to_dict()}
    if optimizer is not None:
        data["optimizer"] = optimizer.state_dict()
    Path(path).write_text(json.dumps(data, sort_keys=True) + "\n")


def load_checkpoint(path, dataset: Dataset):
    """Return ``(model, config dict)``."""
    data = json.loads(Path(path).read_text())
    if data.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {data.get('checkpoint_version')!r}")
    if data["kind"] not in MODEL_TYPES:
        raise ValueError(f"{path}: unknown model kind {data['kind']!r}")
    return MODEL_TYPES[data["kind"]].from_dict(data["model"], dataset), data["config"]
