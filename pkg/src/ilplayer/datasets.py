"""Dataset generators (random constraints, weighted set cover, knapsack) and JSONL I/O.

File layout: the first line is a header record with ``schema_version``,
``generator_version``, ``task``, ``spec`` and ``ground_truth``; every further
line is one item ``{"split", "input", "label", ...}``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .constraints import INIT_RADIUS, random_unit_vectors
from .ilp_solver import IlpInstance, LatticeEnumerator, SolveStatus, solve_ilp
from .lattice import Lattice

SCHEMA_VERSION = 1
GENERATOR_VERSION = "1.0"
ENUMERATION_LIMIT = 1 << 17


class DatasetFormatError(ValueError):
    pass


@dataclass
class RcDatasetSpec:
    m: int = 1
    box: str = "binary"
    n: int = 16
    train_size: int = 1600
    test_size: int = 1000
    seed: int = 0
    feasibility_samples: int = 100_000
    min_feasible_fraction: float = 0.01
    max_feasible_fraction: float = 0.99
    max_attempts: int = 200

    def box_bounds(self):
        if self.box == "binary":
            return np.zeros(self.n, dtype=np.int64), np.ones(self.n, dtype=np.int64)
        if self.box == "dense":
            return np.full(self.n, -5, dtype=np.int64), np.full(self.n, 5, dtype=np.int64)
        raise ValueError(f"unknown box kind {self.box!r}")


@dataclass
class WscDatasetSpec:
    universe: int = 4
    max_subset_size: int = 3
    train_size: int = 1600
    test_size: int = 1000
    seed: int = 0

    @property
    def n(self) -> int:
        return 2 * self.universe


@dataclass
class KnapsackDatasetSpec:
    items: int = 10
    price_low: int = 10
    price_high: int = 45
    weight_low: int = 15
    weight_high: int = 35
    capacity: float = 100.0
    scale: float = 0.01
    feature_dim: int = 64
    noise: float = 0.01
    train_size: int = 4500
    test_size: int = 500
    seed: int = 0


@dataclass
class Split:
    inputs: np.ndarray  # (N, n) costs, or (N, items, d) features
    labels: np.ndarray  # (N, n) integer solutions
    extra: dict = field(default_factory=dict)  # per-item arrays, e.g. knapsack weights/prices

    def __len__(self):
        return len(self.labels)


@dataclass
class Dataset:
    task: str
    spec: dict
    ground_truth: dict
    train: Split
    test: Split

    @property
    def n(self) -> int:
        return self.train.labels.shape[1]

    def lattice(self) -> Lattice:
        gt = self.ground_truth
        return Lattice.normalized(gt["box_low"], gt["box_high"])

    def split(self, name: str) -> Split:
        return {"train": self.train, "test": self.test}[name]


# ---------------------------------------------------------------------------
# Labelling
# ---------------------------------------------------------------------------


def label_instances(A, b, costs, low, high, sense=None):
    """Exact solutions (integer coordinates) for many costs sharing ``(A, b)``."""
    costs = np.atleast_2d(costs)
    size = int(np.prod(np.asarray(high) - np.asarray(low) + 1, dtype=object))
    if size <= ENUMERATION_LIMIT:
        return LatticeEnumerator(low, high).solve(A, b, costs, sense)
    sols, statuses = [], []
    for c in costs:
        res = solve_ilp(IlpInstance(c, A, b, low, high, sense or ()))
        sols.append(res.solution)
        statuses.append(res.status)
    return np.array(sols), statuses


# ---------------------------------------------------------------------------
# Random constraints
# ---------------------------------------------------------------------------


def sample_rc_constraints(rng, n, m):
    """Unit normals, origins in [-0.25, 0.25]^n, radius 0.2, origin kept feasible."""
    normals = random_unit_vectors(rng, m, n)
    origins = rng.uniform(-0.25, 0.25, size=(m, n))
    b = INIT_RADIUS - np.einsum("kn,kn->k", normals, origins)
    flip = np.einsum("kn,kn->k", normals, origins) > b
    normals[flip] *= -1.0
    b = INIT_RADIUS - np.einsum("kn,kn->k", normals, origins)
    return normals, b, origins


def feasible_fraction(A, b, lattice: Lattice, rng, samples: int) -> float:
    pts = rng.integers(lattice.low, lattice.high + 1, size=(samples, lattice.n))
    z = lattice.to_frame(pts)
    return float(np.mean(np.all(z @ A.T <= b, axis=1)))


def generate_rc(spec: RcDatasetSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    low, high = spec.box_bounds()
    lattice = Lattice.normalized(low, high)
    for _ in range(spec.max_attempts):
        A, b, origins = sample_rc_constraints(rng, spec.n, spec.m)
        frac = feasible_fraction(A, b, lattice, rng, spec.feasibility_samples)
        if spec.min_feasible_fraction <= frac <= spec.max_feasible_fraction:
            break
    else:
        raise RuntimeError(f"no acceptable constraint set after {spec.max_attempts} attempts")
    costs = random_unit_vectors(rng, spec.train_size + spec.test_size, spec.n)
    A_int, b_int = lattice.constraints_to_integer(A, b)
    labels, statuses = label_instances(A_int, b_int, lattice.cost_to_integer(costs), low, high)
    if any(s != SolveStatus.OPTIMAL for s in statuses):
        raise RuntimeError("ground-truth constraints left an instance infeasible")
    gt = {
        "A": A.tolist(), "b": b.tolist(), "origins": origins.tolist(),
        "frame": "normalized", "sense": ["<="] * spec.m,
        "box_low": low.tolist(), "box_high": high.tolist(),
        "feasible_fraction": frac,
    }
    t = spec.train_size
    return Dataset("rc", asdict(spec), gt, Split(costs[:t], labels[:t]), Split(costs[t:], labels[t:]))


# ---------------------------------------------------------------------------
# Weighted set cover
# ---------------------------------------------------------------------------


def _sample_subset(rng, universe, max_size):
    sizes = np.arange(1, max_size + 1)
    counts = np.array([comb(universe, int(k)) for k in sizes], dtype=float)
    k = rng.choice(sizes, p=counts / counts.sum())
    return np.sort(rng.choice(universe, size=k, replace=False))


def sample_covering(rng, universe, n, max_size, max_attempts=10_000):
    """``n`` subsets of size <= ``max_size`` (uniform over such subsets) whose union is the universe."""
    for _ in range(max_attempts):
        subsets = [_sample_subset(rng, universe, max_size) for _ in range(n)]
        covered = np.zeros(universe, dtype=bool)
        for s in subsets:
            covered[s] = True
        if covered.all():
            return subsets
    raise RuntimeError("could not sample a covering")


def generate_wsc(spec: WscDatasetSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    subsets = sample_covering(rng, spec.universe, n, spec.max_subset_size)
    A = np.zeros((spec.universe, n))
    for j, s in enumerate(subsets):
        A[s, j] = 1.0
    b = np.ones(spec.universe)
    costs = 1.0 - rng.random((spec.train_size + spec.test_size, n))  # U(0, 1]
    low, high = np.zeros(n, dtype=np.int64), np.ones(n, dtype=np.int64)
    sense = [">="] * spec.universe
    labels, statuses = label_instances(A, b, costs, low, high, sense)
    if any(s != SolveStatus.OPTIMAL for s in statuses):
        raise RuntimeError("set cover instance without a feasible cover")
    gt = {
        "A": A.tolist(), "b": b.tolist(), "subsets": [s.tolist() for s in subsets],
        "frame": "integer", "sense": sense,
        "box_low": low.tolist(), "box_high": high.tolist(),
    }
    t = spec.train_size
    return Dataset("wsc", asdict(spec), gt, Split(costs[:t], labels[:t]), Split(costs[t:], labels[t:]))


# ---------------------------------------------------------------------------
# Knapsack
# ---------------------------------------------------------------------------


def knapsack_feature_map(rng, dim: int) -> np.ndarray:
    """Random ``dim x 2`` matrix with orthonormal columns."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, 2)))
    return q


def encode_items(weights, prices, mixing, spec: KnapsackDatasetSpec, rng):
    """Synthetic item features: standardised ``(weight, price)`` mixed linearly, plus noise."""
    w_mid = (spec.weight_low + spec.weight_high) / 2
    w_half = (spec.weight_high - spec.weight_low) / 2
    p_mid = (spec.price_low + spec.price_high) / 2
    p_half = (spec.price_high - spec.price_low) / 2
    raw = np.stack([(weights - w_mid) / w_half, (prices - p_mid) / p_half], axis=-1)
    feats = raw @ mixing.T
    if spec.noise > 0:
        feats = feats + spec.noise * rng.standard_normal(feats.shape)
    return feats


def decode_items(features, mixing, spec: KnapsackDatasetSpec):
    """Least-squares inverse of :func:`encode_items` (exact when noise is zero)."""
    raw, *_ = np.linalg.lstsq(mixing, np.asarray(features).reshape(-1, mixing.shape[0]).T, rcond=None)
    w_mid = (spec.weight_low + spec.weight_high) / 2
    w_half = (spec.weight_high - spec.weight_low) / 2
    p_mid = (spec.price_low + spec.price_high) / 2
    p_half = (spec.price_high - spec.price_low) / 2
    shape = np.asarray(features).shape[:-1]
    return (raw[0] * w_half + w_mid).reshape(shape), (raw[1] * p_half + p_mid).reshape(shape)


def solve_knapsack(weights, prices, spec: KnapsackDatasetSpec, enumerator=None):
    """Optimal selection for every row of ``weights`` / ``prices`` (scaled as during training)."""
    enumerator = enumerator or LatticeEnumerator(np.zeros(spec.items), np.ones(spec.items))
    out = []
    for w, p in zip(np.atleast_2d(weights), np.atleast_2d(prices)):
        y, _ = enumerator.solve(spec.scale * w[None], [spec.scale * spec.capacity], -spec.scale * p[None])
        out.append(y[0])
    return np.array(out)


def generate_knapsack(spec: KnapsackDatasetSpec, rng=None) -> Dataset:
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    total = spec.train_size + spec.test_size
    weights = rng.integers(spec.weight_low, spec.weight_high + 1, size=(total, spec.items)).astype(float)
    prices = rng.integers(spec.price_low, spec.price_high + 1, size=(total, spec.items)).astype(float)
    mixing = knapsack_feature_map(rng, spec.feature_dim)
    features = encode_items(weights, prices, mixing, spec, rng)
    labels = solve_knapsack(weights, prices, spec)
    gt = {
        "mixing": mixing.tolist(), "capacity": spec.capacity, "scale": spec.scale,
        "frame": "integer", "box_low": [0] * spec.items, "box_high": [1] * spec.items,
    }
    t = spec.train_size
    train = Split(features[:t], labels[:t], {"weights": weights[:t], "prices": prices[:t]})
    test = Split(features[t:], labels[t:], {"weights": weights[t:], "prices": prices[t:]})
    return Dataset("knapsack", asdict(spec), gt, train, test)


SPEC_TYPES = {"rc": RcDatasetSpec, "wsc": WscDatasetSpec, "knapsack": KnapsackDatasetSpec}


def generate(task: str, **params) -> Dataset:
    spec = SPEC_TYPES[task](**params)
    return {"rc": generate_rc, "wsc": generate_wsc, "knapsack": generate_knapsack}[task](spec)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def dumps_dataset(ds: Dataset) -> str:
    lines = [json.dumps({
        "schema_version": SCHEMA_VERSION,
        "generator_version": GENERATOR_VERSION,
        "task": ds.task,
        "spec": ds.spec,
        "ground_truth": ds.ground_truth,
        "sizes": {"train": len(ds.train), "test": len(ds.test)},
    }, sort_keys=True)]
    for name in ("train", "test"):
        split = ds.split(name)
        for i in range(len(split)):
            rec = {"split": name, "input": split.inputs[i].tolist(), "label": split.labels[i].tolist()}
            for key, arr in split.extra.items():
                rec[key] = arr[i].tolist()
            lines.append(json.dumps(rec, sort_keys=True))
    return "\n".join(lines) + "\n"


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(dumps_dataset(ds))


def load_dataset(path) -> Dataset:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: empty file")
    header = json.loads(lines[0])
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DatasetFormatError(f"{path}: schema_version {version!r}, expected {SCHEMA_VERSION}")
    for key in ("task", "spec", "ground_truth"):
        if key not in header:
            raise DatasetFormatError(f"{path}: header lacks {key!r}")
    gt = header["ground_truth"]
    n = len(gt["box_low"])
    records = {"train": [], "test": []}
    for lineno, line in enumerate(lines[1:], start=2):
        rec = json.loads(line)
        split = rec.get("split")
        if split not in records:
            raise DatasetFormatError(f"{path}:{lineno}: unknown split {split!r}")
        if len(rec["label"]) != n:
            raise DatasetFormatError(
                f"{path}:{lineno}: label has {len(rec['label'])} entries, expected {n}")
        records[split].append(rec)
    splits = {}
    for name, recs in records.items():
        expected = header.get("sizes", {}).get(name)
        if expected is not None and expected != len(recs):
            raise DatasetFormatError(f"{path}: {name} split has {len(recs)} items, header says {expected}")
        try:
            inputs = np.array([r["input"] for r in recs], dtype=float)
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: ragged inputs in {name} split") from exc
        if len(recs) and inputs.shape[1] != n:
            raise DatasetFormatError(f"{path}: {name} inputs have width {inputs.shape[1]}, expected {n}")
        labels = np.array([r["label"] for r in recs], dtype=np.int64).reshape(len(recs), n)
        extra_keys = sorted(set().union(*(r.keys() for r in recs)) - {"split", "input", "label"}) if recs else []
        extra = {k: np.array([r[k] for r in recs], dtype=float) for k in extra_keys}
        splits[name] = Split(inputs, labels, extra)
    return Dataset(header["task"], header["spec"], gt, splits["train"], splits["test"])
