"""Gradients of an ILP solution with respect to cost, constraint matrix and bias.

The forward pass runs the exact solver.  The backward pass splits the incoming
gradient ``dy`` into integer directions ``Delta_k`` with weights ``lambda_k``,
looks at the neighbour ``y - Delta_k`` for each direction, and differentiates
a distance-based mismatch function that is zero once the neighbour would be
the solver's answer.  Gradients from all directions are combined linearly.

Sign convention: a gradient step ``x <- x - lr * dx`` on the returned triple
moves the solution from ``y`` towards ``y - dy``; the neighbours are therefore
``y - Delta_k``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .ilp_solver import IlpInstance, LatticeEnumerator, SolveStatus, solve_ilp
from .lattice import Lattice

NORM_EPS = 1e-8
ZERO_TOL = 1e-12
NEIGHBOUR_FEAS_TOL = 1e-9


class BasisMode(str, enum.Enum):
    DELTA = "delta"
    CANONICAL = "canonical"


@dataclass(frozen=True)
class BackwardConfig:
    """``temperature=None`` selects the hard minimum."""

    temperature: float | None = 0.5
    basis: BasisMode = BasisMode.DELTA

    def __post_init__(self):
        object.__setattr__(self, "basis", BasisMode(self.basis))
        if self.temperature is not None and not self.temperature > 0:
            raise ValueError("temperature must be positive or None (hard minimum)")


@dataclass
class BasisDecomposition:
    deltas: np.ndarray  # (l, n) entries in {-1, 0, 1}
    lambdas: np.ndarray  # (l,) non-negative
    order: np.ndarray  # coordinate indices by decreasing |dy|

    def reconstruct(self) -> np.ndarray:
        return self.lambdas @ self.deltas


@dataclass
class GradientTriple:
    dA: np.ndarray
    db: np.ndarray
    dc: np.ndarray


def decompose(dy, basis: BasisMode | str = BasisMode.DELTA) -> BasisDecomposition:
    """Write ``dy = sum_k lambda_k Delta_k`` with ``lambda_k >= 0``.

    Delta basis: ``Delta_k`` is the signed indicator of the ``k`` largest
    ``|dy_i|`` and ``lambda_k = |dy_(k)| - |dy_(k+1)|``.  Canonical basis:
    ``Delta_k = sign(dy_i) e_i`` with ``lambda_k = |dy_i|``.  Coordinates with
    ``|dy_i| <= 1e-12`` are dropped.
    """
    dy = np.asarray(dy, dtype=float).reshape(-1)
    n = dy.size
    mag = np.abs(dy)
    if BasisMode(basis) == BasisMode.CANONICAL:
        order = np.flatnonzero(mag > ZERO_TOL)
        deltas = np.zeros((order.size, n), dtype=np.int64)
        deltas[np.arange(order.size), order] = np.sign(dy[order]).astype(np.int64)
        return BasisDecomposition(deltas, mag[order], order)

    order = np.argsort(-mag, kind="stable")
    ell = int(np.count_nonzero(mag > ZERO_TOL))
    order = order[:ell]
    sorted_mag = mag[order]
    lambdas = sorted_mag - np.append(sorted_mag[1:], 0.0)
    signs = np.sign(dy[order]).astype(np.int64)
    deltas = np.zeros((ell, n), dtype=np.int64)
    for k in range(ell):
        deltas[k:, order[k]] = signs[k]
    return BasisDecomposition(deltas, lambdas, order)


def hyperplane_distance(a, b, y) -> float:
    """``|a.y - b| / ||a||``; zero for a degenerate normal."""
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a)
    if norm <= NORM_EPS:
        return 0.0
    return abs(float(a @ np.asarray(y, dtype=float)) - b) / norm


def hyperplane_distance_grad(a, b, y):
    """Distance and its gradients with respect to ``(a, b, y)``."""
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    norm = np.linalg.norm(a)
    if norm <= NORM_EPS:
        return 0.0, np.zeros_like(a), 0.0, np.zeros_like(y)
    s = float(a @ y) - b
    sign = np.sign(s)
    da = sign * y / norm - abs(s) * a / norm**3
    return abs(s) / norm, da, -sign / norm, sign * a / norm


def softmin(x, temperature: float) -> float:
    """``-tau * log(sum_k exp(-x_k / tau))``, stabilised around ``min(x)``."""
    x = np.asarray(x, dtype=float)
    lo = x.min()
    return float(lo - temperature * np.log(np.exp(-(x - lo) / temperature).sum()))


def min_weights(x, temperature: float | None) -> np.ndarray:
    """Gradient of the (soft) minimum with respect to ``x``.

    Softmax of ``-x / tau``; for the hard minimum the weight is split evenly
    among the minimisers.
    """
    x = np.asarray(x, dtype=float)
    if temperature is None:
        hit = x <= x.min() + ZERO_TOL
        return hit / hit.sum()
    w = np.exp(-(x - x.min()) / temperature)
    return w / w.sum()


def _soft_or_hard_min(x, temperature):
    return float(np.min(x)) if temperature is None else softmin(x, temperature)


def _distances(A, b, y):
    """Per-row distances, signed residuals and guarded norms."""
    norms = np.linalg.norm(A, axis=1)
    ok = norms > NORM_EPS
    s = A @ y - b
    safe = np.where(ok, norms, 1.0)
    return np.where(ok, np.abs(s) / safe, 0.0), s, safe, ok


def constraint_mismatch(A, b, y, y_prime, in_box: bool = True, temperature: float | None = None):
    """Mismatch ``P`` for one neighbour and its gradients ``(P, dA, db)``.

    * neighbour feasible and distinct: (soft) minimum of row distances at ``y``;
    * neighbour infeasible: sum of distances of the violated rows at ``y_prime``;
    * neighbour equal to ``y`` or outside the box: zero.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    y = np.asarray(y, dtype=float)
    y_prime = np.asarray(y_prime, dtype=float)
    dA = np.zeros_like(A)
    db = np.zeros_like(b)
    if not in_box or np.array_equal(y, y_prime) or A.shape[0] == 0:
        return 0.0, dA, db

    violated = A @ y_prime > b + NEIGHBOUR_FEAS_TOL
    if violated.any():
        total = 0.0
        for j in np.flatnonzero(violated):
            d, ga, gb, _ = hyperplane_distance_grad(A[j], b[j], y_prime)
            total += d
            dA[j] = ga
            db[j] = gb
        return total, dA, db

    dist = np.array([hyperplane_distance(A[j], b[j], y) for j in range(A.shape[0])])
    w = min_weights(dist, temperature)
    for j in range(A.shape[0]):
        _, ga, gb, _ = hyperplane_distance_grad(A[j], b[j], y)
        dA[j] = w[j] * ga
        db[j] = w[j] * gb
    return _soft_or_hard_min(dist, temperature), dA, db


def cost_mismatch(c, step, feasible: bool, in_box: bool = True):
    """``c . step`` when the neighbour ``y + step`` is feasible and in the box."""
    c = np.asarray(c, dtype=float)
    step = np.asarray(step, dtype=float)
    if feasible and in_box:
        return float(c @ step), step.copy()
    return 0.0, np.zeros_like(c)


def backward(A, b, c, y, dy, lattice: Lattice, config: BackwardConfig = BackwardConfig()):
    """Gradient triple for a single solved instance.

    ``A, b, c, y, dy`` are expressed in the frame of ``lattice``; neighbours
    are taken one lattice step away from ``y``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    y = np.asarray(y, dtype=float)
    out = GradientTriple(np.zeros_like(A), np.zeros_like(b), np.zeros_like(c))
    dec = decompose(dy, config.basis)
    keep = dec.lambdas > 0
    if not keep.any():
        return out
    lambdas = dec.lambdas[keep]
    steps = -dec.deltas[keep]

    y_int = lattice.from_frame(y)
    neighbours = y_int + steps
    in_box = lattice.contains(neighbours)
    if not in_box.any():
        return out
    lambdas, steps, neighbours = lambdas[in_box], steps[in_box], neighbours[in_box]
    z_prime = lattice.to_frame(neighbours)

    m = A.shape[0]
    if m:
        resid_prime = z_prime @ A.T - b
        violated = resid_prime > NEIGHBOUR_FEAS_TOL
        feasible = ~violated.any(axis=1)
    else:
        feasible = np.ones(len(lambdas), dtype=bool)

    out.dc = lambdas[feasible] @ steps[feasible].astype(float)
    if m == 0:
        return out

    norms = np.linalg.norm(A, axis=1)
    ok = norms > NORM_EPS
    safe = np.where(ok, norms, 1.0)

    # violated rows, distances measured at the neighbour
    W = lambdas[:, None] * (violated & ~feasible[:, None] & ok)
    if W.any():
        out.dA += (W.T @ z_prime) / safe[:, None]
        out.dA -= ((W * resid_prime).sum(axis=0) / safe**3)[:, None] * A
        out.db -= W.sum(axis=0) / safe

    # feasible neighbours share the (soft) minimum distance at y
    weight = lambdas[feasible].sum()
    if weight > 0:
        s = A @ y - b
        dist = np.where(ok, np.abs(s) / safe, 0.0)
        w = min_weights(dist, config.temperature) * ok
        sign = np.sign(s)
        grad_a = (sign / safe)[:, None] * y - (np.abs(s) / safe**3)[:, None] * A
        out.dA += weight * w[:, None] * grad_a
        out.db += weight * w * (-sign / safe)
    return out


def backward_reference(A, b, c, y, dy, lattice: Lattice, config: BackwardConfig = BackwardConfig()):
    """Loop over basis directions one by one; slow, used to cross-check :func:`backward`."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    y = np.asarray(y, dtype=float)
    out = GradientTriple(np.zeros_like(A), np.zeros_like(b), np.zeros_like(c))
    dec = decompose(dy, config.basis)
    y_int = lattice.from_frame(y)
    for lam, delta in zip(dec.lambdas, dec.deltas):
        step = -delta
        nb = y_int + step
        inside = bool(lattice.contains(nb))
        z_prime = lattice.to_frame(nb)
        _, dA_k, db_k = constraint_mismatch(A, b, y, z_prime, inside, config.temperature)
        feasible = A.shape[0] == 0 or bool(np.all(A @ z_prime <= b + NEIGHBOUR_FEAS_TOL))
        _, dc_k = cost_mismatch(c, step, feasible, inside)
        out.dA += lam * dA_k
        out.db += lam * db_k
        out.dc += lam * dc_k
    return out


@dataclass
class SolvedBatch:
    """Saved context of a forward pass, consumed by :meth:`CombOptNetLayer.backward`."""

    A: np.ndarray
    b: np.ndarray
    costs: np.ndarray
    y: np.ndarray  # frame coordinates
    statuses: list = field(default_factory=list)


class CombOptNetLayer:
    """Batched forward solve plus backward pass for a fixed lattice.

    ``A`` and ``b`` may be shared by the batch (2-d / 1-d) or given per
    instance (3-d / 2-d).  Small boxes are solved by enumeration, larger ones
    by branch-and-bound.
    """

    def __init__(self, lattice: Lattice, config: BackwardConfig = BackwardConfig(),
                 enumeration_limit: int = 1 << 17):
        self.lattice = lattice
        self.config = config
        self._enum = LatticeEnumerator(lattice.low, lattice.high) if lattice.size <= enumeration_limit else None

    def solve(self, A, b, costs):
        """Return frame solutions ``(B, n)`` and per-instance statuses."""
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        costs = np.atleast_2d(np.asarray(costs, dtype=float))
        if A.ndim == 2:
            return self._solve_shared(A, b, costs)
        if self._enum is not None:
            A_int = A / self.lattice.scale
            b_int = b + A @ (self.lattice.center / self.lattice.scale)
            y_int, statuses = self._enum.solve_each(A_int, b_int, self.lattice.cost_to_integer(costs))
            return self.lattice.to_frame(y_int), statuses
        ys, statuses = [], []
        for Ai, bi, ci in zip(A, b, costs):
            y, st = self._solve_shared(Ai, bi, ci[None])
            ys.append(y[0])
            statuses.extend(st)
        return np.array(ys), statuses

    def _solve_shared(self, A, b, costs):
        A_int, b_int = self.lattice.constraints_to_integer(A, b)
        c_int = self.lattice.cost_to_integer(costs)
        if self._enum is not None:
            y_int, statuses = self._enum.solve(A_int, b_int, c_int)
        else:
            y_int = np.empty((len(c_int), self.lattice.n), dtype=np.int64)
            statuses = []
            for i, c in enumerate(c_int):
                res = solve_ilp(IlpInstance(c, A_int, b_int, self.lattice.low, self.lattice.high))
                y_int[i] = res.solution
                statuses.append(res.status)
        return self.lattice.to_frame(y_int), statuses

    def forward(self, A, b, costs) -> SolvedBatch:
        y, statuses = self.solve(A, b, costs)
        return SolvedBatch(np.asarray(A, dtype=float), np.asarray(b, dtype=float),
                           np.atleast_2d(np.asarray(costs, dtype=float)), y, statuses)

    def backward(self, ctx: SolvedBatch, dy) -> GradientTriple:
        """Per-instance gradients stacked along the batch axis (``dA`` is ``(B, m, n)``)."""
        dy = np.atleast_2d(np.asarray(dy, dtype=float))
        shared = ctx.A.ndim == 2
        dAs, dbs, dcs = [], [], []
        for i in range(len(ctx.y)):
            A = ctx.A if shared else ctx.A[i]
            b = ctx.b if shared else ctx.b[i]
            g = backward(A, b, ctx.costs[i], ctx.y[i], dy[i], self.lattice, self.config)
            dAs.append(g.dA)
            dbs.append(g.db)
            dcs.append(g.dc)
        return GradientTriple(np.array(dAs), np.array(dbs), np.array(dcs))


def count_fallbacks(statuses) -> int:
    return sum(1 for s in statuses if s == SolveStatus.INFEASIBLE_FALLBACK)
