"""Exact solver for bounded integer linear programs.

Solves ``min c.y  s.t.  A y <= b,  y in Y`` where ``Y`` is an integer box.
Three routes share one contract:

* :func:`solve_ilp` -- best-bound branch-and-bound over a bounded-variable
  simplex relaxation.
* :func:`solve_brute_force` -- full lattice enumeration (verification oracle).
* :class:`LatticeEnumerator` -- vectorised enumeration for many instances that
  share a small box; used by the training loops.

Ties between optimal points are broken towards the lexicographically smallest
vector.  When no lattice point is feasible, all routes return the box point of
minimal normalised violation (ties by cost, then lexicographic) with status
``INFEASIBLE_FALLBACK``.
"""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass, field

import numba
import numpy as np

INTEGRALITY_TOL = 1e-6
FEASIBILITY_TOL = 1e-7
PIVOT_TOL = 1e-9
NORM_EPS = 1e-8
BRUTE_FORCE_LIMIT = 10**7
_DEGENERATE_SWITCH = 50
_CHUNK = 1 << 16


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE_FALLBACK = "infeasible_fallback"


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class IlpInstance:
    """A bounded ILP.  ``sense`` holds one of ``"<="`` / ``">="`` per row."""

    cost: np.ndarray
    constraint_matrix: np.ndarray
    bias: np.ndarray
    box_low: np.ndarray
    box_high: np.ndarray
    sense: tuple = ()

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float).reshape(-1)
        n = self.cost.size
        if n < 1:
            raise ValueError("instance needs at least one variable")
        A = np.asarray(self.constraint_matrix, dtype=float)
        self.constraint_matrix = A.reshape(-1, n) if A.size else np.zeros((0, n))
        self.bias = np.asarray(self.bias, dtype=float).reshape(-1)
        m = self.constraint_matrix.shape[0]
        if self.bias.size != m:
            raise ValueError(f"bias has length {self.bias.size}, expected {m}")
        self.box_low = _as_int_vector(self.box_low, n, "box_low")
        self.box_high = _as_int_vector(self.box_high, n, "box_high")
        if np.any(self.box_low > self.box_high):
            raise ValueError("empty box: box_low exceeds box_high")
        if not self.sense:
            self.sense = ("<=",) * m
        self.sense = tuple(self.sense)
        if len(self.sense) != m or any(s not in ("<=", ">=") for s in self.sense):
            raise ValueError("sense must hold '<=' or '>=' for every row")
        for name in ("cost", "constraint_matrix", "bias"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains NaN or infinite entries")

    @property
    def n(self) -> int:
        return self.cost.size

    @property
    def m(self) -> int:
        return self.bias.size

    @property
    def lattice_size(self) -> int:
        return int(np.prod((self.box_high - self.box_low + 1).astype(object)))

    def as_leq(self) -> tuple[np.ndarray, np.ndarray]:
        """Constraint rows with every ``>=`` row negated into ``<=`` form."""
        flip = np.array([-1.0 if s == ">=" else 1.0 for s in self.sense])
        return self.constraint_matrix * flip[:, None], self.bias * flip


def _as_int_vector(values, n, name):
    arr = np.asarray(values)
    if arr.ndim == 0:
        arr = np.full(n, arr)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have length {n}")
    if not np.all(np.isfinite(arr.astype(float))):
        raise ValueError(f"{name} must be finite")
    if np.any(arr != np.round(arr)):
        raise ValueError(f"{name} must be integral")
    return arr.astype(np.int64)


@dataclass
class SolveResult:
    solution: np.ndarray
    objective: float
    status: SolveStatus
    nodes_explored: int = 0


@dataclass
class LpSolution:
    point: np.ndarray
    objective: float
    status: LpStatus
    # smallest |reduced cost| over movable nonbasic columns; > 0 means unique optimum
    min_reduced_cost: float = field(default=0.0, repr=False)


def _tie_window(z: float) -> float:
    return z + 1e-9 * max(1.0, abs(z))


def _improves(bound: float, best: float) -> bool:
    return best == np.inf or bound < best - 1e-9 * max(1.0, abs(best))


def _row_norms(A: np.ndarray) -> np.ndarray:
    return np.maximum(np.linalg.norm(A, axis=1), NORM_EPS)


# ---------------------------------------------------------------------------
# Simplex
# ---------------------------------------------------------------------------


_OPTIMAL, _INFEASIBLE, _UNBOUNDED = 0, 1, 2
_LP_STATUS = {_OPTIMAL: LpStatus.OPTIMAL, _INFEASIBLE: LpStatus.INFEASIBLE, _UNBOUNDED: LpStatus.UNBOUNDED}


def _bounded_simplex(c, A, b, lo, hi):
    """Two-phase primal simplex for ``min c.x, A x <= b, lo <= x <= hi``.

    Returns ``(status, x, objective, min_reduced_cost)``.
    """
    A = np.ascontiguousarray(A, dtype=np.float64).reshape(-1, c.size)
    status, x, obj, min_rc = _simplex_kernel(
        np.ascontiguousarray(c, dtype=np.float64),
        A,
        np.ascontiguousarray(b, dtype=np.float64),
        np.ascontiguousarray(lo, dtype=np.float64),
        np.ascontiguousarray(hi, dtype=np.float64),
    )
    if status != _OPTIMAL:
        return _LP_STATUS[status], None, (np.inf if status == _INFEASIBLE else -np.inf), 0.0
    return LpStatus.OPTIMAL, x, obj, min_rc


@numba.njit(cache=True)
def _simplex_kernel(c, A, b, lo, hi):
    # Bounds are implicit: nonbasic columns sit at a bound, so the tableau has
    # one row per constraint.  Columns: structurals, slacks, artificials.
    m, n = A.shape
    x_n = np.where(c < 0, hi, lo)
    resid = b - A @ x_n
    k = 0
    for r in range(m):
        if resid[r] < 0:
            k += 1
    ncol = n + m + k
    T = np.zeros((m, ncol))
    lower = np.zeros(ncol)
    upper = np.full(ncol, np.inf)
    value = np.zeros(ncol)
    basis = np.empty(m, dtype=np.int64)
    is_basic = np.zeros(ncol, dtype=np.bool_)
    lower[:n] = lo
    upper[:n] = hi
    value[:n] = x_n
    t = 0
    for r in range(m):
        sign = 1.0
        if resid[r] < 0:
            sign = -1.0
            T[r, n + m + t] = 1.0
            basis[r] = n + m + t
            t += 1
        else:
            basis[r] = n + r
        for j in range(n):
            T[r, j] = sign * A[r, j]
        T[r, n + r] = sign
        value[basis[r]] = abs(resid[r])
        is_basic[basis[r]] = True

    if k > 0:
        phase1 = np.zeros(ncol)
        phase1[n + m :] = 1.0
        _simplex_iterate(T, phase1, lower, upper, value, basis, is_basic)
        if value[n + m :].sum() > 1e-7:
            return _INFEASIBLE, value[:n].copy(), np.inf, 0.0
        for j in range(n + m, ncol):
            upper[j] = 0.0
            if value[j] > 0.0:
                value[j] = 0.0

    cost = np.zeros(ncol)
    cost[:n] = c
    if _simplex_iterate(T, cost, lower, upper, value, basis, is_basic) == _UNBOUNDED:
        return _UNBOUNDED, value[:n].copy(), -np.inf, 0.0
    x = value[:n].copy()
    d = cost - cost[basis] @ T
    min_rc = np.inf
    for j in range(ncol):
        if not is_basic[j] and upper[j] > lower[j]:
            min_rc = min(min_rc, abs(d[j]))
    return _OPTIMAL, x, float(c @ x), min_rc


@numba.njit(cache=True)
def _simplex_iterate(T, cost, lower, upper, value, basis, is_basic):
    """Pivot until optimal.  Dantzig pricing; Bland's rule after a degenerate run."""
    m, ncol = T.shape
    degenerate_run = 0
    while True:
        d = cost - cost[basis] @ T
        j = -1
        best = 0.0
        bland = degenerate_run >= _DEGENERATE_SWITCH
        for q in range(ncol):
            if is_basic[q] or upper[q] <= lower[q]:
                continue
            at_upper = value[q] >= upper[q] - PIVOT_TOL
            gain = -d[q] if not at_upper else d[q]
            if gain > PIVOT_TOL and gain > best:
                j = q
                best = gain
                if bland:
                    break
        if j < 0:
            return _OPTIMAL
        direction = -1.0 if value[j] >= upper[j] - PIVOT_TOL else 1.0

        row_theta = np.inf
        r = -1
        for i in range(m):
            a = T[i, j] * direction
            bi = basis[i]
            if a > PIVOT_TOL:
                ratio = max((value[bi] - lower[bi]) / a, 0.0)
            elif a < -PIVOT_TOL and upper[bi] < np.inf:
                ratio = max((upper[bi] - value[bi]) / -a, 0.0)
            else:
                continue
            if ratio < row_theta - PIVOT_TOL or (
                ratio <= row_theta + PIVOT_TOL and r >= 0 and bi < basis[r]
            ):
                if ratio < row_theta:
                    row_theta = ratio
                r = i
        flip = upper[j] - lower[j]
        theta = min(flip, row_theta)
        if theta == np.inf:
            return _UNBOUNDED
        degenerate_run = degenerate_run + 1 if theta <= PIVOT_TOL else 0

        for i in range(m):
            value[basis[i]] -= theta * direction * T[i, j]
        if flip <= row_theta:
            value[j] = upper[j] if direction > 0 else lower[j]
            continue
        value[j] += direction * theta
        leaving = basis[r]
        value[leaving] = lower[leaving] if T[r, j] * direction > 0 else upper[leaving]
        piv = T[r, j]
        for q in range(ncol):
            T[r, q] /= piv
        for i in range(m):
            if i != r:
                f = T[i, j]
                if f != 0.0:
                    for q in range(ncol):
                        T[i, q] -= f * T[r, q]
        basis[r] = j
        is_basic[leaving] = False
        is_basic[j] = True


def solve_lp_relaxation(instance: IlpInstance) -> LpSolution:
    """LP relaxation with the box bounds kept as variable bounds."""
    A, b = instance.as_leq()
    return _lp(instance.cost, A, b, instance.box_low, instance.box_high)


def _lp(c, A, b, lo, hi) -> LpSolution:
    status, x, obj, min_rc = _bounded_simplex(c, A, b, lo, hi)
    return LpSolution(point=x, objective=obj, status=status, min_reduced_cost=min_rc)


# ---------------------------------------------------------------------------
# Branch and bound
# ---------------------------------------------------------------------------


def _branch_and_bound(c, A, b, lo, hi, n_int, value_only=False):
    """Best-bound B&B; variables ``[:n_int]`` are integer, the rest continuous.

    Returns ``(x, objective, nodes)`` with ``x = None`` when infeasible.  With
    ``value_only`` the search stops at the optimal value without resolving ties.
    """
    b_relaxed = b + FEASIBILITY_TOL
    best_obj = np.inf
    candidates: list[tuple[float, np.ndarray]] = []
    answer = None  # lexicographically smallest candidate inside the tie window
    heap = [(-np.inf, 0, lo.astype(float), hi.astype(float))]
    counter = itertools.count(1)
    nodes = 0

    def refresh_answer():
        window = _tie_window(best_obj)
        inside = [(tuple(x[:n_int]), obj, x) for obj, x in candidates if obj <= window]
        return min(inside, key=lambda t: t[0]) if inside else None

    while heap:
        bound, _, nlo, nhi = heapq.heappop(heap)
        if value_only:
            if not _improves(bound, best_obj):
                continue
        elif bound > _tie_window(best_obj):
            continue
        if answer is not None and not value_only and bound >= answer[1] - (
            _tie_window(answer[1]) - answer[1]
        ):
            if tuple(nlo[:n_int]) >= answer[0]:
                continue
        nodes += 1
        status, x, obj, min_rc = _bounded_simplex(c, A, b_relaxed, nlo, nhi)
        if status != LpStatus.OPTIMAL:
            continue
        if value_only:
            if not _improves(obj, best_obj):
                continue
        elif obj > _tie_window(best_obj):
            continue

        xi = x[:n_int]
        frac = np.abs(xi - np.round(xi))
        if np.all(frac <= INTEGRALITY_TOL):
            point = x.copy()
            point[:n_int] = np.round(xi)
            if np.any(A @ point > b_relaxed) and n_int == x.size:
                continue
            true_obj = float(c @ point)
            if true_obj < best_obj:
                best_obj = true_obj
            candidates.append((true_obj, point))
            answer = refresh_answer()
            if value_only or min_rc > PIVOT_TOL:
                continue
            # degenerate optimum: look for lexicographically smaller ties
            movable = np.flatnonzero(nlo[:n_int] < point[:n_int])
            if movable.size == 0:
                continue
            i = movable[0]
            left_hi = nhi.copy()
            left_hi[i] = point[i] - 1
            fixed_lo = nlo.copy()
            fixed_hi = nhi.copy()
            fixed_lo[i] = fixed_hi[i] = point[i]
            heapq.heappush(heap, (obj, next(counter), nlo.copy(), left_hi))
            heapq.heappush(heap, (obj, next(counter), fixed_lo, fixed_hi))
            continue

        f = xi - np.floor(xi)
        score = np.minimum(f, 1.0 - f)
        i = int(np.argmax(score))
        down_hi = nhi.copy()
        down_hi[i] = np.floor(xi[i])
        up_lo = nlo.copy()
        up_lo[i] = np.ceil(xi[i])
        heapq.heappush(heap, (obj, next(counter), nlo.copy(), down_hi))
        heapq.heappush(heap, (obj, next(counter), up_lo, nhi.copy()))

    if value_only:
        if not candidates:
            return None, np.inf, nodes
        return None, best_obj, nodes
    if answer is None:
        return None, np.inf, nodes
    return answer[2], answer[1], nodes


def solve_ilp(instance: IlpInstance) -> SolveResult:
    """Exact ILP solve by branch-and-bound with lexicographic tie-breaking."""
    A, b = instance.as_leq()
    c = instance.cost
    lo, hi = instance.box_low, instance.box_high
    x, obj, nodes = _branch_and_bound(c, A, b, lo, hi, instance.n)
    if x is not None:
        return SolveResult(_to_int(x), obj, SolveStatus.OPTIMAL, nodes)
    y, obj, extra = _fallback_bnb(c, A, b, lo, hi)
    return SolveResult(y, obj, SolveStatus.INFEASIBLE_FALLBACK, nodes + extra)


def _to_int(x):
    return np.round(x).astype(np.int64)


def _fallback_bnb(c, A, b, lo, hi):
    """Minimise total normalised violation, then cost, then lexicographic order."""
    n, m = c.size, b.size
    norms = _row_norms(A)
    An = A / norms[:, None]
    bn = b / norms
    worst = np.maximum(An, 0) @ hi + np.minimum(An, 0) @ lo - bn
    s_hi = np.maximum(worst, 0.0)
    # rows: An y - s <= bn
    A1 = np.hstack([An, -np.eye(m)])
    lo1 = np.concatenate([lo, np.zeros(m)])
    hi1 = np.concatenate([hi, s_hi])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    _, v_star, nodes1 = _branch_and_bound(c1, A1, bn, lo1, hi1, n, value_only=True)
    limit = _tie_window(v_star) - FEASIBILITY_TOL
    A2 = np.vstack([A1, np.concatenate([np.zeros(n), np.ones(m)])])
    b2 = np.concatenate([bn, [limit]])
    c2 = np.concatenate([c, np.zeros(m)])
    x, obj, nodes2 = _branch_and_bound(c2, A2, b2, lo1, hi1, n)
    y = _to_int(x[:n])
    return y, float(c @ y), nodes1 + nodes2


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def lattice_points(low, high, start=0, stop=None) -> np.ndarray:
    """Box lattice points in lexicographic order, rows ``start:stop``."""
    low = np.asarray(low, dtype=np.int64)
    dims = tuple(int(d) for d in np.asarray(high) - low + 1)
    total = int(np.prod(dims, dtype=object))
    stop = total if stop is None else min(stop, total)
    idx = np.unravel_index(np.arange(start, stop), dims)
    return np.stack(idx, axis=1) + low


def _violation(points, A, b, norms):
    if A.shape[0] == 0:
        return np.zeros(points.shape[0])
    return (np.maximum(points @ A.T - b, 0.0) / norms).sum(axis=1)


def solve_brute_force(instance: IlpInstance) -> SolveResult:
    """Oracle: enumerate every lattice point of the box."""
    total = instance.lattice_size
    if total > BRUTE_FORCE_LIMIT:
        raise ValueError(f"box has {total} lattice points, limit is {BRUTE_FORCE_LIMIT}")
    A, b = instance.as_leq()
    c = instance.cost
    lo, hi = instance.box_low, instance.box_high
    norms = _row_norms(A)

    def chunks():
        for start in range(0, total, _CHUNK):
            yield lattice_points(lo, hi, start, start + _CHUNK)

    def feasible(P):
        if A.shape[0] == 0:
            return np.ones(P.shape[0], dtype=bool)
        return np.all(P @ A.T <= b + FEASIBILITY_TOL, axis=1)

    any_feasible = False
    z_star = np.inf
    v_star = np.inf
    for P in chunks():
        mask = feasible(P)
        if mask.any():
            any_feasible = True
            z_star = min(z_star, float((P[mask] @ c).min()))
        elif not any_feasible:
            v_star = min(v_star, float(_violation(P, A, b, norms).min()))

    if any_feasible:
        window = _tie_window(z_star)
        for P in chunks():
            ok = feasible(P) & (P @ c <= window)
            if ok.any():
                y = P[np.argmax(ok)]
                return SolveResult(y, float(c @ y), SolveStatus.OPTIMAL, total)

    v_window = _tie_window(v_star)
    z_star = np.inf
    for P in chunks():
        ok = _violation(P, A, b, norms) <= v_window
        if ok.any():
            z_star = min(z_star, float((P[ok] @ c).min()))
    window = _tie_window(z_star)
    for P in chunks():
        ok = (_violation(P, A, b, norms) <= v_window) & (P @ c <= window)
        if ok.any():
            y = P[np.argmax(ok)]
            return SolveResult(y, float(c @ y), SolveStatus.INFEASIBLE_FALLBACK, total)
    raise AssertionError("unreachable: the box is non-empty")


class LatticeEnumerator:
    """Batch enumeration solver for a fixed, small box.

    All instances passed to :meth:`solve` share the constraint rows, so the
    feasibility mask is computed once per call.  Semantics are identical to
    :func:`solve_brute_force`.
    """

    def __init__(self, low, high, max_points: int = 1 << 17):
        low = np.asarray(low, dtype=np.int64)
        high = np.asarray(high, dtype=np.int64)
        size = int(np.prod(high - low + 1, dtype=object))
        if size > max_points:
            raise ValueError(f"box has {size} lattice points, enumerator limit is {max_points}")
        self.low, self.high = low, high
        self.points = lattice_points(low, high)
        self._fpoints = self.points.astype(float)

    def solve(self, A, b, costs, sense=None, chunk: int = 64):
        """Solve ``min costs[i].y s.t. A y <= b`` for every row of ``costs``.

        Returns ``(solutions, statuses)`` with solutions of shape ``(B, n)``.
        """
        A = np.asarray(A, dtype=float).reshape(-1, self.points.shape[1])
        b = np.asarray(b, dtype=float).reshape(-1)
        if sense is not None:
            flip = np.array([-1.0 if s == ">=" else 1.0 for s in sense])
            A, b = A * flip[:, None], b * flip
        costs = np.atleast_2d(np.asarray(costs, dtype=float))
        P = self._fpoints
        if A.shape[0]:
            feasible = np.all(P @ A.T <= b + FEASIBILITY_TOL, axis=1)
        else:
            feasible = np.ones(P.shape[0], dtype=bool)
        if feasible.any():
            status = SolveStatus.OPTIMAL
            pool = np.flatnonzero(feasible)
        else:
            status = SolveStatus.INFEASIBLE_FALLBACK
            viol = _violation(P, A, b, _row_norms(A))
            pool = np.flatnonzero(viol <= _tie_window(float(viol.min())))
        sub = P[pool]
        out = np.empty((costs.shape[0], P.shape[1]), dtype=np.int64)
        for start in range(0, costs.shape[0], chunk):
            obj = costs[start : start + chunk] @ sub.T
            zmin = obj.min(axis=1, keepdims=True)
            window = zmin + 1e-9 * np.maximum(1.0, np.abs(zmin))
            pick = np.argmax(obj <= window, axis=1)
            out[start : start + chunk] = self.points[pool[pick]]
        return out, [status] * costs.shape[0]

    def solve_each(self, A, b, costs):
        """Like :meth:`solve` but with constraint rows per instance.

        ``A`` is ``(B, m, n)``, ``b`` is ``(B, m)``; only ``<=`` rows.
        """
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        costs = np.atleast_2d(np.asarray(costs, dtype=float))
        P = self._fpoints
        feasible = np.all(np.einsum("pn,bmn->bpm", P, A) <= b[:, None, :] + FEASIBILITY_TOL, axis=2)
        obj = np.where(feasible, costs @ P.T, np.inf)
        zmin = obj.min(axis=1, keepdims=True)
        window = zmin + 1e-9 * np.maximum(1.0, np.abs(zmin))
        out = self.points[np.argmax(obj <= window, axis=1)].copy()
        statuses = [SolveStatus.OPTIMAL] * len(costs)
        for i in np.flatnonzero(~feasible.any(axis=1)):
            y, st = self.solve(A[i], b[i], costs[i : i + 1])
            out[i] = y[0]
            statuses[i] = st[0]
        return out, statuses
