import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ilplayer.comboptnet import (
    BackwardConfig,
    BasisMode,
    CombOptNetLayer,
    backward,
    backward_reference,
    constraint_mismatch,
    cost_mismatch,
    decompose,
    hyperplane_distance,
    hyperplane_distance_grad,
    min_weights,
    softmin,
)
from ilplayer.ilp_solver import IlpInstance, SolveStatus, solve_ilp
from ilplayer.lattice import Lattice

BINARY2 = Lattice.identity([0, 0], [1, 1])


def solve2(A, b, c):
    return solve_ilp(IlpInstance(c, A, b, [0, 0], [1, 1])).solution


class TestDecompose:
    def test_worked_example(self):
        dec = decompose([0.3, -0.5])
        assert dec.order.tolist() == [1, 0]
        assert dec.deltas.tolist() == [[0, -1], [1, -1]]
        np.testing.assert_allclose(dec.lambdas, [0.2, 0.3])
        np.testing.assert_allclose(dec.reconstruct(), [0.3, -0.5], atol=1e-15)

    def test_canonical_example(self):
        dec = decompose([0.3, -0.5], BasisMode.CANONICAL)
        assert dec.deltas.tolist() == [[1, 0], [0, -1]]
        np.testing.assert_allclose(dec.lambdas, [0.3, 0.5])

    def test_zero_is_empty(self):
        dec = decompose(np.zeros(4))
        assert dec.deltas.shape == (0, 4) and dec.lambdas.size == 0

    def test_unit_vector(self):
        dec = decompose([1.0, 0.0, 0.0])
        assert dec.deltas.tolist() == [[1, 0, 0]]
        assert dec.lambdas.tolist() == [1.0]

    def test_ties_use_index_order(self):
        dec = decompose([0.5, -0.5, 0.5])
        assert dec.order.tolist() == [0, 1, 2]
        np.testing.assert_allclose(dec.lambdas, [0, 0, 0.5])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from([0.0, 0.5, -0.5, 1e-13]) | st.floats(-10, 10), min_size=1, max_size=32))
    def test_reconstruction_property(self, values):
        dy = np.array(values)
        dy[np.abs(dy) <= 1e-12] = 0.0
        for basis in BasisMode:
            dec = decompose(dy, basis)
            assert np.max(np.abs(dec.reconstruct() - dy), initial=0.0) < 1e-9
            assert np.all(dec.lambdas >= 0)
            assert set(np.unique(dec.deltas)).issubset({-1, 0, 1})
            if len(dec.deltas):
                assert np.linalg.matrix_rank(dec.deltas) == len(dec.deltas)
            if basis == BasisMode.DELTA:
                assert np.all(np.diff(np.abs(dy[dec.order])) <= 0)


class TestDistance:
    def test_examples(self):
        assert hyperplane_distance([1, 0], 0, [2, 0]) == 2
        assert hyperplane_distance([3, 4], 5, [0, 0]) == 1
        assert hyperplane_distance([1, 1], 1, [0.5, 0.5]) == 0

    def test_degenerate_normal(self):
        d, da, db, dy = hyperplane_distance_grad([0.0, 0.0], 1.0, [1.0, 2.0])
        assert d == 0 and db == 0 and not da.any() and not dy.any()

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a, y = rng.standard_normal(3), rng.standard_normal(3)
            b = float(rng.standard_normal())
            _, da, db, dy = hyperplane_distance_grad(a, b, y)
            h = 1e-6
            for i in range(3):
                e = np.eye(3)[i] * h
                fd_a = (hyperplane_distance(a + e, b, y) - hyperplane_distance(a - e, b, y)) / (2 * h)
                fd_y = (hyperplane_distance(a, b, y + e) - hyperplane_distance(a, b, y - e)) / (2 * h)
                assert fd_a == pytest.approx(da[i], rel=1e-4, abs=1e-8)
                assert fd_y == pytest.approx(dy[i], rel=1e-4, abs=1e-8)
            fd_b = (hyperplane_distance(a, b + h, y) - hyperplane_distance(a, b - h, y)) / (2 * h)
            assert fd_b == pytest.approx(db, rel=1e-4)


class TestSoftmin:
    def test_single_element(self):
        assert softmin([0.7], 0.5) == 0.7

    def test_two_zeros(self):
        assert softmin([0.0, 0.0], 0.5) == pytest.approx(-0.5 * np.log(2), abs=1e-12)

    def test_stable_for_large_inputs(self):
        assert np.isfinite(softmin([1e4, 1e4 + 1], 1e-3))

    def test_weights_sum_to_one(self):
        w = min_weights([0.3, 0.1, 0.1], None)
        np.testing.assert_allclose(w, [0, 0.5, 0.5])
        assert min_weights([0.3, 0.1, 0.2], 0.5).sum() == pytest.approx(1.0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=10), st.floats(1e-3, 10))
    def test_below_min(self, xs, tau):
        assert softmin(xs, tau) <= min(xs) + 1e-12

    def test_monotone_in_temperature(self):
        x = np.random.default_rng(1).uniform(0, 1, 6)
        vals = [softmin(x, t) for t in (0.01, 0.1, 0.5, 1.0, 5.0)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


class TestConstraintMismatch:
    A2 = np.array([[1.0, 0.0], [0.0, 1.0]])

    def test_feasible_hard_min(self):
        P, dA, db = constraint_mismatch(self.A2, [2.0, 1.0], [0, 0], [1, 0])
        assert P == 1
        assert not dA[0].any() and db[0] == 0
        assert db[1] != 0

    def test_infeasible_row_at_neighbour(self):
        P, dA, db = constraint_mismatch([[1.0, 0.0]], [0.5], [0, 0], [1, 0])
        assert P == pytest.approx(0.5)
        assert db[0] == -1.0
        np.testing.assert_allclose(dA[0], [0.5, 0.0])

    def test_outside_box_is_zero(self):
        P, dA, db = constraint_mismatch(self.A2, [2.0, 1.0], [1, 0], [2, 0], in_box=False)
        assert P == 0 and not dA.any() and not db.any()

    def test_same_point_is_zero(self):
        P, _, _ = constraint_mismatch(self.A2, [2.0, 1.0], [1, 0], [1, 0])
        assert P == 0

    def test_only_violated_rows_move(self):
        A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        _, dA, db = constraint_mismatch(A, [0.5, 5.0, 0.2], [0, 0], [1, 0])
        assert db[1] == 0 and not dA[1].any()
        assert db[0] < 0 and db[2] < 0

    def test_hard_min_is_generalised_active_constraint(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            A = rng.standard_normal((4, 3))
            y = np.zeros(3)
            b = rng.uniform(0.5, 2.0, 4)
            P, dA, db = constraint_mismatch(A, b, y, [0, 0, 1] if np.all(A[:, 2] <= b) else y)
            if P == 0:
                continue
            dist = np.abs(A @ y - b) / np.linalg.norm(A, axis=1)
            moved = np.flatnonzero(np.abs(db) > 0)
            assert moved.tolist() == [int(np.argmin(dist))]

    def test_one_step_descent_single_constraint(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = rng.standard_normal(3)
            y = np.zeros(3)
            b = abs(rng.standard_normal()) + 0.1
            y_prime = np.array([1.0, 0.0, 0.0]) * np.sign(b - a[0]) if a[0] < b else np.array([-1.0, 0, 0])
            P, dA, db = constraint_mismatch(a[None], [b], y, y_prime, temperature=0.5)
            if P == 0:
                continue
            eta = 1e-3
            P2, _, _ = constraint_mismatch(a[None] - eta * dA, [b - eta * db[0]], y, y_prime, temperature=0.5)
            assert P2 < P


class TestCostMismatch:
    def test_feasible(self):
        P, dc = cost_mismatch([1.0, 2.0], [1, -1], True)
        assert P == -1
        assert dc.tolist() == [1, -1]

    def test_infeasible_or_outside(self):
        assert cost_mismatch([1.0, 2.0], [1, -1], False)[0] == 0
        P, dc = cost_mismatch([1.0, 2.0], [1, -1], True, in_box=False)
        assert P == 0 and not dc.any()


def random_config(rng, lattice, m):
    n = lattice.n
    A = rng.standard_normal((m, n))
    b = rng.uniform(-0.3, 0.6, m)
    c = rng.standard_normal(n)
    layer = CombOptNetLayer(lattice)
    y, _ = layer.solve(A, b, c[None])
    return A, b, c, y[0]


class TestBackward:
    def test_zero_gradient(self):
        g = backward(np.ones((1, 2)), [0.5], [1.0, 1.0], [0.0, 0.0], [0.0, 0.0], BINARY2)
        assert not g.dA.any() and not g.db.any() and not g.dc.any()

    @pytest.mark.parametrize("temperature", [None, 0.5, 2.0])
    @pytest.mark.parametrize("basis", list(BasisMode))
    def test_vectorised_matches_reference(self, temperature, basis):
        rng = np.random.default_rng(7)
        cfg = BackwardConfig(temperature, basis)
        for lattice in (Lattice.normalized([0] * 5, [1] * 5), Lattice.normalized([-2] * 4, [2] * 4)):
            for _ in range(15):
                A, b, c, y = random_config(rng, lattice, 3)
                dy = rng.standard_normal(lattice.n) * (rng.random(lattice.n) > 0.3)
                g, ref = backward(A, b, c, y, dy, lattice, cfg), backward_reference(A, b, c, y, dy, lattice, cfg)
                np.testing.assert_allclose(g.dA, ref.dA, atol=1e-12)
                np.testing.assert_allclose(g.db, ref.db, atol=1e-12)
                np.testing.assert_allclose(g.dc, ref.dc, atol=1e-12)

    def test_homogeneity(self):
        rng = np.random.default_rng(8)
        lattice = Lattice.normalized([0] * 6, [1] * 6)
        for _ in range(20):
            A, b, c, y = random_config(rng, lattice, 2)
            dy = rng.standard_normal(6)
            base = backward(A, b, c, y, dy, lattice)
            for alpha in (0.5, 2.0, 10.0):
                g = backward(A, b, c, y, alpha * dy, lattice)
                np.testing.assert_allclose(g.dA, alpha * base.dA, rtol=1e-12, atol=1e-14)
                np.testing.assert_allclose(g.db, alpha * base.db, rtol=1e-12, atol=1e-14)
                np.testing.assert_allclose(g.dc, alpha * base.dc, rtol=1e-12, atol=1e-14)


class TestWorkedCase:
    """One row ``x1 <= 0.5`` on the binary square, cost ``[-1, 0.1]``, so the solver returns ``[0, 0]``."""

    A = np.array([[1.0, 0.0]])
    b = np.array([0.5])
    c = np.array([-1.0, 0.1])

    def descend(self, target, eta=0.1, max_steps=50):
        """Repeated gradient steps on the returned triple; returns the solutions visited."""
        A, b, c = self.A.copy(), self.b.copy(), self.c.copy()
        seen = [solve2(A, b, c).tolist()]
        for _ in range(max_steps):
            y = np.array(seen[-1], dtype=float)
            g = backward(A, b, c, y, y - np.asarray(target, float), BINARY2)
            A, b, c = A - eta * g.dA, b - eta * g.db, c - eta * g.dc
            seen.append(solve2(A, b, c).tolist())
            if seen[-1] == list(target):
                break
        return seen

    def test_forward(self):
        assert solve2(self.A, self.b, self.c).tolist() == [0, 0]

    def test_target_needs_looser_row(self):
        g = backward(self.A, self.b, self.c, [0.0, 0.0], [-1.0, 0.0], BINARY2)
        assert g.db[0] < 0  # a descent step raises b
        assert g.dA[0, 0] > 0  # and shrinks the x1 coefficient
        assert not g.dc.any()  # the neighbour is infeasible, so the cost is left alone

    def test_target_needs_cheaper_second_item(self):
        g = backward(self.A, self.b, self.c, [0.0, 0.0], [0.0, -1.0], BINARY2)
        np.testing.assert_allclose(g.dc, [0.0, 1.0])

    def test_both_coordinates(self):
        g = backward(self.A, self.b, self.c, [0.0, 0.0], [-1.0, -1.0], BINARY2)
        assert g.db[0] < 0

    @pytest.mark.parametrize("target", [(1, 0), (0, 1), (1, 1)])
    def test_descent_reaches_target(self, target):
        assert self.descend(target)[-1] == list(target)

    def test_reference_oracle_agrees(self):
        for dy in ([-1.0, 0.0], [0.0, -1.0], [-1.0, -1.0]):
            g = backward(self.A, self.b, self.c, [0.0, 0.0], dy, BINARY2)
            ref = backward_reference(self.A, self.b, self.c, [0.0, 0.0], dy, BINARY2)
            np.testing.assert_allclose(g.dA, ref.dA)
            np.testing.assert_allclose(g.db, ref.db)
            np.testing.assert_allclose(g.dc, ref.dc)


class TestLayer:
    def test_shared_and_per_instance_agree(self):
        rng = np.random.default_rng(9)
        lattice = Lattice.normalized([0] * 4, [1] * 4)
        layer = CombOptNetLayer(lattice)
        A = rng.standard_normal((2, 4))
        b = rng.uniform(0, 0.5, 2)
        costs = rng.standard_normal((5, 4))
        y1, s1 = layer.solve(A, b, costs)
        y2, s2 = layer.solve(np.repeat(A[None], 5, 0), np.repeat(b[None], 5, 0), costs)
        np.testing.assert_array_equal(y1, y2)
        assert s1 == s2

    def test_enumeration_matches_branch_and_bound(self):
        rng = np.random.default_rng(10)
        lattice = Lattice.normalized([-1] * 5, [1] * 5)
        fast = CombOptNetLayer(lattice)
        slow = CombOptNetLayer(lattice, enumeration_limit=1)
        A = rng.standard_normal((3, 5))
        b = rng.uniform(-0.2, 0.4, 3)
        costs = rng.standard_normal((20, 5))
        np.testing.assert_array_equal(fast.solve(A, b, costs)[0], slow.solve(A, b, costs)[0])

    def test_backward_shapes(self):
        rng = np.random.default_rng(11)
        lattice = Lattice.normalized([0] * 3, [1] * 3)
        layer = CombOptNetLayer(lattice)
        ctx = layer.forward(rng.standard_normal((2, 3)), np.full(2, 0.2), rng.standard_normal((4, 3)))
        g = layer.backward(ctx, rng.standard_normal((4, 3)))
        assert g.dA.shape == (4, 2, 3) and g.db.shape == (4, 2) and g.dc.shape == (4, 3)

    def test_fallback_status_surfaced(self):
        layer = CombOptNetLayer(BINARY2)
        _, statuses = layer.solve(np.array([[1.0, 0.0]]), np.array([-1.0]), np.ones((2, 2)))
        assert statuses == [SolveStatus.INFEASIBLE_FALLBACK] * 2
