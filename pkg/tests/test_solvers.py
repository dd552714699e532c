from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from actionembed.probability import Alphabet, ConditionalPmf, FinitePmf, batch_mi, chain_compose
from actionembed.solvers import (
    SearchOutcome,
    SolverConfig,
    SolverError,
    batch_bayes_distortion,
    bayes_estimator,
    composition_count,
    minimize_constrained,
    project_rows,
    project_to_simplex,
    simplex_grid_array,
)

# frozen from a 30-digit mpmath evaluation of 1 - H2(0.11)
RD_011 = 0.500084041835472004


def binary_rd(D):
    def objective(theta, maps):
        return batch_mi(0.5 * theta.reshape(-1, 2, 2), [0], [1])

    def distortion(theta, maps):
        t = theta.reshape(-1, 2, 2)
        return 0.5 * (t[:, 0, 1] + t[:, 1, 0]) - D

    return objective, [distortion], [2, 2]


class TestSimplexGrid:
    @pytest.mark.parametrize("dim,res,count", [(2, 10, 11), (3, 10, 66), (4, 5, 56), (1, 7, 1)])
    def test_counts(self, dim, res, count):
        g = simplex_grid_array(dim, res)
        assert len(g) == count == composition_count(dim, res)

    def test_points_are_pmfs_and_distinct(self):
        g = simplex_grid_array(3, 8)
        np.testing.assert_allclose(g.sum(axis=1), 1.0)
        assert (g >= 0).all()
        assert len(np.unique(np.round(g * 8).astype(int), axis=0)) == len(g)

    def test_invalid(self):
        with pytest.raises(ValueError):
            simplex_grid_array(0, 3)


class TestProjection:
    def test_interior_point_fixed(self):
        np.testing.assert_allclose(project_to_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])

    def test_known_projection(self):
        np.testing.assert_allclose(project_to_simplex([1.0, 1.0]), [0.5, 0.5])
        np.testing.assert_allclose(project_to_simplex([2.0, 0.0]), [1.0, 0.0])

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=6))
    def test_lands_on_simplex(self, v):
        p = project_to_simplex(v)
        assert (p >= 0).all() and abs(p.sum() - 1) <= 1e-12

    @given(st.integers(0, 2**31))
    def test_is_nearest(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=4)
        p = project_rows(v[None])[0]
        others = rng.dirichlet(np.ones(4), size=200)
        assert np.linalg.norm(v - p) <= np.linalg.norm(v - others, axis=1).min() + 1e-9


class TestBayes:
    def test_perfect_observation(self):
        X, Y = Alphabet("X", ("0", "1")), Alphabet("Y", ("0", "1"))
        j = chain_compose([FinitePmf(X, [0.3, 0.7]), ConditionalPmf(Y, (X,), np.eye(2))])
        est = bayes_estimator(j, ["Y"], Alphabet("Xhat", ("0", "1")), 1 - np.eye(2))
        assert est.table.tolist() == [0, 1]
        assert batch_bayes_distortion(j.tensor[None], 1 - np.eye(2))[0] == pytest.approx(0.0)

    def test_asymmetric_distortion(self):
        # missing a 1 costs 10, a false alarm costs 1: always guess 1 when unobserved
        X = Alphabet("X", ("0", "1"))
        j = FinitePmf(X, [0.8, 0.2]).as_joint()
        d = np.array([[0.0, 1.0], [10.0, 0.0]])
        est = bayes_estimator(j, [], Alphabet("Xhat", ("0", "1")), d)
        assert int(est.table) == 1
        assert batch_bayes_distortion(j.tensor[None], d)[0] == pytest.approx(0.8)

    def test_missing_source(self):
        j = FinitePmf(Alphabet("Z", ("0", "1")), [0.5, 0.5]).as_joint()
        with pytest.raises(SolverError):
            bayes_estimator(j, [], Alphabet("Xhat", ("0", "1")), np.eye(2))


class TestMinimizeConstrained:
    def test_binary_rate_distortion(self):
        obj, cons, shape = binary_rd(0.11)
        out = minimize_constrained(obj, cons, shape, SolverConfig())
        assert out.feasible
        assert out.value == pytest.approx(RD_011, abs=1e-6)
        # distortion may exceed D by feas_tol; the rate-distortion slope here is about 3
        assert out.value >= RD_011 - 5e-9
        assert (out.constraint_values <= 1e-9).all()

    def test_linear_min_and_max(self):
        def f(theta, maps):
            return theta @ np.array([3.0, 1.0, 2.0])

        lo = minimize_constrained(f, [], [3], SolverConfig(grid_resolution=4))
        hi = minimize_constrained(f, [], [3], SolverConfig(grid_resolution=4), sense="max")
        assert lo.value == pytest.approx(1.0) and hi.value == pytest.approx(3.0)

    def test_constraint_active(self):
        def f(theta, maps):
            return theta[:, 0]

        def g(theta, maps):
            return 0.3 - theta[:, 0]

        out = minimize_constrained(f, [g], [2], SolverConfig(grid_resolution=7))
        assert out.value == pytest.approx(0.3, abs=1e-8)

    def test_infeasible(self):
        def g(theta, maps):
            return np.full(len(theta), 1.0)

        out = minimize_constrained(lambda t, m: t[:, 0], [g], [2], SolverConfig(grid_resolution=5, restarts=1))
        assert not out.feasible and math.isnan(out.value)

    def test_enumerated_maps(self):
        def f(theta, maps):
            return theta[:, 0] * maps[0]

        out = minimize_constrained(f, [], [2], SolverConfig(grid_resolution=3), sense="max", enum_maps=[(1.0, 5.0)])
        assert out.value == pytest.approx(5.0) and out.maps == (1,)

    def test_deterministic_across_threads(self):
        obj, cons, shape = binary_rd(0.2)
        cfg = SolverConfig(grid_resolution=15)
        a = minimize_constrained(obj, cons, shape, cfg)
        b = minimize_constrained(obj, cons, shape, cfg)
        c = minimize_constrained(obj, cons, shape, cfg.replace(threads=3))
        assert a.value == b.value == c.value
        np.testing.assert_array_equal(a.theta, c.theta)

    def test_warm_start_shape_checked(self):
        obj, cons, shape = binary_rd(0.2)
        with pytest.raises(SolverError):
            minimize_constrained(obj, cons, shape, SolverConfig(grid_resolution=4), starts=[np.ones(3)])

    def test_warm_start_never_hurts(self):
        obj, cons, shape = binary_rd(0.2)
        cfg = SolverConfig(grid_resolution=4, restarts=0, refine_iters=0, polish=False)
        cold = minimize_constrained(obj, cons, shape, cfg)
        good = minimize_constrained(obj, cons, shape, SolverConfig())
        warm = minimize_constrained(obj, cons, shape, cfg, starts=[good])
        assert isinstance(good, SearchOutcome)
        assert warm.value <= min(cold.value, good.value) + 1e-12

    def test_bad_config(self):
        with pytest.raises(ValueError):
            SolverConfig(grid_resolution=0)
        with pytest.raises(ValueError):
            SolverConfig(threads=0)
        with pytest.raises(ValueError):
            minimize_constrained(lambda t, m: t[:, 0], [], [2], SolverConfig(), sense="up")
