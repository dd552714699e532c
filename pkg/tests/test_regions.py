from __future__ import annotations

import math

import numpy as np
import pytest

from actionembed.probability import Alphabet, ConditionalPmf, DeterministicMap, FinitePmf, chain_compose, conditional_entropy
from actionembed.problems import ChannelActionProblem, encoder_side_problem, hamming, probing_example, zs_example
from actionembed.regions import binary, channel, curves, source
from actionembed.regions.channel import (
    InfeasibleError,
    channel_max_sum_rate,
    pentagon_corners,
    probing_sum_rate,
    probing_sum_rate_convexified,
    region_transfer_closure,
    solve_probing,
    sum_region_corners,
)
from actionembed.regions.source import (
    ProblemError,
    eval_nc,
    reevaluate,
    solve_causal,
    solve_encoder_side,
    solve_encoder_side_dual,
    solve_nc,
    solve_sc,
)
from actionembed.solvers import SolverConfig, SolverError

# frozen from a 30-digit mpmath evaluation of 1 - H2(0.11)
RD_011 = 0.500084041835472004

QUICK = SolverConfig(grid_resolution=6, restarts=1, refine_iters=60)
SMALL_U = SolverConfig(aux_cardinalities={"U": 2})


def binary_encoder_side(dual: bool = False):
    X, A = Alphabet("X", ("0", "1")), Alphabet("A", ("0", "1"))
    return encoder_side_problem(
        FinitePmf(X, [0.5, 0.5]), A, DeterministicMap.identity(A, "Y"), DeterministicMap.identity(A, "B"),
        Alphabet("Xhat1", ("0", "1")), Alphabet("Xhat2", ("0", "1")), hamming(2), hamming(2), [0.0, 1.0],
        dual=dual,
    )


def noiseless_channel() -> ChannelActionProblem:
    A, S, X, Y = (Alphabet.range(n, 2) for n in "ASXY")
    W = np.zeros((2, 2, 2, 2))
    for x in range(2):
        W[x, :, :, x] = 1.0
    return ChannelActionProblem(
        ConditionalPmf(S, (A,), [[0.5, 0.5], [0.5, 0.5]]),
        ConditionalPmf(Y, (X, S, A), W),
        DeterministicMap.identity(A, "B"),
        np.zeros((2, 2)),
    )


class TestDecoderSide:
    def test_perfect_side_information_free(self):
        # delta = 1 makes Y useless for X, so Decoder 1 needs the full bit
        pt = solve_nc(zs_example(1.0), 0.0, 0.5, 1.0, SMALL_U)
        assert pt.feasible and pt.rate == pytest.approx(1.0, abs=1e-6)

    def test_nothing_to_send(self):
        pt = solve_nc(zs_example(0.0), 0.5, 0.5, 1.0, SMALL_U)
        assert pt.feasible and pt.rate == pytest.approx(0.0, abs=1e-6)

    def test_noiseless_side_information(self):
        pt = solve_nc(zs_example(0.0), 0.0, 0.11, 1.0, SMALL_U)
        assert pt.rate == pytest.approx(RD_011, abs=2e-3)
        assert pt.rate >= RD_011 - 1e-6

    def test_witness_reproduces_rate(self):
        pt = solve_nc(zs_example(0.5), 0.0, 0.2, 1.0, SMALL_U)
        ev = reevaluate(zs_example(0.5), pt)
        assert ev.rate == pytest.approx(pt.rate, abs=1e-12)
        assert ev.d2 <= 0.2 + 1e-9 and ev.embed_slack >= -1e-9

    def test_point_budgets_met(self):
        pt = solve_sc(zs_example(0.3), 0.1, 0.3, 0.7, SMALL_U)
        assert all(v >= -1e-9 for v in pt.slack.values())
        assert pt.targets == {"D1": 0.1, "D2": 0.3, "Gamma": 0.7}

    def test_sc_never_below_nc_witness_value(self):
        p = zs_example(0.5)
        sc = solve_sc(p, 0.0, 0.2, 1.0, SMALL_U)
        nc = solve_nc(p, 0.0, 0.2, 1.0, SMALL_U, start=sc)
        assert nc.rate <= sc.rate + 1e-9

    def test_infeasible_budget(self):
        pt = solve_nc(zs_example(0.5), 0.0, -0.1, 1.0, QUICK.replace(aux_cardinalities={"U": 2}))
        assert not pt.feasible and math.isnan(pt.rate)

    def test_cardinality_above_bound(self):
        with pytest.raises(SolverError):
            solve_nc(zs_example(0.5), 0, 0.2, 1, SolverConfig(aux_cardinalities={"U": 99}))

    def test_mode_mismatch(self):
        with pytest.raises(ProblemError):
            solve_encoder_side(zs_example(0.5), 0, 0.2, 1)

    def test_eval_matches_kernel_on_uniform(self):
        q = np.full((2, 2, 2, 2), 1 / 8)
        ev = eval_nc(zs_example(0.5), q)
        assert ev.rate == pytest.approx(0.0, abs=1e-12)
        assert ev.d2 == pytest.approx(0.5) and ev.cost == pytest.approx(0.5)


class TestCausal:
    def test_feasible_and_reproducible(self):
        p = zs_example(0.5)
        pt = solve_causal(p, 0.0, 0.2, 1.0, QUICK.replace(aux_cardinalities={"V": 2, "U": 2}))
        assert pt.feasible
        assert reevaluate(p, pt).rate == pytest.approx(pt.rate, abs=1e-12)

    def test_v_cardinality_sweep(self):
        # |V| from 2 to |X| + 3, each seeded with the previous witness padded by
        # an unused symbol: the rate may only go down as |V| grows
        p = zs_example(0.5)
        rates, prev = [], None
        for nv in range(2, len(p.X) + 4):
            start = None
            if prev is not None:
                q = np.zeros((2, nv, 2, 2))
                q[:, : nv - 1] = prev.witness["q"]
                start = [q.ravel()]
            prev = solve_causal(p, 0.0, 0.2, 1.0, QUICK.replace(aux_cardinalities={"V": nv, "U": 2}), start=start)
            assert prev.feasible
            rates.append(prev.rate)
        assert all(b <= a + 1e-9 for a, b in zip(rates, rates[1:]))
        print("causal rate by |V|:", dict(zip(range(2, 6), np.round(rates, 6))))

    def test_nested_ordering(self):
        sc, causal, nc = source.nested_solves(zs_example(0.5), 0.0, 0.25, 1.0, QUICK)
        assert nc.rate <= causal.rate + 1e-6 <= sc.rate + 2e-6


class TestEncoderSide:
    def test_free_actions_cover_everything(self):
        pt = solve_encoder_side(binary_encoder_side(), 0.0, 0.0, math.inf, SMALL_U)
        assert pt.feasible and pt.rate == pytest.approx(0.0, abs=1e-6)

    def test_forced_action(self):
        # zero budget pins A = 0, so nothing is conveyed by the actions
        pt = solve_encoder_side(binary_encoder_side(), 0.0, 0.5, 0.0, SMALL_U)
        assert pt.rate == pytest.approx(1.0, abs=1e-6)
        assert pt.rates["objective"] == pytest.approx(pt.rate, abs=1e-6)

    def test_forced_action_lossless_second_decoder_infeasible(self):
        assert not solve_encoder_side(binary_encoder_side(), 0.0, 0.0, 0.0, SMALL_U).feasible

    def test_dual_free(self):
        pt = solve_encoder_side_dual(binary_encoder_side(True), 0.0, 0.0, math.inf)
        assert pt.rate == pytest.approx(0.0, abs=1e-6)

    def test_dual_cost_limited(self):
        # E[A] <= 0.11 caps H(A) at H2(0.11), the rest goes over the link
        p = binary_encoder_side(True)
        pt = solve_encoder_side_dual(p, 0.0, 0.5, 0.11)
        assert pt.rate == pytest.approx(RD_011, abs=1e-4)
        assert reevaluate(p, pt).rate == pytest.approx(pt.rate, abs=1e-12)

    def test_dual_embedding_binds(self):
        assert not solve_encoder_side_dual(binary_encoder_side(True), 0.0, 0.0, 0.11).feasible


class TestBinaryExample:
    def test_useless_side_information(self):
        pt = binary.solve_binary_example(1.0, 0.2, "nc", SolverConfig(grid_resolution=40))
        assert pt.rate == pytest.approx(1.0, abs=1e-9)

    def test_nc_equals_sc_at_noiseless_side_information(self):
        cfg = SolverConfig(grid_resolution=40)
        sc = binary.solve_binary_example(0.0, 0.2, "sc", cfg)
        nc = binary.solve_binary_example(0.0, 0.2, "nc", cfg, start=sc)
        assert nc.rate == pytest.approx(sc.rate, abs=1e-6)

    def test_matches_general_solver_witness(self):
        pt = binary.solve_binary_example(0.5, 0.3, "nc", SolverConfig(grid_resolution=40))
        ev = eval_nc(zs_example(0.5), pt.witness["q"])
        assert ev.rate == pytest.approx(pt.rate, abs=1e-12)
        assert ev.d2 == pytest.approx(pt.witness["alpha"][1] + pt.witness["alpha"][2], abs=1e-12)

    def test_ranges(self):
        with pytest.raises(ValueError):
            binary.solve_binary_example(1.2, 0.2)
        with pytest.raises(ValueError):
            binary.solve_binary_example(0.5, 0.7)
        with pytest.raises(ValueError):
            binary.solve_binary_example(0.5, 0.2, "causal")

    def test_alpha_parametrization(self):
        q = binary.alpha_to_q(np.array([0.1, 0.2, 0.3, 0.4]))[0]
        np.testing.assert_allclose(q.sum(axis=(1, 2)), [1.0, 1.0])
        d2 = 0.5 * (q[0, 1].sum() + q[1, 0].sum())
        assert d2 == pytest.approx(0.5)


class TestChannel:
    def test_noiseless_sum_rate(self):
        for r1 in (0.0, 1.0):
            pt = channel_max_sum_rate(noiseless_channel(), r1)
            assert pt.feasible and pt.rate == pytest.approx(1.0, abs=1e-6)

    def test_r1_above_action_entropy(self):
        pt = channel_max_sum_rate(noiseless_channel(), 1.5)
        assert not pt.feasible

    def test_negative_r1(self):
        with pytest.raises(ValueError):
            channel_max_sum_rate(noiseless_channel(), -0.1)

    def test_example_file(self, channel_problem):
        a = channel_max_sum_rate(channel_problem, 0.0)
        b = channel_max_sum_rate(channel_problem, 0.9, start=a)
        assert a.feasible and b.feasible
        assert b.rate <= a.rate + 1e-9
        assert a.rates["private_bound"] <= a.rate + 1e-12

    def test_cost_budget_bites(self, channel_problem):
        free = channel_max_sum_rate(channel_problem, 0.0)
        tight = channel_max_sum_rate(channel_problem, 0.0, gamma=0.2)
        assert tight.costs["Gamma"] <= 0.2 + 1e-9
        assert tight.rate <= free.rate + 1e-9


class TestProbing:
    def test_saturation(self):
        for r1 in (0.0, 0.5, 0.9):
            assert solve_probing(probing_example(0.5, 1.0, 0.6), r1).rate == pytest.approx(0.5, abs=1e-6)

    def test_zero_input_budget(self):
        assert solve_probing(probing_example(0.5, 1.0, 0.0), 0.0).rate == pytest.approx(0.0, abs=1e-9)

    def test_interior_point(self):
        assert solve_probing(probing_example(0.5, 1.0, 0.25), 0.0).rate == pytest.approx(0.5, abs=1e-4)

    def test_action_budget_infeasible(self):
        with pytest.raises(InfeasibleError):
            probing_sum_rate(probing_example(0.5, 0.0, 0.3), 0.5)

    def test_r1_range(self):
        with pytest.raises(ValueError):
            solve_probing(probing_example(0.5, 1.0, 0.3), 1.2)

    def test_convexified_not_worse(self):
        p = probing_example(0.5, 1.0, 0.1)
        plain = solve_probing(p, 0.5).rate
        assert probing_sum_rate_convexified(p, 0.5) >= plain - 2e-2
        print(f"probing Gamma_X=0.1, R1=0.5: plain {plain:.6f}, convexified {probing_sum_rate_convexified(p, 0.5):.6f}")


class TestTransferClosure:
    def test_single_point(self):
        assert region_transfer_closure([(0.4, 0.3)]) == [(0.0, 0.7), (0.4, 0.3)]

    def test_dominated_point_dropped(self):
        assert region_transfer_closure([(0.4, 0.3), (0.2, 0.4)]) == [(0.0, 0.7), (0.4, 0.3)]

    def test_tradeoff_kept(self):
        got = region_transfer_closure([(0.5, 0.0), (0.1, 0.6)])
        assert got == [(0.0, 0.7), (0.1, 0.6), (0.5, 0.0)]

    def test_empty(self):
        assert region_transfer_closure([]) == []

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            region_transfer_closure([(-0.1, 0.2)])

    def test_pentagon_to_triangle(self):
        got = region_transfer_closure(pentagon_corners(0.8, 1.0, 0.5))
        assert np.allclose(got, sum_region_corners(0.8, 1.0), atol=1e-12)


class TestTraceCurve:
    def test_monotone_and_warm(self):
        cfg = SolverConfig(grid_resolution=30)
        curve = curves.trace_curve(binary.solve_binary_example, {"delta": 0.5, "mode": "nc"}, "D2",
                                   [0.1, 0.2, 0.3], cfg)
        assert curve.flagged == []
        assert all(b <= a + 1e-7 for a, b in zip(curve.rates, curve.rates[1:]))

    def test_unsorted_grid(self):
        with pytest.raises(ValueError):
            curves.trace_curve(binary.solve_binary_example, {"delta": 0.5}, "D2", [0.3, 0.1])

    def test_flags_trend_breaks(self):
        curve = curves.trace_curve(binary.solve_binary_example, {"delta": 0.5, "mode": "nc"}, "D2",
                                   [0.1, 0.3], SolverConfig(grid_resolution=20), trend="nondecreasing")
        assert curve.flagged == [1]

    def test_infeasible_rows_nan(self):
        curve = curves.trace_curve(channel_max_sum_rate, {"problem": noiseless_channel()}, "R1", [0.5, 2.0],
                                   SolverConfig(grid_resolution=10))
        assert math.isnan(curve.rates[1])


def test_channel_module_exports():
    assert channel.CLOSURE_TOL == 1e-12


class TestStatedExamples:
    def test_eval_nc_useless_side_information(self):
        # Xhat2 independent of X, U = X: the whole bit goes over the link
        q = np.zeros((2, 2, 2, 2))
        for x in range(2):
            q[x, :, :, x] = 0.25
        assert eval_nc(zs_example(1.0), q).rate == pytest.approx(1.0, abs=1e-12)

    def test_eval_nc_noiseless_side_information(self):
        q = np.zeros((2, 2, 2, 2))
        q[0, 0, 0, 0] = q[1, 0, 0, 1] = 1.0
        assert eval_nc(zs_example(0.0), q).rate == pytest.approx(0.0, abs=1e-12)

    def test_eval_nc_independent_witness(self):
        q = np.zeros((2, 2, 2, 2))
        q[:, 0, :, 0] = [0.3, 0.7]
        ev = eval_nc(zs_example(0.4), q)
        assert ev.rate == pytest.approx(0.0, abs=1e-12)
        assert ev.embed_slack == pytest.approx(0.8812908992306927, abs=1e-12)  # H2(0.3)

    def test_sc_useless_side_information(self):
        pt = solve_sc(zs_example(1.0), 0.0, 0.3, 1.0, SMALL_U)
        assert pt.rate == pytest.approx(1.0, abs=1e-6)

    def test_causal_constant_v(self):
        p = zs_example(0.3)
        prior = [0.4, 0.6]
        q = np.zeros((2, 1, 2, 2))
        for x in range(2):
            q[x, 0, :, x] = prior
        h = []
        for a in range(2):
            j = chain_compose([p.source, ConditionalPmf(p.Y, (p.X,), p.side_channel.table[:, a, :])])
            h.append(conditional_entropy(j, ["X"], ["Y"]))
        assert source.eval_causal(p, q).rate == pytest.approx(float(np.dot(prior, h)), abs=1e-12)

    def test_causal_noiseless_matches_bounds(self):
        cfg = SolverConfig(grid_resolution=8, aux_cardinalities={"U": 2, "V": 2})
        sc, causal, nc = source.nested_solves(zs_example(0.0), 0.0, 0.2, 1.0, cfg)
        assert causal.rate == pytest.approx(sc.rate, abs=1e-6)
        assert nc.rate == pytest.approx(sc.rate, abs=1e-6)

    def test_encoder_side_constant_side_information(self):
        X, A = Alphabet("X", ("0", "1")), Alphabet("A", ("0", "1"))
        p = encoder_side_problem(
            FinitePmf(X, [0.5, 0.5]), A, DeterministicMap((A,), Alphabet("Y", ("0", "1")), [0, 0]),
            DeterministicMap.identity(A, "B"), Alphabet("Xhat1", ("0", "1")), Alphabet("Xhat2", ("0", "1")),
            hamming(2), hamming(2), [0.0, 1.0],
        )
        assert solve_encoder_side(p, 0.0, 0.5, math.inf, SMALL_U).rate == pytest.approx(1.0, abs=1e-6)

    def test_dual_constant_action_map(self):
        X, A = Alphabet("X", ("0", "1")), Alphabet("A", ("0", "1"))
        const = DeterministicMap((A,), Alphabet("Y", ("0", "1")), [0, 0])
        p = encoder_side_problem(
            FinitePmf(X, [0.5, 0.5]), A, const, DeterministicMap((A,), Alphabet("B", ("0",)), [0, 0]),
            Alphabet("Xhat1", ("0", "1")), Alphabet("Xhat2", ("0", "1")), hamming(2), hamming(2), [0.0, 1.0],
            dual=True,
        )
        assert solve_encoder_side_dual(p, 0.0, 0.5, math.inf).rate == pytest.approx(1.0, abs=1e-6)

    def test_dual_slack_arithmetic(self):
        q = np.zeros((2, 2, 2))
        q[0, 0, 0] = q[1, 1, 1] = 1.0
        ev = source.eval_encoder_side_dual(binary_encoder_side(True), q, np.array([0.5, 0.5]))
        # I(X;Xhat1,Xhat2) = 1, H(f_Y(A)) = 1, I(X;Xhat2) = 1, H(f(A)) = 1
        assert ev.extras["objective"] == pytest.approx(0.0, abs=1e-12)
        assert ev.embed_slack == pytest.approx(0.0, abs=1e-12)

    def test_threshold_limits(self):
        cfg = SolverConfig(grid_resolution=40)
        assert binary.decoder2_threshold(0.0, cfg) == pytest.approx(0.5, abs=1e-3)
        assert binary.decoder2_threshold(1.0, cfg) == pytest.approx(0.0, abs=1e-6)

    def test_degenerate_decoder2_slack(self):
        pt = solve_nc(zs_example(0.5), 0.0, 0.5, 1.0, SMALL_U)
        assert pt.slack["embedding"] >= -1e-9

    def test_probing_all_good_state(self):
        p = probing_example(0.0, 1.0, 1.0)
        assert solve_probing(p, 0.0).rate == pytest.approx(1.0, abs=1e-6)

    def test_transfer_examples(self):
        assert region_transfer_closure([(1, 2)]) == [(0.0, 3.0), (1.0, 2.0)]
        # (2, 0.5) has the larger R1, so neither generator dominates the other
        assert region_transfer_closure([(1, 2), (2, 0.5)]) == [(0.0, 3.0), (1.0, 2.0), (2.0, 0.5)]
        assert region_transfer_closure([(1, 2), (0.5, 2.2)]) == [(0.0, 3.0), (1.0, 2.0)]
