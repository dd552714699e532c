"""Capacity-cost boundary for action-dependent channels with embedding on
actions, the probing-encoder example, and the rate-transfer closure."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linprog

from ..probability import (
    Alphabet,
    ConditionalPmf,
    DeterministicMap,
    FinitePmf,
    JointDistribution,
    binary_entropy,
    chain_compose,
    entropy,
    mutual_information,
    pushforward,
)
from ..problems import ChannelActionProblem, ProbingProblem, RegionPoint, validate
from ..solvers import SolverConfig, SolverError, minimize_constrained
from .kernels import Cached, ChannelKernel, ProbingKernel
from .source import ProblemError, as_starts

# linear budgets: a tight tolerance keeps entropy gains from boundary slack negligible
PROBING_CONFIG = SolverConfig(grid_resolution=60, restarts=4, refine_iters=300, feas_tol=1e-12)

CLOSURE_TOL = 1e-12


class InfeasibleError(ValueError):
    pass


def _require_valid(problem) -> None:
    bad = validate(problem)
    if bad:
        raise ProblemError("; ".join(map(str, bad)))


# ---------------------------------------------------------------------------
# general channel region
# ---------------------------------------------------------------------------


def channel_aux_cardinality(problem: ChannelActionProblem, config: SolverConfig) -> int:
    """|U| from the config, else the largest value <= the cardinality bound
    whose strategy space |X|^(|U||S|) fits ``max_enum_maps``."""
    nx, ns, na = len(problem.X), len(problem.S), len(problem.A)
    bound = nx * ns * na + 1
    if "U" in config.aux_cardinalities:
        card = int(config.aux_cardinalities["U"])
        if not 1 <= card <= bound:
            raise SolverError(f"|U| = {card} outside [1, {bound}]")
        return card
    card = 1
    while card < bound and nx ** ((card + 1) * ns) <= config.max_enum_maps:
        card += 1
    return card


@dataclass
class ChannelEval:
    sum_rate: float
    h_b: float
    cost: float
    i_b_y: float

    @property
    def private_bound(self) -> float:
        """I(A;Y|f(A)) + I(U;Y|A) - I(U;S|A), i.e. the sum bound minus I(f(A);Y)."""
        return self.sum_rate - self.i_b_y


def channel_joint(problem: ChannelActionProblem, pa: NDArray, pu: NDArray, g: NDArray) -> JointDistribution:
    """p(a) p(s|a) p(u|s,a) 1{x = g(u,s)} p(y|x,s,a) with B = f(A) adjoined."""
    U = Alphabet.range("U", pu.shape[-1])
    factors = [
        FinitePmf(problem.A, pa),
        problem.state_channel,
        ConditionalPmf(U, (problem.A, problem.S), pu),
        DeterministicMap((U, problem.S), problem.X, g),
        problem.transmission_channel,
    ]
    return pushforward(chain_compose(factors), problem.action_map, problem.B.name)


def eval_channel(problem: ChannelActionProblem, pa: NDArray, pu: NDArray, g: NDArray) -> ChannelEval:
    A, S, X, Y, B = (problem.A.name, problem.S.name, problem.X.name, problem.Y.name, problem.B.name)
    j = channel_joint(problem, pa, pu, g)
    return ChannelEval(
        sum_rate=mutual_information(j, [A, "U"], [Y]) - mutual_information(j, ["U"], [S], [A]),
        h_b=entropy(j, [B]),
        cost=j.expect([A, X], problem.cost),
        i_b_y=mutual_information(j, [B], [Y]),
    )


def _finite_budget(gamma: float) -> bool:
    return gamma is not None and math.isfinite(gamma)


def channel_max_sum_rate(problem: ChannelActionProblem, R1: float, gamma: float = math.inf,
                         config: SolverConfig | None = None, start=None) -> RegionPoint:
    """Largest R1 + R2 found at the given R1 (a lower bound on the boundary)."""
    _require_valid(problem)
    if R1 < 0:
        raise ValueError("R1 must be >= 0")
    config = config or SolverConfig()
    n_u = channel_aux_cardinality(problem, config)
    kernel = ChannelKernel(problem, n_u)
    strategies = kernel.strategies()
    targets = {"R1": R1, "Gamma": gamma}
    if R1 > math.log2(len(problem.B)) + config.feas_tol:
        return RegionPoint("channel", False, {"R1": R1, "sum_rate": float("nan")}, targets=targets)
    cached = Cached(kernel.terms)
    cons = [cached.term("h_b", scale=-1.0, offset=R1)]
    if _finite_budget(gamma):
        cons.append(cached.term("cost", offset=-gamma))
    out = minimize_constrained(cached.term("sum_rate"), cons, kernel.shape(), config, "max",
                               enum_maps=[strategies], starts=as_starts(start))
    if not out.feasible:
        return RegionPoint("channel", False, {"R1": R1, "sum_rate": float("nan")}, targets=targets,
                           evaluations=out.evaluations)
    na, ns = len(problem.A), len(problem.S)
    pa = out.theta[:na]
    pu = out.theta[na:].reshape(na, ns, n_u)
    g = strategies[out.maps[0]]
    ev = eval_channel(problem, pa, pu, g)
    slack = {"embedding": ev.h_b - R1}
    if _finite_budget(gamma):
        slack["cost"] = gamma - ev.cost
    return RegionPoint(
        kind="channel",
        feasible=True,
        rates={"R1": R1, "sum_rate": ev.sum_rate, "R2": ev.sum_rate - R1, "private_bound": ev.private_bound},
        costs={"Gamma": ev.cost},
        slack=slack,
        witness={"p_a": pa, "p_u": pu, "g": g},
        theta=out.theta,
        maps=out.maps,
        evaluations=out.evaluations,
        targets=targets,
    )


# ---------------------------------------------------------------------------
# probing encoder
# ---------------------------------------------------------------------------


def probing_terms(problem: ProbingProblem, gamma: float, p1: float, p2: float) -> dict[str, float]:
    """Closed-form objective and constraint values at one (gamma, p1, p2)."""
    good = 1.0 - problem.epsilon
    return {
        "sum_rate": float(gamma * good * binary_entropy(p1) + (1 - gamma) * good * binary_entropy(p2)),
        "ex": p1 * gamma * good + p2 * (1 - gamma),
        "ea": gamma,
        "h_a": float(binary_entropy(gamma)),
    }


def solve_probing(problem: ProbingProblem, R1: float, config: SolverConfig | None = None,
                  start=None) -> RegionPoint:
    _require_valid(problem)
    if not 0.0 <= R1 <= 1.0:
        raise ValueError(f"R1 must lie in [0, 1], got {R1}")
    config = config or PROBING_CONFIG
    kernel = ProbingKernel(problem)
    cached = Cached(kernel.terms)
    cons = [
        cached.term("ex", offset=-problem.gamma_x_budget),
        cached.term("ea", offset=-problem.gamma_a_budget),
        cached.term("h_a", scale=-1.0, offset=R1),
    ]
    targets = {"R1": R1, "Gamma_A": problem.gamma_a_budget, "Gamma_X": problem.gamma_x_budget}
    out = minimize_constrained(cached.term("sum_rate"), cons, ProbingKernel.shape, config, "max",
                               starts=as_starts(start))
    if not out.feasible:
        return RegionPoint("probing", False, {"R1": R1, "sum_rate": float("nan")}, targets=targets,
                           evaluations=out.evaluations)
    gamma, p1, p2 = out.theta[0], out.theta[2], out.theta[4]
    t = probing_terms(problem, gamma, p1, p2)
    return RegionPoint(
        kind="probing",
        feasible=True,
        rates={"R1": R1, "sum_rate": t["sum_rate"]},
        costs={"Gamma_A": t["ea"], "Gamma_X": t["ex"]},
        slack={
            "gamma_x": problem.gamma_x_budget - t["ex"],
            "gamma_a": problem.gamma_a_budget - t["ea"],
            "embedding": t["h_a"] - R1,
        },
        witness={"gamma": gamma, "p1": p1, "p2": p2},
        theta=out.theta,
        evaluations=out.evaluations,
        targets=targets,
    )


def probing_sum_rate(problem: ProbingProblem, R1: float, config: SolverConfig | None = None) -> float:
    """Best sum rate found with the time-sharing variable held constant."""
    point = solve_probing(problem, R1, config)
    if not point.feasible:
        raise InfeasibleError(f"H(A) >= {R1} cannot be met with E[A] <= {problem.gamma_a_budget}")
    return point.rate


def probing_sum_rate_convexified(problem: ProbingProblem, R1: float, resolution: int = 40) -> float:
    """Sum rate with time sharing over (gamma, p1, p2) candidates on a grid.

    Solves the linear program over mixing weights: maximize the averaged sum
    rate subject to the averaged costs and averaged H(A) meeting R1. The value
    is a lower bound on the time-shared region and at least the grid-restricted
    value without time sharing.
    """
    _require_valid(problem)
    g = np.linspace(0.0, 1.0, resolution + 1)
    G, P1, P2 = (a.ravel() for a in np.meshgrid(g, g, g, indexing="ij"))
    theta = np.column_stack([G, 1 - G, P1, 1 - P1, P2, 1 - P2])
    t = ProbingKernel(problem).terms(theta)
    A_ub = np.vstack([t["ex"], t["ea"], -t["h_a"]])
    b_ub = np.array([problem.gamma_x_budget, problem.gamma_a_budget, -R1])
    res = linprog(-t["sum_rate"], A_ub=A_ub, b_ub=b_ub, A_eq=np.ones((1, len(G))), b_eq=[1.0],
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise InfeasibleError("no time-shared grid mixture meets the constraints")
    return float(-res.fun)


# ---------------------------------------------------------------------------
# rate transfer between the common and private messages
# ---------------------------------------------------------------------------


def region_transfer_closure(points: Iterable[Sequence[float]]) -> list[tuple[float, float]]:
    """Corner points of the union of {(r1 - t, r2 + t): 0 <= t <= r1} lower sets.

    Each achievable (r1, r2) contributes {R1 <= r1, R1 + R2 <= r1 + r2}; the
    union's corners are (0, max sum) and every point not dominated in
    (r1, r1 + r2). Returned sorted by R1.
    """
    pts = [(float(a), float(b)) for a, b in points]
    if not pts:
        return []
    for a, b in pts:
        if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
            raise ValueError(f"rate pairs must be finite and non-negative, got {(a, b)}")
    sums = [a + b for a, b in pts]
    cand = [(0.0, max(sums))] + pts
    csum = [max(sums)] + sums
    # the (0, max sum) vertex always stays; generators compete in (r1, r1 + r2)
    keep = [cand[0]]
    for i in range(1, len(cand)):
        r1 = cand[i][0]
        dominated = False
        for j in range(len(cand)):
            if i == j:
                continue
            ge = cand[j][0] >= r1 - CLOSURE_TOL and csum[j] >= csum[i] - CLOSURE_TOL
            strict = cand[j][0] > r1 + CLOSURE_TOL or csum[j] > csum[i] + CLOSURE_TOL
            if ge and (strict or j < i):
                dominated = True
                break
        if not dominated:
            keep.append(cand[i])
    return sorted(keep)


def pentagon_corners(h_b: float, sum_bound: float, private_bound: float) -> list[tuple[float, float]]:
    """Corners of {R1 <= h_b, R1 + R2 <= sum_bound, R2 <= private_bound} in the
    non-negative quadrant (requires 0 <= private_bound <= sum_bound)."""
    if private_bound < 0 or sum_bound < private_bound:
        raise ValueError("need 0 <= private_bound <= sum_bound")
    r1_max = min(h_b, sum_bound)
    out = {(0.0, private_bound), (min(sum_bound - private_bound, r1_max), private_bound),
           (r1_max, min(private_bound, sum_bound - r1_max))}
    return sorted(out)


def sum_region_corners(h_b: float, sum_bound: float) -> list[tuple[float, float]]:
    """Corners of {R1 <= h_b, R1 + R2 <= sum_bound} in the non-negative quadrant."""
    r1_max = min(h_b, sum_bound)
    return sorted({(0.0, sum_bound), (r1_max, sum_bound - r1_max)})


def random_channel_problem(rng: np.random.Generator, na: int = 2, ns: int = 2, nx: int = 2, ny: int = 2,
                           nb: int | None = None) -> ChannelActionProblem:
    A, S, X, Y = (Alphabet.range(n, k) for n, k in (("A", na), ("S", ns), ("X", nx), ("Y", ny)))
    nb = na if nb is None else nb
    f = rng.integers(0, nb, size=na)
    f[: min(na, nb)] = np.arange(min(na, nb))
    return ChannelActionProblem(
        state_channel=ConditionalPmf(S, (A,), rng.dirichlet(np.ones(ns), size=na)),
        transmission_channel=ConditionalPmf(Y, (X, S, A), rng.dirichlet(np.ones(ny), size=(nx, ns, na))),
        action_map=DeterministicMap((A,), Alphabet.range("B", nb), f),
        cost=np.zeros((na, nx)),
    )


def random_channel_witness(rng: np.random.Generator, problem: ChannelActionProblem, n_u: int = 2):
    na, ns, nx = len(problem.A), len(problem.S), len(problem.X)
    pa = rng.dirichlet(np.ones(na))
    pu = rng.dirichlet(np.ones(n_u), size=(na, ns))
    g = rng.integers(0, nx, size=(n_u, ns))
    return pa, pu, g



def sample_region_bounds(rng: np.random.Generator, max_tries: int = 10_000) -> ChannelEval:
    """Bounds of a random small channel instance and witness whose private
    bound is non-negative (the three-constraint region is then non-empty
    beyond the R1 axis)."""
    for _ in range(max_tries):
        prob = random_channel_problem(rng)
        ev = eval_channel(prob, *random_channel_witness(rng, prob))
        if ev.private_bound >= 0 and ev.sum_rate >= 0:
            return ev
    raise RuntimeError("no instance with a non-negative private bound found")
