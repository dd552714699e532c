"""Self-test gate: kernel identities, oracle cross-checks and the ordering
and endpoint properties of the catalog instances."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..oracle import cross_check, exhaustive_optimum
from ..probability import (
    Alphabet,
    DeterministicMap,
    FinitePmf,
    batch_mi,
    binary_entropy,
    entropy,
    mutual_information,
    pushforward,
    random_joint,
)
from ..problems import probing_example, random_binary_source_problem, zs_example
from ..regions.binary import solve_binary_example
from ..regions.channel import (
    pentagon_corners,
    region_transfer_closure,
    sample_region_bounds,
    solve_probing,
    sum_region_corners,
)
from ..regions.kernels import SourceKernel
from ..regions.source import eval_causal, eval_nc, nested_solves, solve_nc
from ..solvers import SolverConfig, minimize_constrained


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _binary_rd_program(D: float):
    def objective(theta, maps):
        p = 0.5 * theta.reshape(-1, 2, 2)
        return batch_mi(p, [0], [1])

    def distortion(theta, maps):
        t = theta.reshape(-1, 2, 2)
        return 0.5 * (t[:, 0, 1] + t[:, 1, 0]) - D

    return objective, [distortion], [2, 2]


def check_kernel_identities(quick: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    n = 200 if quick else 1000
    for _ in range(n):
        j = random_joint(rng, [2, 3, 2], ["X", "Y", "Z"], sparsity=0.2)
        chain = mutual_information(j, ["X"], ["Y", "Z"]) - (
            mutual_information(j, ["X"], ["Z"]) + mutual_information(j, ["X"], ["Y"], ["Z"]))
        worst = max(worst, abs(chain))
        if min(mutual_information(j, ["X"], ["Y"], ["Z"]), entropy(j, ["Y"])) < -1e-9:
            return False, "negative information measure"
        f = DeterministicMap((j.alphabet("Y"),), Alphabet.range("F", 2), rng.integers(0, 2, size=3))
        jf = pushforward(j, f, "F")
        if mutual_information(jf, ["X"], ["F"]) > mutual_information(jf, ["X"], ["Y"]) + 1e-9:
            return False, "data processing violated"
    return worst <= 1e-9, f"{n} joints, worst chain-rule gap {worst:.2e}"


def check_entropy_values(quick: bool) -> tuple[bool, str]:
    h = entropy(FinitePmf(Alphabet.range("X", 2), [0.25, 0.75]))
    u = entropy(FinitePmf(Alphabet.range("X", 4), [0.25] * 4))
    return abs(h - 0.811278124459) < 1e-9 and abs(u - 2.0) < 1e-12, f"H(Bern(0.25)) = {h:.9f}"


def check_exact_vs_batched(quick: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(3)
    problem = zs_example(0.3)
    kernel = SourceKernel(problem)
    worst = 0.0
    for _ in range(5 if quick else 25):
        q = rng.dirichlet(np.ones(2 * 2 * 3), size=2).reshape(2, 2, 2, 3)
        ev = eval_nc(problem, q)
        out = kernel.nc(q.reshape(1, -1), 3)
        worst = max(worst, abs(ev.rate - out["rate"][0]), abs(ev.d1 - out["d1"][0]),
                    abs(ev.embed_slack - out["embed_slack"][0]))
        qc = rng.dirichlet(np.ones(3 * 2 * 2), size=2).reshape(2, 3, 2, 2)
        ev = eval_causal(problem, qc)
        out = kernel.causal(qc.reshape(1, -1), 3, 2)
        worst = max(worst, abs(ev.rate - out["rate"][0]), abs(ev.d2 - out["d2"][0]),
                    abs(ev.embed_slack - out["embed_slack"][0]))
    return worst <= 1e-9, f"worst gap {worst:.2e}"


def check_oracle_rate_distortion(quick: bool) -> tuple[bool, str]:
    res = 100 if quick else 200
    obj, cons, shape = _binary_rd_program(0.11)
    rep = exhaustive_optimum(obj, cons, shape, resolution=res)
    exact = 1.0 - float(binary_entropy(0.11))
    return abs(rep.value - exact) <= 2e-3, f"oracle {rep.value:.6f} vs closed form {exact:.6f}"


def check_solver_vs_oracle(quick: bool) -> tuple[bool, str]:
    res = 20 if quick else 50
    obj, cons, shape = _binary_rd_program(0.2)
    rep = exhaustive_optimum(obj, cons, shape, resolution=res)
    out = minimize_constrained(obj, cons, shape, SolverConfig(grid_resolution=res))
    verdict = cross_check(out, rep, 1e-9, shape=shape)
    return verdict.passed, f"solver {out.value:.6f}, oracle {rep.value:.6f}: {verdict.reason}"


def check_noiseless_side_information(quick: bool) -> tuple[bool, str]:
    cfg = SolverConfig(aux_cardinalities={"U": 2}) if quick else SolverConfig()
    r = solve_nc(zs_example(0.0), 0.0, 0.11, 1.0, cfg).rate
    exact = 1.0 - float(binary_entropy(0.11))
    return abs(r - exact) <= 2e-3, f"rate {r:.6f} vs {exact:.6f}"


def check_binary_endpoints(quick: bool) -> tuple[bool, str]:
    cfg = SolverConfig(grid_resolution=40 if quick else 100)
    one = solve_binary_example(1.0, 0.2, "nc", cfg).rate
    sc = solve_binary_example(0.0, 0.2, "sc", cfg)
    nc = solve_binary_example(0.0, 0.2, "nc", cfg, start=sc)
    ok = abs(one - 1.0) <= 1e-9 and abs(sc.rate - nc.rate) <= 1e-6
    return ok, f"delta=1 rate {one:.9f}; delta=0 sc-nc {sc.rate - nc.rate:.2e}"


def check_ordering(quick: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    cfg = SolverConfig(grid_resolution=6, restarts=1, refine_iters=60)
    worst = -math.inf
    n = 1 if quick else 5
    for _ in range(n):
        p = random_binary_source_problem(rng)
        sc, causal, nc = nested_solves(p, 0.2, 0.3, 0.6, cfg)
        if not (sc.feasible and causal.feasible and nc.feasible):
            return False, "infeasible nested solve"
        worst = max(worst, nc.rate - causal.rate, causal.rate - sc.rate)
    return worst <= 1e-6, f"{n} problems, worst ordering excess {worst:.2e}"


def check_probing(quick: bool) -> tuple[bool, str]:
    sat = [solve_probing(probing_example(0.5, 1.0, 0.6), r1).rate for r1 in (0.0, 0.5, 0.9)]
    mid = solve_probing(probing_example(0.5, 1.0, 0.25), 0.0).rate
    ok = all(abs(s - 0.5) <= 1e-6 for s in sat) and abs(mid - 0.5) <= 1e-4
    return ok, f"saturation {min(sat):.9f}..{max(sat):.9f}, gamma_x=0.25 {mid:.6f}"


def check_transfer_closure(quick: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    for _ in range(100):
        ev = sample_region_bounds(rng)
        got = region_transfer_closure(pentagon_corners(ev.h_b, ev.sum_rate, ev.private_bound))
        want = sum_region_corners(ev.h_b, ev.sum_rate)
        if got != want:
            return False, f"corner mismatch {got} vs {want}"
    return True, "100 sampled instances"


CHECKS: list[tuple[str, Callable[[bool], tuple[bool, str]]]] = [
    ("kernel identities", check_kernel_identities),
    ("entropy values", check_entropy_values),
    ("exact and batched evaluators agree", check_exact_vs_batched),
    ("oracle binary rate-distortion", check_oracle_rate_distortion),
    ("solver never beats oracle bound", check_solver_vs_oracle),
    ("noiseless side information", check_noiseless_side_information),
    ("binary example endpoints", check_binary_endpoints),
    ("nc <= causal <= sc ordering", check_ordering),
    ("probing saturation", check_probing),
    ("rate-transfer closure", check_transfer_closure),
]


def run_selftest(quick: bool = True, checks=None) -> list[CheckResult]:
    out = []
    for name, fn in checks or CHECKS:
        t = time.perf_counter()
        try:
            ok, detail = fn(quick)
        except Exception as exc:  # a crash is a failure of that property
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t))
    return out
