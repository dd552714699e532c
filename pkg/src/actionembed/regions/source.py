"""Rate-distortion-cost evaluators and solvers for the source-coding models."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray

from ..probability import (
    Alphabet,
    ConditionalPmf,
    DeterministicMap,
    FinitePmf,
    JointDistribution,
    chain_compose,
    conditional_entropy,
    entropy,
    mutual_information,
    pushforward,
)
from ..problems import Mode, RegionPoint, SourceActionProblem, validate
from ..solvers import SearchOutcome, SolverConfig, SolverError, bayes_estimator, minimize_constrained
from .kernels import Cached, SourceKernel, encoder_side_shape


class ProblemError(ValueError):
    pass


@dataclass
class ObjectiveEval:
    rate: float
    d1: float
    d2: float
    cost: float
    embed_slack: float
    extras: dict[str, float] = field(default_factory=dict)
    estimators: dict[str, DeterministicMap] = field(default_factory=dict)


DEFAULT_CONFIG = SolverConfig()


def aux_cardinality(config: SolverConfig, name: str, bound: int) -> int:
    card = int(config.aux_cardinalities.get(name, bound))
    if card < 1:
        raise SolverError(f"|{name}| must be >= 1")
    if card > bound:
        raise SolverError(f"|{name}| = {card} exceeds the cardinality bound {bound}")
    return card


def _require_valid(problem: SourceActionProblem, modes: Sequence[Mode] | None = None) -> None:
    bad = validate(problem)
    if bad:
        raise ProblemError("; ".join(map(str, bad)))
    if modes is not None and problem.mode not in modes:
        raise ProblemError(f"problem mode {problem.mode.value!r} does not match this solver")


def factor_chain(table: NDArray, inputs: Sequence[Alphabet], outputs: Sequence[Alphabet]) -> list[ConditionalPmf]:
    """Split p(o_1..o_k | inputs) into p(o_1|in) p(o_2|in,o_1) ...

    Rows conditioned on zero-mass events are set uniform; they carry no mass
    in the composed joint.
    """
    table = np.asarray(table, dtype=float)
    k_in = len(inputs)
    out = []
    for k, alph in enumerate(outputs):
        m = table.sum(axis=tuple(range(k_in + k + 1, table.ndim))) if k + 1 < len(outputs) else table
        den = m.sum(axis=-1, keepdims=True)
        cond = np.where(den > 0, m / np.where(den > 0, den, 1.0), 1.0 / m.shape[-1])
        out.append(ConditionalPmf(alph, tuple(inputs) + tuple(outputs[:k]), cond))
    return out


def _expected_distortion(j: JointDistribution, g: DeterministicMap, d: NDArray, source: str) -> float:
    m = j.marginal([source, *g.domain_names]).tensor
    picked = np.take(np.asarray(d), g.table, axis=1)  # [x, *obs]
    return float((m * picked).sum())


def _decoder_joint(problem: SourceActionProblem, q: NDArray, second: Alphabet) -> JointDistribution:
    U = Alphabet.range("U", q.shape[-1])
    factors = [problem.source, *factor_chain(q, [problem.X], [second, problem.A, U]), problem.side_channel]
    return pushforward(chain_compose(factors), problem.action_map, problem.B.name)


def eval_nc(problem: SourceActionProblem, q: NDArray, strict: bool = False) -> ObjectiveEval:
    """Evaluate p(xhat2, a, u | x) given as q[x, xhat2, a, u]."""
    X, X2, A, Y, B = (problem.X.name, problem.xhat2.name, problem.A.name, problem.Y.name, problem.B.name)
    j = _decoder_joint(problem, q, problem.xhat2)
    rate = mutual_information(j, [X], [X2, A]) + mutual_information(j, [X], ["U"], [X2, A, Y])
    g = bayes_estimator(j, ["U", Y], problem.xhat1, problem.d1, source=X)
    room = conditional_entropy(j, [B], [X2]) if strict else entropy(j, [B])
    return ObjectiveEval(
        rate=rate,
        d1=_expected_distortion(j, g, problem.d1, X),
        d2=j.expect([X, X2], problem.d2),
        cost=j.expect([A], problem.action_cost),
        embed_slack=room - mutual_information(j, [X], [X2, B]),
        estimators={"g": g},
    )


def eval_sc(problem: SourceActionProblem, q: NDArray) -> ObjectiveEval:
    return eval_nc(problem, q, strict=True)


def eval_causal(problem: SourceActionProblem, q: NDArray) -> ObjectiveEval:
    """Evaluate p(v, a, u | x) given as q[x, v, a, u]."""
    X, A, Y, B = problem.X.name, problem.A.name, problem.Y.name, problem.B.name
    V = Alphabet.range("V", q.shape[1])
    j = _decoder_joint(problem, q, V)
    rate = mutual_information(j, [X], ["V", A]) + mutual_information(j, [X], ["U"], ["V", A, Y])
    g1 = bayes_estimator(j, ["U", Y], problem.xhat1, problem.d1, source=X)
    g2 = bayes_estimator(j, ["V", B], problem.xhat2, problem.d2, source=X)
    return ObjectiveEval(
        rate=rate,
        d1=_expected_distortion(j, g1, problem.d1, X),
        d2=_expected_distortion(j, g2, problem.d2, X),
        cost=j.expect([A], problem.action_cost),
        embed_slack=conditional_entropy(j, [B], ["V"]) - mutual_information(j, [X], ["V", B]),
        estimators={"g1": g1, "g2": g2},
    )


def _action_joint(problem: SourceActionProblem, pa: NDArray) -> JointDistribution:
    j = FinitePmf(problem.A, pa).as_joint()
    j = pushforward(j, problem.action_map, problem.B.name)
    return pushforward(j, problem.f_y, "fY")


def eval_encoder_side(problem: SourceActionProblem, pu: NDArray, p1: NDArray, p2: NDArray, pa: NDArray) -> ObjectiveEval:
    """pu[x, u], p1[x, u, xhat1], p2[x, u, xhat2] and the action pmf pa[a]."""
    X, X1, X2 = problem.X.name, problem.xhat1.name, problem.xhat2.name
    U = Alphabet.range("U", pu.shape[1])
    j = chain_compose([
        problem.source,
        ConditionalPmf(U, (problem.X,), pu),
        ConditionalPmf(problem.xhat1, (problem.X, U), p1),
        ConditionalPmf(problem.xhat2, (problem.X, U), p2),
    ])
    ja = _action_joint(problem, pa)
    h_y = entropy(ja, ["fY"])
    obj = mutual_information(j, [X], [X1, "U"]) - h_y
    return ObjectiveEval(
        rate=max(0.0, obj),
        d1=j.expect([X, X1], problem.d1),
        d2=j.expect([X, X2], problem.d2),
        cost=ja.expect([problem.A.name], problem.action_cost),
        embed_slack=min(
            h_y - mutual_information(j, [X], ["U"]),
            conditional_entropy(ja, [problem.B.name], ["fY"]) - mutual_information(j, [X], [X2], ["U"]),
        ),
        extras={
            "objective": obj,
            "common_slack": h_y - mutual_information(j, [X], ["U"]),
            "private_slack": conditional_entropy(ja, [problem.B.name], ["fY"])
            - mutual_information(j, [X], [X2], ["U"]),
        },
    )


def eval_encoder_side_dual(problem: SourceActionProblem, q: NDArray, pa: NDArray) -> ObjectiveEval:
    """q[x, xhat1, xhat2] and the action pmf pa[a]."""
    X, X1, X2 = problem.X.name, problem.xhat1.name, problem.xhat2.name
    j = chain_compose([problem.source, *factor_chain(q, [problem.X], [problem.xhat1, problem.xhat2])])
    ja = _action_joint(problem, pa)
    h_y = entropy(ja, ["fY"])
    obj = mutual_information(j, [X], [X1, X2]) - h_y
    return ObjectiveEval(
        rate=max(0.0, obj),
        d1=j.expect([X, X1], problem.d1),
        d2=j.expect([X, X2], problem.d2),
        cost=ja.expect([problem.A.name], problem.action_cost),
        embed_slack=entropy(ja, [problem.B.name]) - mutual_information(j, [X], [X2]),
        extras={"objective": obj},
    )


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def as_starts(start) -> list:
    if start is None:
        return []
    if isinstance(start, (RegionPoint, SearchOutcome)) or isinstance(start, np.ndarray):
        start = [start]
    out = []
    for s in start:
        if isinstance(s, RegionPoint):
            if s.feasible and s.theta is not None:
                out.append((s.theta, s.maps))
        elif isinstance(s, SearchOutcome):
            if s.feasible:
                out.append((s.theta, s.maps))
        else:
            out.append(s)
    return out


def _budget_constraints(cached: Cached, D1: float, D2: float, gamma: float) -> list:
    budgets = {"d1": D1, "d2": D2, "cost": gamma}
    for name, value in budgets.items():
        if math.isnan(value):
            raise ValueError(f"budget {name} is NaN")
    # an infinite budget is no constraint at all
    return [cached.term(name, offset=-value) for name, value in budgets.items() if math.isfinite(value)]


def _point(kind: str, out: SearchOutcome, ev: ObjectiveEval | None, targets: dict, witness: dict) -> RegionPoint:
    if ev is None:
        return RegionPoint(kind, False, {"R": float("nan")}, targets=targets, evaluations=out.evaluations)
    slack = {
        "d1": targets["D1"] - ev.d1,
        "d2": targets["D2"] - ev.d2,
        "cost": targets["Gamma"] - ev.cost,
        "embedding": ev.embed_slack,
    }
    slack.update({k: v for k, v in ev.extras.items() if k.endswith("_slack")})
    rates = {"R": ev.rate}
    if "objective" in ev.extras:
        rates["objective"] = ev.extras["objective"]
    witness = dict(witness)
    witness.update({name: g.table for name, g in ev.estimators.items()})
    return RegionPoint(
        kind=kind,
        feasible=True,
        rates=rates,
        distortions={"D1": ev.d1, "D2": ev.d2},
        costs={"Gamma": ev.cost},
        slack=slack,
        witness=witness,
        theta=out.theta,
        maps=out.maps,
        evaluations=out.evaluations,
        targets=targets,
    )


def _decoder_side(problem, D1, D2, gamma, config, start, strict: bool) -> RegionPoint:
    _require_valid(problem)
    config = config or DEFAULT_CONFIG
    nx, n2, na = len(problem.X), len(problem.xhat2), len(problem.A)
    n_u = aux_cardinality(config, "U", nx * n2 * na + 1)
    kernel = SourceKernel(problem)
    cached = Cached(lambda th, maps: kernel.nc(th, n_u, strict))
    cons = _budget_constraints(cached, D1, D2, gamma) + [cached.term("embed_slack", scale=-1.0)]
    out = minimize_constrained(cached.term("rate"), cons, [n2 * na * n_u] * nx, config, "min", starts=as_starts(start))
    kind = "source/strictly_causal" if strict else "source/noncausal"
    targets = {"D1": D1, "D2": D2, "Gamma": gamma}
    if not out.feasible:
        return _point(kind, out, None, targets, {})
    q = out.theta.reshape(nx, n2, na, n_u)
    return _point(kind, out, eval_nc(problem, q, strict), targets, {"q": q})


def solve_nc(problem: SourceActionProblem, D1: float, D2: float, gamma: float,
             config: SolverConfig | None = None, start=None) -> RegionPoint:
    """Upper bound on R(D1, D2, Gamma) with non-causal action observation."""
    return _decoder_side(problem, D1, D2, gamma, config, start, strict=False)


def solve_sc(problem: SourceActionProblem, D1: float, D2: float, gamma: float,
             config: SolverConfig | None = None, start=None) -> RegionPoint:
    """Upper bound on R(D1, D2, Gamma) with strictly causal action observation."""
    return _decoder_side(problem, D1, D2, gamma, config, start, strict=True)


def solve_causal(problem: SourceActionProblem, D1: float, D2: float, gamma: float,
                 config: SolverConfig | None = None, start=None) -> RegionPoint:
    _require_valid(problem)
    config = config or DEFAULT_CONFIG
    nx, na = len(problem.X), len(problem.A)
    n_v = aux_cardinality(config, "V", nx + 3)
    n_u = aux_cardinality(config, "U", nx * n_v * na + 1)
    kernel = SourceKernel(problem)
    cached = Cached(lambda th, maps: kernel.causal(th, n_v, n_u))
    cons = _budget_constraints(cached, D1, D2, gamma) + [cached.term("embed_slack", scale=-1.0)]
    out = minimize_constrained(cached.term("rate"), cons, [n_v * na * n_u] * nx, config, "min", starts=as_starts(start))
    targets = {"D1": D1, "D2": D2, "Gamma": gamma}
    if not out.feasible:
        return _point("source/causal", out, None, targets, {})
    q = out.theta.reshape(nx, n_v, na, n_u)
    return _point("source/causal", out, eval_causal(problem, q), targets, {"q": q})


def solve_encoder_side(problem: SourceActionProblem, D1: float, D2: float, gamma: float,
                       config: SolverConfig | None = None, start=None) -> RegionPoint:
    """Encoder-side actions with Y = f_Y(A) and H(f_Y(A) | f(A)) = 0."""
    _require_valid(problem, [Mode.ENCODER_SIDE])
    config = config or DEFAULT_CONFIG
    nx, n1, n2 = len(problem.X), len(problem.xhat1), len(problem.xhat2)
    n_u = aux_cardinality(config, "U", nx * n1 * n2 + 3)
    kernel = SourceKernel(problem)
    cached = Cached(lambda th, maps: kernel.encoder_side(th, n_u))
    cons = _budget_constraints(cached, D1, D2, gamma) + [
        cached.term("common_slack", scale=-1.0),
        cached.term("private_slack", scale=-1.0),
    ]
    shape = encoder_side_shape(problem, n_u)
    out = minimize_constrained(cached.term("rate"), cons, shape, config, "min", starts=as_starts(start))
    targets = {"D1": D1, "D2": D2, "Gamma": gamma}
    if not out.feasible:
        return _point("source/encoder_side", out, None, targets, {})
    bu, b1, b2, ba = np.split(out.theta, np.cumsum(encoder_side_shape(problem, n_u, total=True))[:-1])
    w = {"p_u": bu.reshape(nx, n_u), "p_xhat1": b1.reshape(nx, n_u, n1), "p_xhat2": b2.reshape(nx, n_u, n2), "p_a": ba}
    ev = eval_encoder_side(problem, w["p_u"], w["p_xhat1"], w["p_xhat2"], w["p_a"])
    return _point("source/encoder_side", out, ev, targets, w)


def solve_encoder_side_dual(problem: SourceActionProblem, D1: float, D2: float, gamma: float,
                            config: SolverConfig | None = None, start=None) -> RegionPoint:
    """Encoder-side actions with H(f(A) | f_Y(A)) = 0."""
    _require_valid(problem, [Mode.ENCODER_SIDE_DUAL])
    config = config or DEFAULT_CONFIG
    nx, n1, n2, na = len(problem.X), len(problem.xhat1), len(problem.xhat2), len(problem.A)
    kernel = SourceKernel(problem)
    cached = Cached(lambda th, maps: kernel.encoder_side_dual(th))
    cons = _budget_constraints(cached, D1, D2, gamma) + [cached.term("embed_slack", scale=-1.0)]
    shape = [n1 * n2] * nx + [na]
    out = minimize_constrained(cached.term("rate"), cons, shape, config, "min", starts=as_starts(start))
    targets = {"D1": D1, "D2": D2, "Gamma": gamma}
    if not out.feasible:
        return _point("source/encoder_side_dual", out, None, targets, {})
    w = {"p_xhat": out.theta[: nx * n1 * n2].reshape(nx, n1, n2), "p_a": out.theta[nx * n1 * n2:]}
    return _point("source/encoder_side_dual", out, eval_encoder_side_dual(problem, w["p_xhat"], w["p_a"]), targets, w)


SOLVERS = {
    Mode.NON_CAUSAL: solve_nc,
    Mode.STRICTLY_CAUSAL: solve_sc,
    Mode.CAUSAL: solve_causal,
    Mode.ENCODER_SIDE: solve_encoder_side,
    Mode.ENCODER_SIDE_DUAL: solve_encoder_side_dual,
}


def solve_source(problem: SourceActionProblem, D1: float, D2: float, gamma: float,
                 config: SolverConfig | None = None, start=None) -> RegionPoint:
    return SOLVERS[problem.mode](problem, D1, D2, gamma, config, start)


def reevaluate(problem: SourceActionProblem, point: RegionPoint) -> ObjectiveEval:
    """Recompute a feasible point's figures from its stored witness."""
    w = point.witness
    kind = point.kind.split("/", 1)[1]
    if kind == "noncausal":
        return eval_nc(problem, np.asarray(w["q"]))
    if kind == "strictly_causal":
        return eval_sc(problem, np.asarray(w["q"]))
    if kind == "causal":
        return eval_causal(problem, np.asarray(w["q"]))
    if kind == "encoder_side":
        return eval_encoder_side(problem, *(np.asarray(w[k]) for k in ("p_u", "p_xhat1", "p_xhat2", "p_a")))
    if kind == "encoder_side_dual":
        return eval_encoder_side_dual(problem, np.asarray(w["p_xhat"]), np.asarray(w["p_a"]))
    raise ValueError(f"cannot re-evaluate a {point.kind!r} point")


# ---------------------------------------------------------------------------
# nested witness maps (strictly causal -> causal -> non-causal)
# ---------------------------------------------------------------------------


def sc_to_causal_theta(problem: SourceActionProblem, point: RegionPoint, n_v: int, n_u: int) -> NDArray:
    """Embed a strictly causal witness as a causal one with V = Xhat2."""
    q = np.asarray(point.witness["q"])  # [x, xhat2, a, u]
    nx, n2, na, nu = q.shape
    if n_v < n2 or n_u < nu:
        raise SolverError("causal cardinalities too small to embed the strictly causal witness")
    out = np.zeros((nx, n_v, na, n_u))
    out[:, :n2, :, :nu] = q
    return out.ravel()


def causal_to_nc_theta(problem: SourceActionProblem, point: RegionPoint, n_u: int) -> NDArray:
    """Embed a causal witness as a non-causal one with U' = (U, V) and
    Xhat2 = g2(V, f(A))."""
    q = np.asarray(point.witness["q"])  # [x, v, a, u]
    g2 = np.asarray(point.witness["g2"])  # [v, b]
    nx, nv, na, nu = q.shape
    if n_u < nu * nv:
        raise SolverError("non-causal |U| too small to embed the causal witness")
    n2 = len(problem.xhat2)
    fa = problem.action_map.table
    out = np.zeros((nx, n2, na, n_u))
    for v in range(nv):
        for a in range(na):
            out[:, g2[v, fa[a]], a, np.arange(nu) * nv + v] += q[:, v, a, :]
    return out.ravel()


def objective_of(point: RegionPoint) -> Any:
    return point.rates.get("objective", point.rates.get("R"))


def nested_solves(problem: SourceActionProblem, D1: float, D2: float, gamma: float,
                  config: SolverConfig | None = None, n_u_sc: int = 2, n_v: int = 2,
                  n_u_causal: int = 2) -> tuple[RegionPoint, RegionPoint, RegionPoint]:
    """Strictly causal, causal and non-causal solves over nested witness spaces.

    The strictly causal witness seeds the causal search (V = Xhat2) and the
    causal witness seeds the non-causal one (U' = (U, V)), so the returned
    rates satisfy nc <= causal <= sc whenever the seeds stay feasible.
    """
    config = config or DEFAULT_CONFIG
    cards = dict(config.aux_cardinalities)
    sc = solve_sc(problem, D1, D2, gamma, config.replace(aux_cardinalities={**cards, "U": n_u_sc}))
    cfg_c = config.replace(aux_cardinalities={**cards, "V": n_v, "U": n_u_causal})
    starts = [sc_to_causal_theta(problem, sc, n_v, n_u_causal)] if sc.feasible else None
    causal = solve_causal(problem, D1, D2, gamma, cfg_c, start=starts)
    n_u_nc = n_u_causal * n_v
    starts = [causal_to_nc_theta(problem, causal, n_u_nc)] if causal.feasible else None
    nc = solve_nc(problem, D1, D2, gamma, config.replace(aux_cardinalities={**cards, "U": n_u_nc}), start=starts)
    return sc, causal, nc
