"""Constrained search over products of probability simplices.

The search is a quantized grid sweep followed by local refinement from the
best grid points, any warm starts and a few seeded random starts. Values
returned for ``sense="min"`` are upper bounds on the true optimum (every
returned point is feasible); for ``sense="max"`` they are lower bounds.

Objectives and constraints are *batched*: they take an (N, P) array of
stacked simplex blocks plus a tuple of enumerated maps and return (N,)
values. A constraint is satisfied when its value is <= ``feas_tol``.
"""
from __future__ import annotations

import itertools
import logging
import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterator, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from .probability import Alphabet, DeterministicMap, JointDistribution

log = logging.getLogger(__name__)

Batched = Callable[[NDArray, tuple], NDArray]

FD_STEP = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    grid_resolution: int = 20
    restarts: int = 4
    refine_iters: int = 200
    step_shrink: float = 0.5
    feas_tol: float = 1e-9
    value_tol: float = 1e-7
    seed: int = 0
    aux_cardinalities: Mapping[str, int] = field(default_factory=dict)
    threads: int = 1
    # grid sizes above this are coarsened, then sampled
    max_grid_points: int = 500_000
    max_enum_maps: int = 256
    # number of best grid points that seed local refinement
    top_k: int = 3
    # with enumerated maps, the best grid point of this many distinct maps
    # is refined as well
    top_maps: int = 8
    polish: bool = True
    chunk_size: int = 16384

    def __post_init__(self):
        if self.grid_resolution < 1:
            raise ValueError("grid_resolution must be >= 1")
        if self.restarts < 0 or self.refine_iters < 0:
            raise ValueError("restarts and refine_iters must be >= 0")
        if not 0.0 < self.step_shrink < 1.0:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        object.__setattr__(self, "aux_cardinalities", dict(self.aux_cardinalities))

    def replace(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class SearchOutcome:
    value: float
    theta: NDArray | None
    maps: tuple[int, ...]
    feasible: bool
    evaluations: int
    constraint_values: NDArray | None = None
    resolution: int = 0

    def blocks(self, shape: Sequence[int]) -> list[NDArray]:
        return split_blocks(self.theta, shape)


class SolverError(ValueError):
    pass


# ---------------------------------------------------------------------------
# simplex helpers
# ---------------------------------------------------------------------------


def composition_count(dim: int, resolution: int) -> int:
    return math.comb(resolution + dim - 1, dim - 1)


def simplex_grid_array(dim: int, resolution: int) -> NDArray:
    """All compositions of ``resolution`` into ``dim`` parts, scaled to pmfs."""
    if dim < 1 or resolution < 1:
        raise ValueError("dim and resolution must be >= 1")
    if dim == 1:
        return np.ones((1, 1))
    n = resolution + dim - 1
    bars = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(n), dim - 1)),
        dtype=np.int64,
    ).reshape(-1, dim - 1)
    ends = np.column_stack([np.full(len(bars), -1), bars, np.full(len(bars), n)])
    return (np.diff(ends, axis=1) - 1) / resolution


def simplex_grid(dim: int, resolution: int) -> Iterator[NDArray]:
    yield from simplex_grid_array(dim, resolution)


def project_to_simplex(v) -> NDArray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    return project_rows(v[None])[0]


def project_rows(V: NDArray) -> NDArray:
    """Row-wise Euclidean projection of an (N, d) array onto the simplex."""
    V = np.asarray(V, dtype=float)
    d = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    k = np.arange(1, d + 1)
    cond = U - css / k > 0
    rho = d - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(len(V)), rho] / (rho + 1)
    out = np.maximum(V - tau[:, None], 0.0)
    # exact renormalisation removes cumulative rounding in the shift
    return out / out.sum(axis=1, keepdims=True)


def split_blocks(theta: NDArray, shape: Sequence[int]) -> list[NDArray]:
    theta = np.asarray(theta)
    cuts = np.cumsum(shape)[:-1]
    return np.split(theta, cuts, axis=-1)


def project_blocks(theta: NDArray, shape: Sequence[int]) -> NDArray:
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    return np.concatenate([project_rows(b) for b in split_blocks(theta, shape)], axis=1)


def normalize_blocks(theta: NDArray, shape: Sequence[int]) -> NDArray:
    """Clip to >= 0 and rescale each block to unit mass."""
    out = []
    for b in split_blocks(np.atleast_2d(theta), shape):
        b = np.clip(b, 0.0, None)
        s = b.sum(axis=1, keepdims=True)
        out.append(np.where(s > 0, b / np.where(s > 0, s, 1.0), 1.0 / b.shape[1]))
    return np.concatenate(out, axis=1)


def random_blocks(rng: np.random.Generator, shape: Sequence[int], n: int = 1) -> NDArray:
    return np.concatenate([rng.dirichlet(np.ones(d), size=n) for d in shape], axis=1)


# ---------------------------------------------------------------------------
# Bayes elimination of reconstruction functions
# ---------------------------------------------------------------------------


def batch_bayes_distortion(p_x_obs: NDArray, distortion: NDArray) -> NDArray:
    """Minimum expected distortion of any estimator of X from the observation.

    ``p_x_obs`` has shape (N, |X|, *obs) with the joint mass of (X, obs).
    """
    N, nx = p_x_obs.shape[:2]
    flat = p_x_obs.reshape(N, nx, -1)
    cost = np.einsum("nxo,xk->nok", flat, distortion)
    return cost.min(axis=2).sum(axis=1)


def bayes_estimator(
    j: JointDistribution,
    observed: Sequence[str],
    target: Alphabet,
    distortion,
    source: str = "X",
) -> DeterministicMap:
    """Per-observation expected-distortion minimizer, lowest index on ties."""
    if source not in j.names:
        raise SolverError(f"source variable {source!r} is not an axis of the joint")
    distortion = np.asarray(distortion, dtype=float)
    m = j.marginal([source, *observed]).tensor
    cost = np.tensordot(np.moveaxis(m, 0, -1), distortion, axes=([m.ndim - 1], [0]))
    table = np.argmin(cost, axis=-1)
    return DeterministicMap(tuple(j.alphabet(n) for n in observed), target, table)


# ---------------------------------------------------------------------------
# the search
# ---------------------------------------------------------------------------


@dataclass
class _Candidate:
    key: tuple
    theta: NDArray
    maps: tuple[int, ...]
    value: float
    violation: float


class _Program:
    """Bundles the functionals with bookkeeping shared across phases."""

    def __init__(self, objective, constraints, shape, enum_maps, sense, cfg):
        self.objective = objective
        self.constraints = list(constraints)
        self.shape = list(shape)
        self.P = int(sum(shape))
        self.enum_maps = [list(m) for m in enum_maps]
        self.sign = 1.0 if sense == "min" else -1.0
        self.cfg = cfg
        # a sliver of margin so that re-evaluating an accepted witness along
        # a different arithmetic path still lands within feas_tol
        self.tol = cfg.feas_tol * (1.0 - 1e-3)
        self.evaluations = 0
        self._lock = threading.Lock()

    def map_values(self, idx: tuple[int, ...]) -> tuple:
        return tuple(space[i] for space, i in zip(self.enum_maps, idx))

    def evaluate(self, theta: NDArray, idx: tuple[int, ...]) -> tuple[NDArray, NDArray]:
        """Signed objective (min-form) and constraint matrix (N, K)."""
        maps = self.map_values(idx)
        with self._lock:
            self.evaluations += len(theta)
        with np.errstate(all="ignore"):
            f = self.sign * np.asarray(self.objective(theta, maps), dtype=float)
            if self.constraints:
                c = np.column_stack([np.asarray(g(theta, maps), dtype=float) for g in self.constraints])
            else:
                c = np.zeros((len(theta), 0))
        f = np.where(np.isfinite(f), f, np.inf)
        c = np.where(np.isfinite(c), c, np.inf)
        return f, c

    def violation(self, c: NDArray) -> NDArray:
        if c.shape[1] == 0:
            return np.zeros(len(c))
        return np.clip(c, 0.0, None).max(axis=1)

    def candidate(self, theta: NDArray, idx: tuple[int, ...]) -> _Candidate:
        f, c = self.evaluate(theta[None], idx)
        viol = float(self.violation(c)[0])
        return _Candidate(_key(f[0], idx, theta), theta, idx, float(f[0]), viol)

    def feasible(self, cand: _Candidate) -> bool:
        return cand.violation <= self.tol and np.isfinite(cand.value)


def _key(value: float, idx: tuple[int, ...], theta: NDArray) -> tuple:
    return (float(value), tuple(idx), tuple(np.round(theta, 15).tolist()))


def _effective_resolution(shape: Sequence[int], cfg: SolverConfig, n_maps: int) -> tuple[int, bool]:
    """Largest resolution <= the configured one whose grid fits the budget."""
    budget = max(1, cfg.max_grid_points // max(1, n_maps))
    for r in range(cfg.grid_resolution, 0, -1):
        total = math.prod(composition_count(d, r) for d in shape)
        if total <= budget:
            return r, False
    return cfg.grid_resolution, True


def _grid_chunks(shape, resolution, sampled, cfg, n_maps) -> Iterator[NDArray]:
    if sampled:
        budget = max(1, cfg.max_grid_points // max(1, n_maps))
        rng = np.random.default_rng(np.random.SeedSequence([_seed(cfg.seed), 0x9E1D]))
        for start in range(0, budget, cfg.chunk_size):
            n = min(cfg.chunk_size, budget - start)
            blocks = [rng.multinomial(resolution, np.ones(d) / d, size=n) / resolution for d in shape]
            yield np.concatenate(blocks, axis=1)
        return
    grids = [simplex_grid_array(d, resolution) for d in shape]
    sizes = tuple(len(g) for g in grids)
    total = math.prod(sizes)
    for start in range(0, total, cfg.chunk_size):
        flat = np.arange(start, min(total, start + cfg.chunk_size))
        idx = np.unravel_index(flat, sizes)
        yield np.concatenate([g[i] for g, i in zip(grids, idx)], axis=1)


def _seed(seed: int) -> int:
    return int(seed) & 0xFFFFFFFFFFFFFFFF


def _best_rows(f: NDArray, theta: NDArray, idx: tuple[int, ...], k: int) -> list[_Candidate]:
    """Up to k best rows of a chunk by (value, theta) with exact tie handling."""
    if len(f) == 0:
        return []
    if len(f) > k:
        kth = np.partition(f, k - 1)[k - 1]
        sel = np.flatnonzero(f <= kth)
    else:
        sel = np.arange(len(f))
    keys = [theta[sel, j] for j in range(theta.shape[1] - 1, -1, -1)] + [f[sel]]
    order = sel[np.lexsort(keys)][:k]
    return [_Candidate(_key(f[i], idx, theta[i]), theta[i].copy(), idx, float(f[i]), 0.0) for i in order]


def _merge(cands: list[_Candidate], k: int) -> list[_Candidate]:
    out, seen = [], set()
    for c in sorted(cands, key=lambda c: c.key):
        if c.key in seen:
            continue
        seen.add(c.key)
        out.append(c)
        if len(out) == k:
            break
    return out


def _grid_phase(prog: _Program, cfg: SolverConfig) -> tuple[list[_Candidate], list[_Candidate], int]:
    combos = list(itertools.product(*(range(len(m)) for m in prog.enum_maps)))
    resolution, sampled = _effective_resolution(prog.shape, cfg, len(combos))
    if sampled:
        log.info("grid too large even at resolution 1; sampling %d lattice points", cfg.max_grid_points)
    k = cfg.top_k

    def run(job):
        idx, chunk = job
        f, c = prog.evaluate(chunk, idx)
        viol = prog.violation(c)
        ok = viol <= prog.tol
        best = _best_rows(f[ok], chunk[ok], idx, k)
        near = _best_rows(viol, chunk, idx, k)
        for cand in near:
            cand.violation = cand.value
            cand.value = float("inf")
        return best, near

    # the block-uniform point is interior, which coarse grids never are
    center = np.concatenate([np.full(d, 1.0 / d) for d in prog.shape])[None]
    jobs = itertools.chain(
        ((idx, chunk) for idx in combos for chunk in _grid_chunks(prog.shape, resolution, sampled, cfg, len(combos))),
        ((idx, center) for idx in combos),
    )
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    allfeas = [c for r in results for c in r[0]]
    feas = _merge(allfeas, k)
    if prog.enum_maps:
        per_map: dict[tuple, _Candidate] = {}
        for c in allfeas:
            if c.maps not in per_map or c.key < per_map[c.maps].key:
                per_map[c.maps] = c
        feas = _merge(feas + sorted(per_map.values(), key=lambda c: c.key)[: cfg.top_maps], k + cfg.top_maps)
    near = sorted((c for r in results for c in r[1]), key=lambda c: (c.violation, c.key[1:]))[:k]
    return feas, near, resolution


def _fd_batch(theta: NDArray, h: float) -> NDArray:
    P = len(theta)
    X = np.repeat(theta[None], P + 1, axis=0)
    X[1:] += h * np.eye(P)
    return X


def _slsqp(prog: _Program, theta0: NDArray, idx: tuple[int, ...]) -> NDArray | None:
    cfg, shape = prog.cfg, prog.shape
    cache: dict[str, Any] = {}

    def at(x):
        key = x.tobytes()
        if cache.get("key") != key:
            X = normalize_blocks(_fd_batch(x, FD_STEP), shape)
            f, c = prog.evaluate(X, idx)
            f = np.where(np.isfinite(f), f, 1e6)
            c = np.where(np.isfinite(c), c, 1e6)
            cache.update(
                key=key,
                f=f[0],
                g=(f[1:] - f[0]) / FD_STEP,
                c=-c[0],
                J=-(c[1:] - c[0]).T / FD_STEP,
            )
        return cache

    cons = []
    offsets = np.concatenate([[0], np.cumsum(shape)])
    A_eq = np.zeros((len(shape), prog.P))
    for b in range(len(shape)):
        A_eq[b, offsets[b]:offsets[b + 1]] = 1.0
    cons.append({"type": "eq", "fun": lambda x: A_eq @ x - 1.0, "jac": lambda x: A_eq})
    if prog.constraints:
        cons.append({"type": "ineq", "fun": lambda x: at(x)["c"], "jac": lambda x: at(x)["J"]})
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore")
        try:
            res = minimize(
                lambda x: at(x)["f"],
                theta0,
                jac=lambda x: at(x)["g"],
                method="SLSQP",
                bounds=[(0.0, 1.0)] * prog.P,
                constraints=cons,
                options={"maxiter": max(1, cfg.refine_iters), "ftol": 1e-12},
            )
        except (ValueError, ArithmeticError):
            return None
    if not np.all(np.isfinite(res.x)):
        return None
    return project_blocks(res.x, shape)[0]


def _pgd(prog: _Program, start: _Candidate) -> _Candidate:
    """Projected finite-difference gradient descent with rejection."""
    cfg, shape = prog.cfg, prog.shape
    best = start
    step = 0.05
    for _ in range(cfg.refine_iters):
        X = _fd_batch(best.theta, FD_STEP)
        f, _ = prog.evaluate(normalize_blocks(X, shape), best.maps)
        grad = (f[1:] - f[0]) / FD_STEP
        if not np.all(np.isfinite(grad)):
            break
        trial = project_blocks(best.theta - step * grad, shape)[0]
        cand = prog.candidate(trial, best.maps)
        if prog.feasible(cand) and cand.value < best.value:
            best = cand
            step = min(step / cfg.step_shrink, 1.0)
        else:
            step *= cfg.step_shrink
            if step < 1e-12:
                break
    return best


def _refine(prog: _Program, start: _Candidate) -> _Candidate | None:
    cfg = prog.cfg
    pool = [start] if prog.feasible(start) else []
    if cfg.polish and cfg.refine_iters > 0:
        theta = _slsqp(prog, start.theta, start.maps)
        if theta is not None:
            cand = prog.candidate(theta, start.maps)
            if prog.feasible(cand):
                pool.append(cand)
    if not pool:
        return None
    best = min(pool, key=lambda c: c.key)
    if cfg.refine_iters > 0:
        best = _pgd(prog, best)
    return best


def _as_start(prog: _Program, start) -> tuple[NDArray, tuple[int, ...]]:
    if isinstance(start, SearchOutcome):
        theta, idx = start.theta, start.maps
    elif isinstance(start, tuple) and len(start) == 2 and not np.isscalar(start[0]):
        theta, idx = start
    else:
        theta, idx = start, ()
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape != (prog.P,):
        raise SolverError(f"warm start has {theta.size} parameters, expected {prog.P}")
    idx = tuple(idx) if idx else tuple(0 for _ in prog.enum_maps)
    return project_blocks(theta, prog.shape)[0], idx


def minimize_constrained(
    objective: Batched,
    constraints: Sequence[Batched],
    shape: Sequence[int],
    config: SolverConfig,
    sense: str = "min",
    enum_maps: Sequence[Sequence[Any]] = (),
    starts: Sequence[Any] = (),
) -> SearchOutcome:
    """Optimize ``objective`` over a product of simplices subject to
    ``constraint(theta) <= feas_tol`` for every constraint.

    The result is deterministic for a fixed config, including ``threads``.
    """
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    if not shape or min(shape) < 1:
        raise ValueError("every simplex block needs dimension >= 1")
    prog = _Program(objective, constraints, shape, enum_maps, sense, config)
    feas, near, resolution = _grid_phase(prog, config)

    seeds: list[_Candidate] = list(feas) if feas else list(near)
    for s in starts:
        theta, idx = _as_start(prog, s)
        seeds.append(prog.candidate(theta, idx))
    map_order = list(dict.fromkeys(c.maps for c in seeds)) or [tuple(0 for _ in prog.enum_maps)]
    for i in range(config.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([_seed(config.seed), i]))
        seeds.append(prog.candidate(random_blocks(rng, prog.shape)[0], map_order[i % len(map_order)]))

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            refined = list(pool.map(lambda c: _refine(prog, c), seeds))
    else:
        refined = [_refine(prog, c) for c in seeds]
    finals = [c for c in refined if c is not None] + [c for c in feas]
    if not finals:
        return SearchOutcome(float("nan"), None, (), False, prog.evaluations, None, resolution)
    best = min(finals, key=lambda c: c.key)
    f, c = prog.evaluate(best.theta[None], best.maps)
    return SearchOutcome(
        value=float(prog.sign * f[0]),
        theta=best.theta,
        maps=best.maps,
        feasible=True,
        evaluations=prog.evaluations,
        constraint_values=c[0],
        resolution=resolution,
    )
