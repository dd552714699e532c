"""Brute-force reference optima over quantized simplices.

Deliberately shares no search code with :mod:`actionembed.solvers`: the
lattice is generated here, every point is evaluated exactly once, and there
is no randomness or refinement. The result is the exact optimum over the
quantized feasible set.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from numpy.typing import NDArray

Batched = Callable[[NDArray, tuple], NDArray]

DEFAULT_CAP = 10**8


class OracleError(RuntimeError):
    pass


@dataclass
class OracleReport:
    value: float
    witness: NDArray
    maps: tuple[int, ...]
    resolution: int
    points_evaluated: int


@dataclass
class Verdict:
    passed: bool
    reason: str
    lower: float
    upper: float

    def __bool__(self) -> bool:
        return self.passed


def compositions(parts: int, total: int) -> NDArray:
    """Every non-negative integer vector of length ``parts`` summing to ``total``."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for first in range(total, -1, -1):
        rest = compositions(parts - 1, total - first)
        rows.append(np.column_stack([np.full(len(rest), first), rest]))
    return np.vstack(rows)


def lattice_size(shape: Sequence[int], resolution: int) -> int:
    return math.prod(math.comb(resolution + d - 1, d - 1) for d in shape)


def exhaustive_optimum(
    objective: Batched,
    constraints: Sequence[Batched],
    shape: Sequence[int],
    enum_maps: Sequence[Sequence[Any]] = (),
    resolution: int = 10,
    sense: str = "min",
    cap: int = DEFAULT_CAP,
    feas_tol: float = 1e-9,
    chunk: int = 1 << 15,
    threads: int = 1,
) -> OracleReport:
    """Optimum of ``objective`` over the resolution-``r`` lattice of each block
    times every enumerated map, subject to ``constraint <= feas_tol``."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    spaces = [list(m) for m in enum_maps]
    n_maps = math.prod(len(m) for m in spaces)
    total = lattice_size(shape, resolution) * n_maps
    if total > cap:
        raise OracleError(f"lattice has {total} points, above the cap of {cap}")
    blocks = [compositions(d, resolution) / resolution for d in shape]
    sizes = [len(b) for b in blocks]
    n_grid = math.prod(sizes)
    sign = 1.0 if sense == "min" else -1.0

    def job(args):
        idx, start = args
        maps = tuple(space[i] for space, i in zip(spaces, idx))
        flat = np.arange(start, min(n_grid, start + chunk))
        pos = np.unravel_index(flat, sizes)
        theta = np.concatenate([b[p] for b, p in zip(blocks, pos)], axis=1)
        with np.errstate(all="ignore"):
            f = sign * np.asarray(objective(theta, maps), dtype=float)
            ok = np.isfinite(f)
            for g in constraints:
                ok &= np.asarray(g(theta, maps), dtype=float) <= feas_tol
        if not ok.any():
            return None
        f = np.where(ok, f, np.inf)
        best = f.min()
        # lowest lattice position among exact ties keeps the reduction order-free
        i = int(np.flatnonzero(f == best)[0])
        return best, idx, int(flat[i]), theta[i]

    jobs = [(idx, s) for idx in itertools.product(*(range(len(m)) for m in spaces))
            for s in range(0, n_grid, chunk)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, jobs))
    else:
        results = [job(j) for j in jobs]
    results = [r for r in results if r is not None]
    if not results:
        raise OracleError("no lattice point satisfies the constraints")
    best = min(results, key=lambda r: (r[0], r[1], r[2]))
    return OracleReport(float(sign * best[0]), best[3], tuple(best[1]), resolution, total)


def quantization_bound(resolution: int, shape: Sequence[int], lipschitz: float | None = None) -> float:
    """Heuristic gap between the lattice optimum and the true optimum.

    Rounding a pmf to the lattice moves it by at most (d - 1)/r in total
    variation per block. Entropies are not Lipschitz at the boundary, so the
    default constant 2 log2(e r d_max) grows with the resolution the way the
    entropy modulus of continuity does. Treat the bound as generous, not
    rigorous.
    """
    steps = sum(d - 1 for d in shape) / resolution
    if lipschitz is None:
        lipschitz = 2.0 * math.log2(math.e * resolution * max(shape))
    return lipschitz * steps


def cross_check(solver_value, oracle: OracleReport, tol: float, sense: str = "min",
                bound: float | None = None, shape: Sequence[int] | None = None) -> Verdict:
    """Is a solver value consistent with the lattice optimum?

    For ``sense="min"`` the solver (which refines off the lattice) may beat the
    oracle by at most the quantization bound, and must not be worse than it by
    more than ``tol``. Mirrored for maximization.
    """
    value = float(getattr(solver_value, "value", getattr(solver_value, "rate", solver_value)))
    if bound is None:
        bound = quantization_bound(oracle.resolution, shape) if shape is not None else 0.0
    if sense == "min":
        lower, upper = oracle.value - bound - tol, oracle.value + tol
    elif sense == "max":
        lower, upper = oracle.value - tol, oracle.value + bound + tol
    else:
        raise ValueError("sense must be 'min' or 'max'")
    if not math.isfinite(value):
        return Verdict(False, "solver value is not finite", lower, upper)
    if value < lower:
        return Verdict(False, f"solver value {value:.9g} below the admissible range [{lower:.9g}, {upper:.9g}]",
                       lower, upper)
    if value > upper:
        return Verdict(False, f"solver value {value:.9g} above the admissible range [{lower:.9g}, {upper:.9g}]",
                       lower, upper)
    return Verdict(True, "consistent", lower, upper)
