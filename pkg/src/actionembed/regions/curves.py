"""Budget sweeps and the figure tables built from them."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ..problems import RegionPoint, probing_example
from ..solvers import SolverConfig
from .binary import BINARY_CONFIG, solve_binary_example
from .channel import PROBING_CONFIG, solve_probing

log = logging.getLogger(__name__)

FIG7_DELTAS = (0.2, 0.5, 0.8)
FIG7_D2 = tuple(np.round(np.arange(0.05, 0.5 + 1e-9, 0.025), 6))
FIG8_DELTAS = tuple(np.round(np.arange(0.0, 1.0 + 1e-9, 0.1), 6))
FIG8_D2 = (0.1, 0.2, 0.3)
FIG11_EPSILON = 0.5
FIG11_GAMMA_A = 1.0
FIG11_R1 = (0.0, 0.5, 0.9)
FIG11_GAMMA_X = tuple(np.round(np.arange(0.0, 0.6 + 1e-9, 0.025), 6))


@dataclass
class TradeoffCurve:
    sweep_var: str
    values: list[float]
    points: list[RegionPoint]
    # indices i where points[i] breaks the expected monotone trend
    flagged: list[int] = field(default_factory=list)

    @property
    def rates(self) -> list[float]:
        return [p.rate if p.feasible else float("nan") for p in self.points]


def trace_curve(
    solve: Callable[..., RegionPoint],
    fixed: dict[str, Any],
    sweep_var: str,
    grid: Sequence[float],
    config: SolverConfig | None = None,
    warm_start: bool = True,
    trend: str = "nonincreasing",
    tol: float | None = None,
) -> TradeoffCurve:
    """Solve at each grid value in order, seeding each solve with the
    previous witness.

    ``trend`` is the direction the rate should move along the grid
    ("nonincreasing", "nondecreasing" or "none"); departures beyond ``tol``
    are recorded in ``flagged`` and logged rather than hidden.
    """
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("sweep grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("sweep grid must be sorted")
    tol = (config.value_tol if config else 1e-7) if tol is None else tol
    points: list[RegionPoint] = []
    prev = None
    for v in grid:
        kwargs = dict(fixed)
        kwargs[sweep_var] = v
        if config is not None:
            kwargs["config"] = config
        if warm_start and prev is not None and prev.feasible:
            kwargs["start"] = prev
        pt = solve(**kwargs)
        points.append(pt)
        if pt.feasible:
            prev = pt
    flagged = []
    last = None
    for i, p in enumerate(points):
        if not p.feasible:
            continue
        if last is not None:
            step = p.rate - last
            if (trend == "nonincreasing" and step > tol) or (trend == "nondecreasing" and step < -tol):
                flagged.append(i)
                log.warning("rate moves against the %s trend at %s=%g by %.3g", trend, sweep_var, grid[i], step)
        last = p.rate
    return TradeoffCurve(sweep_var, grid, points, flagged)


# ---------------------------------------------------------------------------
# figure tables
# ---------------------------------------------------------------------------


def fig7_rows(config: SolverConfig | None = None, deltas=FIG7_DELTAS, d2_grid=FIG7_D2) -> list[tuple]:
    """(delta, d2, rate_nc) for the symmetric binary example."""
    config = config or BINARY_CONFIG
    rows = []
    for delta in deltas:
        curve = trace_curve(solve_binary_example, {"delta": delta, "mode": "nc"}, "D2", d2_grid, config)
        rows += [(delta, d2, p.rate) for d2, p in zip(curve.values, curve.points)]
    return rows


def fig8_rows(config: SolverConfig | None = None, deltas=FIG8_DELTAS, d2_grid=FIG8_D2) -> list[tuple]:
    """(delta, d2, rate_nc, rate_sc, diff) with diff = rate_sc - rate_nc.

    The strictly causal witness is feasible for the non-causal problem, so
    each non-causal solve starts from it.
    """
    config = config or BINARY_CONFIG
    rows = []
    for d2 in d2_grid:
        for delta in deltas:
            sc = solve_binary_example(delta, d2, "sc", config)
            nc = solve_binary_example(delta, d2, "nc", config, start=sc)
            rows.append((delta, d2, nc.rate, sc.rate, sc.rate - nc.rate))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def fig11_rows(config: SolverConfig | None = None, gamma_x_grid=FIG11_GAMMA_X, r1_values=FIG11_R1,
               epsilon: float = FIG11_EPSILON, gamma_a: float = FIG11_GAMMA_A) -> list[tuple]:
    """(gamma_x, r1, sum_rate) for the probing example.

    Per budget the largest R1 is solved first; its witness seeds every
    smaller R1 (a looser embedding constraint), and each R1 also starts from
    its own witness at the previous, smaller budget.
    """
    config = config or PROBING_CONFIG
    order = sorted(r1_values, reverse=True)
    prev: dict[float, RegionPoint] = {}
    by_r1: dict[float, list[tuple]] = {r: [] for r in r1_values}
    for gx in gamma_x_grid:
        problem = probing_example(epsilon, gamma_a, gx)
        tighter = None
        for r1 in order:
            starts = [p for p in (prev.get(r1), tighter) if p is not None and p.feasible]
            pt = solve_probing(problem, r1, config, start=starts)
            by_r1[r1].append((gx, r1, pt.rate if pt.feasible else float("nan")))
            prev[r1] = pt
            tighter = pt
    return [row for r1 in r1_values for row in by_r1[r1]]
