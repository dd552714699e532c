"""Symmetric three-parameter reduction of the binary Z/S-channel example.

With D1 = 0, U = Xhat1 = X, f(A) = A and a unit cost budget, the decoder-side
rate becomes I(X; Xhat2, A) + H(X | Xhat2, A, Y). The search runs over

    alpha1 = p(a=1, xhat2=0 | x=0)    alpha2 = p(a=1, xhat2=1 | x=0)
    alpha3 = p(a=0, xhat2=1 | x=0)    alpha0 = 1 - alpha1 - alpha2 - alpha3

with the mirrored completion for x = 1 (flip both a and xhat2), so that the
Decoder 2 distortion is alpha2 + alpha3.
"""
from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from ..problems import Mode, RegionPoint, zs_example
from ..solvers import SolverConfig, minimize_constrained
from .kernels import Cached, SourceKernel
from .source import as_starts, eval_nc

BINARY_CONFIG = SolverConfig(grid_resolution=100, restarts=4, refine_iters=200)

_MODES = {"nc": False, "noncausal": False, "sc": True, "strictly_causal": True}


def _strict(mode) -> bool:
    key = mode.value if isinstance(mode, Mode) else str(mode).lower()
    if key not in _MODES:
        raise ValueError(f"mode must be NC or SC, got {mode!r}")
    return _MODES[key]


def alpha_to_q(alpha: NDArray) -> NDArray:
    """Map (N, 4) rows (alpha1, alpha2, alpha3, alpha0) to q[n, x, xhat2, a]."""
    alpha = np.atleast_2d(alpha)
    a1, a2, a3, a0 = alpha.T
    q = np.empty((len(alpha), 2, 2, 2))
    q[:, 0, 0, 1], q[:, 0, 1, 1], q[:, 0, 1, 0], q[:, 0, 0, 0] = a1, a2, a3, a0
    q[:, 1] = q[:, 0, ::-1, ::-1]
    return q


def _expand(alpha: NDArray) -> NDArray:
    """Full decoder-side parameters q[x, xhat2, a, u] with U = X."""
    q = alpha_to_q(alpha)
    full = np.zeros(q.shape + (2,))
    full[:, 0, ..., 0] = q[:, 0]
    full[:, 1, ..., 1] = q[:, 1]
    return full.reshape(len(alpha), -1)


def _check(delta: float, D2: float) -> None:
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if not 0.0 <= D2 <= 0.5:
        raise ValueError(f"D2 must lie in [0, 0.5], got {D2}")


class BinaryKernel:
    def __init__(self, delta: float, strict: bool):
        self.inner = SourceKernel(zs_example(delta))
        self.strict = strict

    def __call__(self, theta: NDArray, maps: tuple = ()) -> dict[str, NDArray]:
        out = self.inner.nc(_expand(theta), 2, self.strict)
        out["alpha_d2"] = theta[:, 1] + theta[:, 2]
        return out


def solve_binary_example(delta: float, D2: float, mode="nc", config: SolverConfig | None = None,
                         start=None) -> RegionPoint:
    _check(delta, D2)
    strict = _strict(mode)
    config = config or BINARY_CONFIG
    cached = Cached(BinaryKernel(delta, strict))
    cons = [cached.term("alpha_d2", offset=-D2), cached.term("embed_slack", scale=-1.0)]
    out = minimize_constrained(cached.term("rate"), cons, [4], config, "min", starts=as_starts(start))
    kind = "binary/" + ("strictly_causal" if strict else "noncausal")
    targets = {"delta": delta, "D1": 0.0, "D2": D2, "Gamma": 1.0}
    if not out.feasible:
        return RegionPoint(kind, False, {"R": float("nan")}, targets=targets, evaluations=out.evaluations)
    return _point(kind, delta, strict, out.theta, targets, out.evaluations)


def _point(kind, delta, strict, alpha, targets, evaluations) -> RegionPoint:
    q = _expand(alpha[None])[0].reshape(2, 2, 2, 2)
    ev = eval_nc(zs_example(delta), q, strict)
    return RegionPoint(
        kind=kind,
        feasible=True,
        rates={"R": ev.rate},
        distortions={"D1": ev.d1, "D2": ev.d2},
        costs={"Gamma": ev.cost},
        slack={"d2": targets["D2"] - ev.d2, "embedding": ev.embed_slack},
        witness={"alpha": alpha, "q": q, "g": ev.estimators["g"].table},
        theta=alpha,
        maps=(),
        evaluations=evaluations,
        targets=targets,
    )


def binary_example_rate(delta: float, D2: float, mode="nc", config: SolverConfig | None = None) -> float:
    """Best rate found for the symmetric binary example (an upper bound)."""
    return solve_binary_example(delta, D2, mode, config).rate


def decoder2_threshold(delta: float, config: SolverConfig | None = None, rate_tol: float | None = None) -> float:
    """Smallest alpha2 + alpha3 over witnesses that attain the D2 = 0.5 rate.

    ``rate_tol`` is how far above the optimal rate a witness may sit and
    still count as an optimizer; it defaults to the config's value_tol.
    """
    config = config or BINARY_CONFIG
    tol = config.value_tol if rate_tol is None else rate_tol
    best = solve_binary_example(delta, 0.5, "nc", config)
    cached = Cached(BinaryKernel(delta, False))
    cons = [cached.term("rate", offset=-(best.rate + tol)), cached.term("embed_slack", scale=-1.0)]
    out = minimize_constrained(cached.term("alpha_d2"), cons, [4], config, "min", starts=[best.theta])
    return float(out.value) if out.feasible else float(best.theta[1] + best.theta[2])
