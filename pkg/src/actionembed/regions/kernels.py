"""Batched evaluation of the single-letter expressions.

Every kernel takes an (N, P) parameter array of stacked simplex blocks and
returns a dict of (N,) arrays. These are the solvers' inner loops; the
object-level evaluators in :mod:`.source` recompute the same quantities
through :mod:`actionembed.probability` for the reported witness.
"""
from __future__ import annotations

import itertools
import threading

import numpy as np
from numpy.typing import NDArray

from ..probability import batch_cond_entropy, batch_entropy, batch_mi, binary_entropy
from ..problems import ChannelActionProblem, ProbingProblem, SourceActionProblem
from ..solvers import batch_bayes_distortion, split_blocks


def onehot(table: NDArray, n: int) -> NDArray:
    out = np.zeros(table.shape + (n,))
    np.put_along_axis(out, np.asarray(table)[..., None], 1.0, axis=-1)
    return out


def _same(a, b) -> bool:
    return a is not None and len(a) == len(b) and all(x is y for x, y in zip(a, b))


class Cached:
    """Evaluate a batched kernel once per parameter array and serve several
    functionals (objective, constraints) from the result."""

    def __init__(self, kernel):
        self.kernel = kernel
        self._local = threading.local()

    def __call__(self, theta: NDArray, maps: tuple) -> dict[str, NDArray]:
        loc = self._local
        if getattr(loc, "theta", None) is not theta or not _same(getattr(loc, "maps", None), maps):
            loc.out = self.kernel(theta, maps)
            loc.theta, loc.maps = theta, maps
        return loc.out

    def term(self, name: str, scale: float = 1.0, offset: float = 0.0):
        return lambda theta, maps: scale * self(theta, maps)[name] + offset


class SourceKernel:
    def __init__(self, problem: SourceActionProblem):
        self.problem = problem
        self.px = problem.source.probs
        self.W = problem.side_channel.table  # [x, a, y]
        self.F = onehot(problem.action_map.table, len(problem.B))  # [a, b]
        self.d1 = problem.d1
        self.d2 = problem.d2
        self.lam = problem.action_cost
        self.nx, self.na, self.ny = self.W.shape
        self.nb = self.F.shape[1]
        if problem.f_y is not None:
            self.FY = onehot(problem.f_y.table, len(problem.f_y.codomain))

    # -- decoder-side actions -------------------------------------------------

    def _decoder_joint(self, q: NDArray) -> NDArray:
        """p(x, w, a, u, y) for q[x, w, a, u] with w = Xhat2 or V."""
        return self.px[None, :, None, None, None, None] * q[..., None] * self.W[None, :, None, :, None, :]

    def nc(self, theta: NDArray, n_u: int, strict: bool = False) -> dict[str, NDArray]:
        N = len(theta)
        q = theta.reshape(N, self.nx, len(self.problem.xhat2), self.na, n_u)
        p = self._decoder_joint(q)  # axes X=0, X2=1, A=2, U=3, Y=4
        rate = batch_mi(p, [0], [1, 2]) + batch_mi(p, [0], [3], [1, 2, 4])
        pxza = p.sum(axis=(4, 5))
        pxzb = np.einsum("nxza,ab->nxzb", pxza, self.F)
        info = batch_mi(pxzb, [0], [1, 2])
        room = batch_cond_entropy(pxzb, [2], [1]) if strict else batch_entropy(pxzb, [2])
        return {
            "rate": rate,
            "d1": batch_bayes_distortion(p.sum(axis=(2, 3)), self.d1),
            "d2": np.einsum("nxz,xz->n", pxza.sum(axis=3), self.d2),
            "cost": pxza.sum(axis=(1, 2)) @ self.lam,
            "embed_slack": room - info,
        }

    def causal(self, theta: NDArray, n_v: int, n_u: int) -> dict[str, NDArray]:
        N = len(theta)
        q = theta.reshape(N, self.nx, n_v, self.na, n_u)
        p = self._decoder_joint(q)  # axes X=0, V=1, A=2, U=3, Y=4
        rate = batch_mi(p, [0], [1, 2]) + batch_mi(p, [0], [3], [1, 2, 4])
        pxva = p.sum(axis=(4, 5))
        pxvb = np.einsum("nxva,ab->nxvb", pxva, self.F)
        return {
            "rate": rate,
            "d1": batch_bayes_distortion(p.sum(axis=(2, 3)), self.d1),
            "d2": batch_bayes_distortion(pxvb, self.d2),
            "cost": pxva.sum(axis=(1, 2)) @ self.lam,
            "embed_slack": batch_cond_entropy(pxvb, [2], [1]) - batch_mi(pxvb, [0], [1, 2]),
        }

    # -- encoder-side actions -------------------------------------------------

    def _action_terms(self, pa: NDArray) -> tuple[NDArray, NDArray, NDArray]:
        """H(f_Y(A)), H(f(A)), H(f(A) | f_Y(A)) for a batch of p(a)."""
        pby = np.einsum("na,ab,ay->nby", pa, self.F, self.FY)
        h_y = batch_entropy(pby, [1])
        h_b = batch_entropy(pby, [0])
        return h_y, h_b, batch_cond_entropy(pby, [0], [1])

    def encoder_side(self, theta: NDArray, n_u: int) -> dict[str, NDArray]:
        N = len(theta)
        n1, n2 = len(self.problem.xhat1), len(self.problem.xhat2)
        bu, b1, b2, ba = split_blocks(theta, encoder_side_shape(self.problem, n_u, total=True))
        pu = bu.reshape(N, self.nx, n_u)
        p1 = b1.reshape(N, self.nx, n_u, n1)
        p2 = b2.reshape(N, self.nx, n_u, n2)
        p = self.px[None, :, None, None, None] * pu[..., None, None] * p1[..., :, None] * p2[..., None, :]
        h_y, _, h_b_given_y = self._action_terms(ba)
        pxu = p.sum(axis=(3, 4))
        obj = batch_mi(p, [0], [1, 2]) - h_y
        return {
            "rate": obj,
            "d1": np.einsum("nxk,xk->n", p.sum(axis=(2, 4)), self.d1),
            "d2": np.einsum("nxk,xk->n", p.sum(axis=(2, 3)), self.d2),
            "cost": ba @ self.lam,
            "common_slack": h_y - batch_mi(pxu, [0], [1]),
            "private_slack": h_b_given_y - batch_mi(p.sum(axis=3), [0], [2], [1]),
        }

    def encoder_side_dual(self, theta: NDArray) -> dict[str, NDArray]:
        N = len(theta)
        n1, n2 = len(self.problem.xhat1), len(self.problem.xhat2)
        bq, ba = split_blocks(theta, [self.nx * n1 * n2, self.na])
        q = bq.reshape(N, self.nx, n1, n2)
        p = self.px[None, :, None, None] * q
        h_y, h_b, _ = self._action_terms(ba)
        return {
            "rate": batch_mi(p, [0], [1, 2]) - h_y,
            "d1": np.einsum("nxk,xk->n", p.sum(axis=3), self.d1),
            "d2": np.einsum("nxk,xk->n", p.sum(axis=2), self.d2),
            "cost": ba @ self.lam,
            "embed_slack": h_b - batch_mi(p.sum(axis=2), [0], [1]),
        }


def encoder_side_shape(problem: SourceActionProblem, n_u: int, total: bool = False) -> list[int]:
    """Block dimensions for p(u|x), p(xhat1|u,x), p(xhat2|u,x), p(a).

    With ``total`` the per-row blocks of each factor are merged, which is the
    layout :func:`split_blocks` needs to slice a parameter vector.
    """
    nx, n1, n2, na = len(problem.X), len(problem.xhat1), len(problem.xhat2), len(problem.A)
    if total:
        return [nx * n_u, nx * n_u * n1, nx * n_u * n2, na]
    return [n_u] * nx + [n1] * (nx * n_u) + [n2] * (nx * n_u) + [na]


class ChannelKernel:
    def __init__(self, problem: ChannelActionProblem, n_u: int):
        self.problem = problem
        self.n_u = n_u
        self.Ps = problem.state_channel.table  # [a, s]
        self.W = problem.transmission_channel.table  # [x, s, a, y]
        self.F = onehot(problem.action_map.table, len(problem.B))
        self.gamma = problem.cost  # [a, x]
        self.na, self.ns = self.Ps.shape
        self.nx = self.W.shape[0]

    def shape(self) -> list[int]:
        return [self.na] + [self.n_u] * (self.na * self.ns)

    def strategies(self) -> list[NDArray]:
        """Every map g: U x S -> X as an index table [u, s]."""
        cells = self.n_u * self.ns
        return [np.array(t).reshape(self.n_u, self.ns) for t in itertools.product(range(self.nx), repeat=cells)]

    def joint(self, theta: NDArray, g: NDArray) -> NDArray:
        """p(a, s, u, x, y) for each row; axes A=0, S=1, U=2, X=3, Y=4."""
        N = len(theta)
        pa = theta[:, : self.na]
        pu = theta[:, self.na:].reshape(N, self.na, self.ns, self.n_u)
        G = onehot(g, self.nx).transpose(1, 0, 2)  # [s, u, x]
        Wt = self.W.transpose(2, 1, 0, 3)  # [a, s, x, y]
        return (
            pa[:, :, None, None, None, None]
            * self.Ps[None, :, :, None, None, None]
            * pu[..., None, None]
            * G[None, None, :, :, :, None]
            * Wt[None, :, :, None, :, :]
        )

    def terms(self, theta: NDArray, maps: tuple) -> dict[str, NDArray]:
        (g,) = maps
        p = self.joint(theta, g)
        pb = theta[:, : self.na] @ self.F
        sum_rate = batch_mi(p, [0, 2], [4]) - batch_mi(p, [2], [1], [0])
        pax = p.sum(axis=(2, 3, 5))
        return {
            "sum_rate": sum_rate,
            "h_b": batch_entropy(pb, [0]),
            "cost": np.einsum("nax,ax->n", pax, self.gamma),
            "i_b_y": batch_mi(np.einsum("nasuxy,ab->nby", p, self.F), [0], [1]),
        }


class ProbingKernel:
    """Objective and constraint terms of the probing example.

    Parameters are three binary blocks: (gamma, 1-gamma), (p1, 1-p1),
    (p2, 1-p2) with gamma = Pr[A=1], p1 = Pr[X=1 | S_e=1, A=1] and
    p2 = Pr[X=1 | A=0].
    """

    shape = [2, 2, 2]

    def __init__(self, problem: ProbingProblem):
        self.eps = problem.epsilon

    def terms(self, theta: NDArray, maps: tuple = ()) -> dict[str, NDArray]:
        g, p1, p2 = theta[:, 0], theta[:, 2], theta[:, 4]
        good = 1.0 - self.eps
        return {
            "sum_rate": g * good * binary_entropy(p1) + (1.0 - g) * good * binary_entropy(p2),
            "ex": p1 * g * good + p2 * (1.0 - g),
            "ea": g,
            "h_a": binary_entropy(g),
        }
