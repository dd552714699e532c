"""Finite-alphabet probability tensors and Shannon information measures.

All quantities are in bits. Joint distributions are dense numpy tensors with
one named axis per random variable. The ``batch_*`` helpers operate on a
leading batch axis and are what the solvers use in their inner loops; the
object API below is a thin, validated layer over the same arithmetic.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.typing import NDArray

NORM_TOL = 1e-9


class ProbabilityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# batched kernels
# ---------------------------------------------------------------------------


def plogp_sum(p: NDArray) -> NDArray:
    """Return -sum p log2 p over all axes but the first (0 log 0 = 0)."""
    flat = p.reshape(p.shape[0], -1)
    safe = np.where(flat > 0, flat, 1.0)
    return -(np.where(flat > 0, flat * np.log2(safe), 0.0)).sum(axis=1)


def batch_entropy(p: NDArray, keep: Iterable[int]) -> NDArray:
    """Entropy of the marginal on ``keep`` for a batch of joints.

    ``p`` has shape (N, d_0, ..., d_{k-1}); ``keep`` indexes the d-axes.
    """
    keep = tuple(sorted(set(keep)))
    if not keep:
        return np.zeros(p.shape[0])
    drop = tuple(i + 1 for i in range(p.ndim - 1) if i not in keep)
    marg = p.sum(axis=drop) if drop else p
    return plogp_sum(marg)


def batch_mi(p: NDArray, left: Iterable[int], right: Iterable[int], given: Iterable[int] = ()) -> NDArray:
    """I(left; right | given) for a batch of joints, via four entropies."""
    left, right, given = set(left), set(right), set(given)
    return (
        batch_entropy(p, left | given)
        + batch_entropy(p, right | given)
        - batch_entropy(p, left | right | given)
        - batch_entropy(p, given)
    )


def batch_cond_entropy(p: NDArray, target: Iterable[int], given: Iterable[int] = ()) -> NDArray:
    target, given = set(target), set(given)
    return batch_entropy(p, target | given) - batch_entropy(p, given)


def binary_entropy(p) -> NDArray:
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        h -= np.where(q > 0, q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return h


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Alphabet:
    name: str
    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        if not self.symbols:
            raise ProbabilityError(f"alphabet {self.name!r} is empty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ProbabilityError(f"alphabet {self.name!r} has duplicate symbols")

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol) -> int:
        try:
            return self.symbols.index(str(symbol))
        except ValueError:
            raise ProbabilityError(f"{symbol!r} is not a symbol of {self.name!r}") from None

    def renamed(self, name: str) -> "Alphabet":
        return Alphabet(name, self.symbols)

    @classmethod
    def range(cls, name: str, size: int) -> "Alphabet":
        return cls(name, tuple(str(i) for i in range(size)))


def _check_pmf_rows(table: NDArray, what: str) -> None:
    if not np.all(np.isfinite(table)):
        raise ProbabilityError(f"{what}: non-finite entries")
    if np.any(table < 0):
        raise ProbabilityError(f"{what}: negative entries")
    sums = table.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > NORM_TOL):
        raise ProbabilityError(f"{what}: rows do not sum to 1 (max error {np.abs(sums - 1).max():.3g})")


@dataclass(frozen=True, eq=False)
class FinitePmf:
    alphabet: Alphabet
    probs: NDArray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (len(self.alphabet),):
            raise ProbabilityError(f"pmf over {self.alphabet.name!r} has shape {probs.shape}")
        _check_pmf_rows(probs, f"pmf over {self.alphabet.name!r}")
        probs = probs / probs.sum()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def name(self) -> str:
        return self.alphabet.name

    def entropy(self) -> float:
        return float(plogp_sum(self.probs[None])[0])

    def as_joint(self) -> "JointDistribution":
        return JointDistribution((self.alphabet,), self.probs)


@dataclass(frozen=True, eq=False)
class ConditionalPmf:
    """p(output | inputs); ``table`` is indexed [*inputs, output]."""

    output: Alphabet
    inputs: tuple[Alphabet, ...]
    table: NDArray

    def __post_init__(self):
        inputs = tuple(self.inputs)
        object.__setattr__(self, "inputs", inputs)
        table = np.array(self.table, dtype=float)
        shape = tuple(len(a) for a in inputs) + (len(self.output),)
        if table.shape != shape:
            raise ProbabilityError(
                f"conditional pmf of {self.output.name!r} has shape {table.shape}, expected {shape}"
            )
        _check_pmf_rows(table, f"conditional pmf of {self.output.name!r}")
        table = table / table.sum(axis=-1, keepdims=True)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.inputs)

    def row(self, *symbols) -> FinitePmf:
        idx = tuple(a.index(s) for a, s in zip(self.inputs, symbols))
        return FinitePmf(self.output, self.table[idx])


@dataclass(frozen=True, eq=False)
class DeterministicMap:
    """A total function from the product of ``domain`` alphabets to ``codomain``.

    ``table`` holds codomain indices, shaped by the domain sizes.
    """

    domain: tuple[Alphabet, ...]
    codomain: Alphabet
    table: NDArray

    def __post_init__(self):
        domain = tuple(self.domain)
        object.__setattr__(self, "domain", domain)
        table = np.array(self.table, dtype=np.int64)
        shape = tuple(len(a) for a in domain)
        if table.shape != shape:
            raise ProbabilityError(f"map table has shape {table.shape}, expected {shape}")
        if np.any(table < 0) or np.any(table >= len(self.codomain)):
            raise ProbabilityError(f"map into {self.codomain.name!r} has out-of-range images")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @classmethod
    def from_function(cls, domain: Sequence[Alphabet], codomain: Alphabet, fn) -> "DeterministicMap":
        shape = tuple(len(a) for a in domain)
        table = np.zeros(shape, dtype=np.int64)
        for idx in itertools.product(*(range(n) for n in shape)):
            syms = [a.symbols[i] for a, i in zip(domain, idx)]
            table[idx] = codomain.index(fn(*syms))
        return cls(tuple(domain), codomain, table)

    @classmethod
    def identity(cls, alphabet: Alphabet, codomain_name: str) -> "DeterministicMap":
        return cls((alphabet,), alphabet.renamed(codomain_name), np.arange(len(alphabet)))

    @property
    def domain_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.domain)

    def __call__(self, *symbols) -> str:
        idx = tuple(a.index(s) for a, s in zip(self.domain, symbols))
        return self.codomain.symbols[int(self.table[idx])]

    def as_conditional(self) -> ConditionalPmf:
        onehot = np.zeros(self.table.shape + (len(self.codomain),))
        np.put_along_axis(onehot, self.table[..., None], 1.0, axis=-1)
        return ConditionalPmf(self.codomain, self.domain, onehot)

    def factors_through(self, other: "DeterministicMap") -> bool:
        """True iff self = h(other) for some h, i.e. H(self | other) = 0."""
        if self.domain_names != other.domain_names:
            raise ProbabilityError("maps have different domains")
        seen: dict[int, int] = {}
        for a, b in zip(other.table.ravel(), self.table.ravel()):
            if seen.setdefault(int(a), int(b)) != int(b):
                return False
        return True


@dataclass(frozen=True, eq=False)
class JointDistribution:
    axes: tuple[Alphabet, ...]
    tensor: NDArray = field(repr=False)

    def __post_init__(self):
        axes = tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise ProbabilityError(f"duplicate variable names in {names}")
        t = np.array(self.tensor, dtype=float)
        if t.shape != tuple(len(a) for a in axes):
            raise ProbabilityError(f"tensor shape {t.shape} does not match axes {names}")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ProbabilityError("joint has negative or non-finite entries")
        total = t.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise ProbabilityError(f"joint mass is {total!r}, not 1")
        t = t / total
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ProbabilityError(f"unknown variable {name!r}; have {self.names}") from None

    def alphabet(self, name: str) -> Alphabet:
        return self.axes[self.axis(name)]

    def _axes_of(self, names: Iterable[str]) -> tuple[int, ...]:
        if isinstance(names, str):
            names = (names,)
        return tuple(self.axis(n) for n in names)

    def marginal(self, keep: Iterable[str]) -> "JointDistribution":
        return marginalize(self, keep)

    def entropy(self, names: Iterable[str]) -> float:
        return float(batch_entropy(self.tensor[None], self._axes_of(names))[0])

    def conditional(self, target: Sequence[str], given: Sequence[str]) -> NDArray:
        """p(target | given) as an array indexed [*given, *target].

        Zero-mass conditioning rows are returned as all zeros.
        """
        m = marginalize(self, list(given) + list(target)).tensor
        den = m.sum(axis=tuple(range(len(given), m.ndim)), keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(den > 0, m / np.where(den > 0, den, 1.0), 0.0)

    def expect(self, names: Sequence[str], values: NDArray) -> float:
        """E[v(names)] where ``values`` is indexed by the named variables."""
        m = marginalize(self, names).tensor
        return float((m * np.asarray(values, dtype=float)).sum())


PmfLike = Union[FinitePmf, JointDistribution]


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def entropy(p: PmfLike, names: Iterable[str] | None = None) -> float:
    if isinstance(p, FinitePmf):
        return p.entropy()
    if names is None:
        names = p.names
    return p.entropy(names)


def marginalize(j: JointDistribution, keep: Iterable[str]) -> JointDistribution:
    if isinstance(keep, str):
        keep = (keep,)
    keep = list(dict.fromkeys(keep))
    if not keep:
        raise ProbabilityError("marginalize needs at least one variable")
    idx = [j.axis(n) for n in keep]
    drop = tuple(i for i in range(len(j.axes)) if i not in idx)
    t = j.tensor.sum(axis=drop) if drop else j.tensor
    # remaining axes are in original order; permute to the requested order
    remaining = [i for i in range(len(j.axes)) if i in idx]
    t = np.transpose(t, [remaining.index(i) for i in idx])
    return JointDistribution(tuple(j.axes[i] for i in idx), t)


def _disjoint(*groups: Iterable[str]) -> list[set[str]]:
    sets = [set([g]) if isinstance(g, str) else set(g) for g in groups]
    for a, b in itertools.combinations(sets, 2):
        if a & b:
            raise ProbabilityError(f"variable sets overlap: {sorted(a & b)}")
    return sets


def mutual_information(
    j: JointDistribution,
    left: Iterable[str],
    right: Iterable[str],
    given: Iterable[str] = (),
) -> float:
    left, right, given = _disjoint(left, right, given)
    if not left or not right:
        raise ProbabilityError("mutual information needs non-empty left and right sets")
    lt, rt, gv = (j._axes_of(s) for s in (left, right, given))
    return float(batch_mi(j.tensor[None], lt, rt, gv)[0])


def conditional_entropy(j: JointDistribution, target: Iterable[str], given: Iterable[str] = ()) -> float:
    target, given = _disjoint(target, given)
    return j.entropy(target | given) - (j.entropy(given) if given else 0.0)


def pushforward(j: JointDistribution, fmap: DeterministicMap, new_var: str) -> JointDistribution:
    """Adjoin ``new_var`` = fmap(domain variables) as a last axis."""
    if new_var in j.names:
        raise ProbabilityError(f"variable {new_var!r} already present")
    dom_axes = j._axes_of(fmap.domain_names)
    for ax, alph in zip(dom_axes, fmap.domain):
        if len(j.axes[ax]) != len(alph):
            raise ProbabilityError(f"map domain {alph.name!r} does not match the joint's alphabet")
    ind = _broadcast_factor(fmap.as_conditional().table, dom_axes, [len(a) for a in j.axes])
    return JointDistribution(j.axes + (fmap.codomain.renamed(new_var),), j.tensor[..., None] * ind)


def _broadcast_factor(table: NDArray, in_idx: Sequence[int], sizes: Sequence[int]) -> NDArray:
    """Reshape a [*inputs, out] table to broadcast against a joint with ``sizes``."""
    in_idx = list(in_idx)
    ranks = list(np.argsort(np.argsort(in_idx))) if in_idx else []
    t = np.moveaxis(table, list(range(len(in_idx))), ranks)
    shape = [1] * len(sizes) + [table.shape[-1]]
    for i in in_idx:
        shape[i] = sizes[i]
    return t.reshape(shape)


Factor = Union[FinitePmf, ConditionalPmf, DeterministicMap]


def chain_compose(factors: Sequence[Factor]) -> JointDistribution:
    """Multiply factors p(v1) p(v2|...) ... into one joint over all variables."""
    if not factors:
        raise ProbabilityError("chain_compose needs at least one factor")
    axes: list[Alphabet] = []
    tensor = np.ones(())
    for fac in factors:
        if isinstance(fac, DeterministicMap):
            fac = fac.as_conditional()
        if isinstance(fac, FinitePmf):
            inputs, outputs, table = (), (fac.alphabet,), fac.probs
        elif isinstance(fac, ConditionalPmf):
            inputs, outputs, table = fac.inputs, (fac.output,), fac.table
        else:
            raise TypeError(f"unsupported factor {type(fac).__name__}")
        names = [a.name for a in axes]
        for a in inputs:
            if a.name not in names:
                raise ProbabilityError(f"conditioning variable {a.name!r} not yet introduced")
        for a in outputs:
            if a.name in names:
                raise ProbabilityError(f"variable {a.name!r} introduced twice")
        in_idx = [names.index(a.name) for a in inputs]
        t = _broadcast_factor(table, in_idx, [len(a) for a in axes])
        tensor = tensor[..., None] * t
        axes.extend(outputs)
    return JointDistribution(tuple(axes), tensor)


def random_joint(rng: np.random.Generator, sizes: Sequence[int], names: Sequence[str] | None = None,
                 sparsity: float = 0.0) -> JointDistribution:
    """Dirichlet-random joint over small alphabets, optionally with zeroed cells."""
    names = names or [f"V{i}" for i in range(len(sizes))]
    t = rng.dirichlet(np.ones(int(np.prod(sizes)))).reshape(sizes)
    if sparsity > 0:
        mask = rng.random(t.shape) < sparsity
        if mask.all():
            mask.flat[0] = False
        t = np.where(mask, 0.0, t)
        t /= t.sum()
    return JointDistribution(tuple(Alphabet.range(n, s) for n, s in zip(names, sizes)), t)
