"""Problem definitions for action-dependent source and channel coding."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .probability import (
    NORM_TOL,
    Alphabet,
    ConditionalPmf,
    DeterministicMap,
    FinitePmf,
    chain_compose,
    mutual_information,
)


class Mode(str, enum.Enum):
    NON_CAUSAL = "noncausal"
    STRICTLY_CAUSAL = "strictly_causal"
    CAUSAL = "causal"
    ENCODER_SIDE = "encoder_side"
    ENCODER_SIDE_DUAL = "encoder_side_dual"


@dataclass(frozen=True)
class Violation:
    field: str
    condition: str

    def __str__(self) -> str:
        return f"{self.field}: {self.condition}"


@dataclass(frozen=True, eq=False)
class SourceActionProblem:
    """Source X observed by an encoder; Decoder 1 gets side information Y
    through p(y|x,a), Decoder 2 sees only f(A).

    ``d1``/``d2`` are |X| x |Xhat_j| matrices, ``action_cost`` is indexed by A.
    ``f_y`` is only used by the encoder-side modes, where Y = f_y(A).
    """

    source: FinitePmf
    side_channel: ConditionalPmf
    action_map: DeterministicMap
    xhat1: Alphabet
    xhat2: Alphabet
    d1: NDArray
    d2: NDArray
    action_cost: NDArray
    mode: Mode = Mode.NON_CAUSAL
    f_y: DeterministicMap | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("d1", "d2", "action_cost"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))

    @property
    def X(self) -> Alphabet:
        return self.source.alphabet

    @property
    def A(self) -> Alphabet:
        return self.side_channel.inputs[-1]

    @property
    def Y(self) -> Alphabet:
        return self.side_channel.output

    @property
    def B(self) -> Alphabet:
        return self.action_map.codomain

    def with_mode(self, mode: Mode | str) -> "SourceActionProblem":
        return SourceActionProblem(**{**self.__dict__, "mode": Mode(mode)})


@dataclass(frozen=True, eq=False)
class ChannelActionProblem:
    """Actions A set the state S ~ p(s|a); the input X = g(U, S) is sent over
    p(y|x,s,a); Decoder 1 sees f(A)."""

    state_channel: ConditionalPmf
    transmission_channel: ConditionalPmf
    action_map: DeterministicMap
    cost: NDArray

    def __post_init__(self):
        object.__setattr__(self, "cost", np.array(self.cost, dtype=float))

    @property
    def A(self) -> Alphabet:
        return self.state_channel.inputs[0]

    @property
    def S(self) -> Alphabet:
        return self.state_channel.output

    @property
    def X(self) -> Alphabet:
        return self.transmission_channel.inputs[0]

    @property
    def Y(self) -> Alphabet:
        return self.transmission_channel.output

    @property
    def B(self) -> Alphabet:
        return self.action_map.codomain


@dataclass(frozen=True)
class ProbingProblem:
    """Binary probing channel: S ~ Bern(1 - epsilon), BSC(0.5) in the bad
    state S=0 and noiseless in the good state S=1."""

    epsilon: float
    gamma_a_budget: float
    gamma_x_budget: float


@dataclass
class RegionPoint:
    """One evaluated operating point of a region.

    ``rates`` holds ``R`` for source problems and ``R1``/``sum_rate`` for
    channel problems. ``witness`` maps names to the optimizing conditional
    tables (plain nested lists after :meth:`to_dict`).
    """

    kind: str
    feasible: bool
    rates: dict[str, float]
    distortions: dict[str, float] = field(default_factory=dict)
    costs: dict[str, float] = field(default_factory=dict)
    slack: dict[str, float] = field(default_factory=dict)
    witness: dict[str, Any] = field(default_factory=dict)
    theta: NDArray | None = None
    maps: tuple = ()
    evaluations: int = 0
    # requested budgets (D1, D2, Gamma, R1, ...) as opposed to achieved values
    targets: dict[str, float] = field(default_factory=dict)

    @property
    def rate(self) -> float:
        if "R" in self.rates:
            return self.rates["R"]
        return self.rates["sum_rate"]

    def to_dict(self) -> dict[str, Any]:
        def plain(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                v = v.item()
            if isinstance(v, float) and not np.isfinite(v):
                # keep the output strict JSON
                return str(v)
            if isinstance(v, dict):
                return {k: plain(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [plain(x) for x in v]
            return v

        return {
            "kind": self.kind,
            "feasible": self.feasible,
            "rates": plain(self.rates),
            "distortions": plain(self.distortions),
            "costs": plain(self.costs),
            "slack": plain(self.slack),
            "witness": plain(self.witness),
            "targets": plain(self.targets),
            "evaluations": self.evaluations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _matrix_violations(name: str, m: NDArray, shape: tuple[int, ...]) -> list[Violation]:
    out = []
    if m.shape != shape:
        out.append(Violation(name, f"shape {m.shape} differs from expected {shape}"))
        return out
    if not np.all(np.isfinite(m)):
        out.append(Violation(name, "entries must be finite"))
    elif np.any(m < 0):
        out.append(Violation(name, "entries must be >= 0"))
    return out


def _validate_source(p: SourceActionProblem) -> list[Violation]:
    out: list[Violation] = []
    names = p.side_channel.input_names
    if len(names) != 2 or names[0] != p.X.name:
        out.append(Violation("side_channel", f"inputs must be exactly (X, A), got {names}"))
        return out
    A = p.side_channel.inputs[1]
    used = [p.X.name, A.name, p.Y.name, p.B.name, p.xhat1.name, p.xhat2.name]
    if len(set(used)) != len(used) or {"U", "V", "fY"} & set(used):
        out.append(Violation("alphabets", f"variable names must be distinct and avoid U, V, fY; got {used}"))
    if p.action_map.domain_names != (A.name,) or len(p.action_map.domain[0]) != len(A):
        out.append(Violation("action_map", f"domain must be ({A.name},)"))
    out += _matrix_violations("d1", p.d1, (len(p.X), len(p.xhat1)))
    out += _matrix_violations("d2", p.d2, (len(p.X), len(p.xhat2)))
    out += _matrix_violations("action_cost", p.action_cost, (len(A),))
    if p.mode in (Mode.ENCODER_SIDE, Mode.ENCODER_SIDE_DUAL):
        if p.f_y is None:
            out.append(Violation("f_y", "encoder-side modes require the map f_Y: A -> Y"))
            return out
        if p.f_y.domain_names != (A.name,) or p.f_y.codomain.symbols != p.Y.symbols:
            out.append(Violation("f_y", "f_Y must map A into the side-information alphabet"))
            return out
        expected = p.f_y.as_conditional().table
        expected = np.broadcast_to(expected[None], (len(p.X),) + expected.shape)
        if np.abs(expected - p.side_channel.table).max() > NORM_TOL:
            out.append(Violation("side_channel", "must equal the deterministic channel y = f_Y(a)"))
        if p.action_map.domain_names == (A.name,):
            if p.mode is Mode.ENCODER_SIDE and not p.f_y.factors_through(p.action_map):
                out.append(Violation("f_y", "requires H(f_Y(A)|f(A)) = 0 (f_Y must factor through f)"))
            if p.mode is Mode.ENCODER_SIDE_DUAL and not p.action_map.factors_through(p.f_y):
                out.append(Violation("action_map", "requires H(f(A)|f_Y(A)) = 0 (f must factor through f_Y)"))
    return out


def _validate_channel(p: ChannelActionProblem) -> list[Violation]:
    out: list[Violation] = []
    if len(p.state_channel.inputs) != 1:
        out.append(Violation("state_channel", "must be p(s|a)"))
        return out
    names = p.transmission_channel.input_names
    if len(names) != 3 or names[1:] != (p.S.name, p.A.name):
        out.append(Violation("transmission_channel", f"inputs must be exactly (X, S, A), got {names}"))
        return out
    if p.action_map.domain_names != (p.A.name,):
        out.append(Violation("action_map", f"domain must be ({p.A.name},)"))
    out += _matrix_violations("cost", p.cost, (len(p.A), len(p.X)))
    return out


def _validate_probing(p: ProbingProblem) -> list[Violation]:
    out = []
    if not 0.0 <= p.epsilon <= 1.0:
        out.append(Violation("epsilon", "must lie in [0, 1]"))
    if not p.gamma_a_budget >= 0:
        out.append(Violation("gamma_a_budget", "must be >= 0"))
    if not p.gamma_x_budget >= 0:
        out.append(Violation("gamma_x_budget", "must be >= 0"))
    return out


def validate(problem) -> list[Violation]:
    """Return every violated invariant; an empty list means well-formed."""
    if isinstance(problem, SourceActionProblem):
        return _validate_source(problem)
    if isinstance(problem, ChannelActionProblem):
        return _validate_channel(problem)
    if isinstance(problem, ProbingProblem):
        return _validate_probing(problem)
    return [Violation("problem", f"unknown problem type {type(problem).__name__}")]


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

BINARY = ("0", "1")


def hamming(n: int, m: int | None = None) -> NDArray:
    m = n if m is None else m
    return 1.0 - np.eye(n, m)


def zs_channel_table(delta: float) -> NDArray:
    """p(y | x, a) indexed [x, a, y]: Z-channel under a=0, S-channel under a=1."""
    W = np.zeros((2, 2, 2))
    W[0, 0, 0] = 1.0
    W[1, 0, 1], W[1, 0, 0] = 1.0 - delta, delta
    W[1, 1, 1] = 1.0
    W[0, 1, 0], W[0, 1, 1] = 1.0 - delta, delta
    return W


def zs_example(delta: float, mode: Mode | str = Mode.NON_CAUSAL) -> SourceActionProblem:
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    X, A, Y = Alphabet("X", BINARY), Alphabet("A", BINARY), Alphabet("Y", BINARY)
    return SourceActionProblem(
        source=FinitePmf(X, [0.5, 0.5]),
        side_channel=ConditionalPmf(Y, (X, A), zs_channel_table(delta)),
        action_map=DeterministicMap.identity(A, "B"),
        xhat1=Alphabet("Xhat1", BINARY),
        xhat2=Alphabet("Xhat2", BINARY),
        d1=hamming(2),
        d2=hamming(2),
        action_cost=np.array([0.0, 1.0]),
        mode=mode,
    )


def side_information_given_action(problem: SourceActionProblem) -> list[float]:
    """I(X;Y | A=a) for each action a, with the source prior."""
    out = []
    A = problem.A
    for a in range(len(A)):
        chan = ConditionalPmf(problem.Y, (problem.X,), problem.side_channel.table[:, a, :])
        j = chain_compose([problem.source, chan])
        out.append(mutual_information(j, ["X"], [problem.Y.name]))
    return out


def encoder_side_problem(
    source: FinitePmf,
    actions: Alphabet,
    f_y: DeterministicMap,
    f: DeterministicMap,
    xhat1: Alphabet,
    xhat2: Alphabet,
    d1,
    d2,
    action_cost,
    dual: bool = False,
) -> SourceActionProblem:
    """Encoder-side instance with deterministic side information Y = f_y(A)."""
    Y = f_y.codomain
    chan = np.broadcast_to(f_y.as_conditional().table[None], (len(source.alphabet), len(actions), len(Y)))
    return SourceActionProblem(
        source=source,
        side_channel=ConditionalPmf(Y, (source.alphabet, actions), chan),
        action_map=f,
        xhat1=xhat1,
        xhat2=xhat2,
        d1=d1,
        d2=d2,
        action_cost=action_cost,
        mode=Mode.ENCODER_SIDE_DUAL if dual else Mode.ENCODER_SIDE,
        f_y=f_y,
    )


def probing_example(epsilon: float, gamma_a: float, gamma_x: float) -> ProbingProblem:
    p = ProbingProblem(float(epsilon), float(gamma_a), float(gamma_x))
    bad = validate(p)
    if bad:
        raise ValueError("; ".join(map(str, bad)))
    return p


def probing_channel_tables(epsilon: float) -> tuple[NDArray, NDArray]:
    """State pmf [s] and channel p(y|x,s) [x, s, y] of the probing example."""
    ps = np.array([epsilon, 1.0 - epsilon])
    W = np.zeros((2, 2, 2))
    W[:, 0, :] = 0.5
    W[0, 1, 0] = W[1, 1, 1] = 1.0
    return ps, W


def random_binary_source_problem(rng: np.random.Generator, mode: Mode | str = Mode.NON_CAUSAL) -> SourceActionProblem:
    """Random all-binary decoder-side instance (Hamming-like distortions, f = id)."""
    X, A, Y = Alphabet("X", BINARY), Alphabet("A", BINARY), Alphabet("Y", BINARY)
    px = rng.dirichlet([2.0, 2.0])
    W = rng.dirichlet([1.0, 1.0], size=(2, 2))
    d1 = hamming(2) * rng.uniform(0.5, 2.0, size=(2, 2))
    d2 = hamming(2) * rng.uniform(0.5, 2.0, size=(2, 2))
    return SourceActionProblem(
        source=FinitePmf(X, px),
        side_channel=ConditionalPmf(Y, (X, A), W),
        action_map=DeterministicMap.identity(A, "B"),
        xhat1=Alphabet("Xhat1", BINARY),
        xhat2=Alphabet("Xhat2", BINARY),
        d1=d1,
        d2=d2,
        action_cost=np.array([0.0, 1.0]),
        mode=mode,
    )

