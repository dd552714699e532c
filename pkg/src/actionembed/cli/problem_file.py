"""JSON problem files.

Source problem::

    {
      "kind": "source",
      "mode": "noncausal",
      "alphabets": {"X": ["0", "1"], "A": [...], "Y": [...], "B": [...],
                    "Xhat1": [...], "Xhat2": [...]},
      "pmfs": {"source": {"variable": "X", "probs": [0.5, 0.5]}},
      "channels": {"side_information": {"output": "Y", "inputs": ["X", "A"],
                                        "table": [[[...]]]}},
      "maps": {"f": {"domain": ["A"], "codomain": "B",
                     "table": {"0": "0", "1": "1"}}},
      "reconstructions": {"xhat1": "Xhat1", "xhat2": "Xhat2"},
      "distortions": {"d1": [[0, 1], [1, 0]], "d2": [[0, 1], [1, 0]]},
      "costs": {"action": [0, 1]}
    }

Encoder-side modes add ``maps.f_y`` (A -> Y). Channel problems use
``channels.state`` (S given A) and ``channels.transmission`` (Y given X, S, A)
with ``costs.input`` indexed [a][x]. Probing problems are just
``{"kind": "probing", "epsilon": .., "gamma_a": .., "gamma_x": ..}``.

Tables are nested arrays in row-major axis order: inputs first, output last.
Map tables are keyed by comma-joined domain symbols.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from ..probability import Alphabet, ConditionalPmf, DeterministicMap, FinitePmf, ProbabilityError
from ..problems import ChannelActionProblem, Mode, ProbingProblem, SourceActionProblem, validate


class ProblemFileError(ValueError):
    pass


def _need(doc: dict, *keys: str) -> Any:
    cur: Any = doc
    path = []
    for k in keys:
        path.append(k)
        if not isinstance(cur, dict) or k not in cur:
            raise ProblemFileError(f"missing key {'.'.join(path)!r}")
        cur = cur[k]
    return cur


def _alphabets(doc: dict) -> dict[str, Alphabet]:
    raw = _need(doc, "alphabets")
    if not isinstance(raw, dict):
        raise ProblemFileError("'alphabets' must map names to symbol arrays")
    try:
        return {name: Alphabet(name, tuple(str(s) for s in syms)) for name, syms in raw.items()}
    except (ValueError, TypeError) as exc:
        raise ProblemFileError(f"bad alphabet: {exc}") from exc


def _alphabet(alph: dict[str, Alphabet], name: str, where: str) -> Alphabet:
    if name not in alph:
        raise ProblemFileError(f"{where} refers to undefined alphabet {name!r}")
    return alph[name]


def _channel(alph, entry: dict, where: str) -> ConditionalPmf:
    out = _alphabet(alph, _need(entry, "output"), where)
    ins = tuple(_alphabet(alph, n, where) for n in _need(entry, "inputs"))
    return ConditionalPmf(out, ins, np.array(_need(entry, "table"), dtype=float))


def _map(alph, entry: dict, where: str) -> DeterministicMap:
    dom = tuple(_alphabet(alph, n, where) for n in _need(entry, "domain"))
    cod = _alphabet(alph, _need(entry, "codomain"), where)
    raw = _need(entry, "table")
    table = np.zeros(tuple(len(a) for a in dom), dtype=np.int64)
    for idx in np.ndindex(*table.shape):
        key = ",".join(a.symbols[i] for a, i in zip(dom, idx))
        if key not in raw:
            raise ProblemFileError(f"{where} has no image for domain point {key!r}")
        try:
            table[idx] = cod.index(str(raw[key]))
        except (ValueError, KeyError) as exc:
            raise ProblemFileError(f"{where}: {exc}") from exc
    return DeterministicMap(dom, cod, table)


def problem_from_dict(doc: dict):
    if not isinstance(doc, dict):
        raise ProblemFileError("problem file must hold a JSON object")
    kind = _need(doc, "kind")
    try:
        if kind == "probing":
            return ProbingProblem(float(_need(doc, "epsilon")), float(_need(doc, "gamma_a")),
                                  float(_need(doc, "gamma_x")))
        alph = _alphabets(doc)
        if kind == "source":
            src = _need(doc, "pmfs", "source")
            maps = _need(doc, "maps")
            f_y = _map(alph, maps["f_y"], "maps.f_y") if "f_y" in maps else None
            return SourceActionProblem(
                source=FinitePmf(_alphabet(alph, _need(src, "variable"), "pmfs.source"),
                                 np.array(_need(src, "probs"), dtype=float)),
                side_channel=_channel(alph, _need(doc, "channels", "side_information"), "channels.side_information"),
                action_map=_map(alph, _need(doc, "maps", "f"), "maps.f"),
                xhat1=_alphabet(alph, _need(doc, "reconstructions", "xhat1"), "reconstructions.xhat1"),
                xhat2=_alphabet(alph, _need(doc, "reconstructions", "xhat2"), "reconstructions.xhat2"),
                d1=np.array(_need(doc, "distortions", "d1"), dtype=float),
                d2=np.array(_need(doc, "distortions", "d2"), dtype=float),
                action_cost=np.array(_need(doc, "costs", "action"), dtype=float),
                mode=Mode(doc.get("mode", "noncausal")),
                f_y=f_y,
            )
        if kind == "channel":
            return ChannelActionProblem(
                state_channel=_channel(alph, _need(doc, "channels", "state"), "channels.state"),
                transmission_channel=_channel(alph, _need(doc, "channels", "transmission"), "channels.transmission"),
                action_map=_map(alph, _need(doc, "maps", "f"), "maps.f"),
                cost=np.array(_need(doc, "costs", "input"), dtype=float),
            )
    except ProbabilityError as exc:
        raise ProblemFileError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ProblemFileError):
            raise
        raise ProblemFileError(f"malformed problem file: {exc}") from exc
    raise ProblemFileError(f"unknown kind {kind!r} (expected source, channel or probing)")


def load_problem(path: str | Path):
    """Parse and validate a problem file; raises ProblemFileError naming the
    first problem found."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path} is not valid JSON: {exc}") from exc
    problem = problem_from_dict(doc)
    bad = validate(problem)
    if bad:
        raise ProblemFileError(str(bad[0]))
    return problem


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _map_dict(m: DeterministicMap) -> dict:
    table = {}
    for idx in np.ndindex(*m.table.shape):
        key = ",".join(a.symbols[i] for a, i in zip(m.domain, idx))
        table[key] = m.codomain.symbols[int(m.table[idx])]
    return {"domain": list(m.domain_names), "codomain": m.codomain.name, "table": table}


def _channel_dict(c: ConditionalPmf) -> dict:
    return {"output": c.output.name, "inputs": list(c.input_names), "table": c.table.tolist()}


def problem_to_dict(problem) -> dict:
    if isinstance(problem, ProbingProblem):
        return {"kind": "probing", "epsilon": problem.epsilon, "gamma_a": problem.gamma_a_budget,
                "gamma_x": problem.gamma_x_budget}
    if isinstance(problem, SourceActionProblem):
        alphs = [problem.X, problem.A, problem.Y, problem.B, problem.xhat1, problem.xhat2]
        maps = {"f": _map_dict(problem.action_map)}
        if problem.f_y is not None:
            maps["f_y"] = _map_dict(problem.f_y)
        return {
            "kind": "source",
            "mode": problem.mode.value,
            "alphabets": {a.name: list(a.symbols) for a in alphs},
            "pmfs": {"source": {"variable": problem.X.name, "probs": problem.source.probs.tolist()}},
            "channels": {"side_information": _channel_dict(problem.side_channel)},
            "maps": maps,
            "reconstructions": {"xhat1": problem.xhat1.name, "xhat2": problem.xhat2.name},
            "distortions": {"d1": problem.d1.tolist(), "d2": problem.d2.tolist()},
            "costs": {"action": problem.action_cost.tolist()},
        }
    if isinstance(problem, ChannelActionProblem):
        alphs = [problem.A, problem.S, problem.X, problem.Y, problem.B]
        return {
            "kind": "channel",
            "alphabets": {a.name: list(a.symbols) for a in alphs},
            "channels": {"state": _channel_dict(problem.state_channel),
                         "transmission": _channel_dict(problem.transmission_channel)},
            "maps": {"f": _map_dict(problem.action_map)},
            "costs": {"input": problem.cost.tolist()},
        }
    raise TypeError(f"cannot serialize {type(problem).__name__}")


def dump_problem(problem, path: str | Path | None = None) -> str:
    text = json.dumps(problem_to_dict(problem), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
