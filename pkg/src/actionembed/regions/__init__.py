"""Evaluators, solvers and sweep drivers for the single-letter regions."""
from __future__ import annotations

from .binary import binary_example_rate, decoder2_threshold, solve_binary_example
from .channel import (
    InfeasibleError,
    channel_max_sum_rate,
    probing_sum_rate,
    probing_sum_rate_convexified,
    region_transfer_closure,
    solve_probing,
)
from .curves import TradeoffCurve, fig7_rows, fig8_rows, fig11_rows, trace_curve
from .source import (
    ObjectiveEval,
    ProblemError,
    eval_causal,
    eval_encoder_side,
    eval_encoder_side_dual,
    eval_nc,
    eval_sc,
    nested_solves,
    solve_causal,
    solve_encoder_side,
    solve_encoder_side_dual,
    solve_nc,
    solve_sc,
    solve_source,
)

__all__ = [
    "InfeasibleError",
    "ObjectiveEval",
    "ProblemError",
    "TradeoffCurve",
    "binary_example_rate",
    "channel_max_sum_rate",
    "decoder2_threshold",
    "eval_causal",
    "eval_encoder_side",
    "eval_encoder_side_dual",
    "eval_nc",
    "eval_sc",
    "fig7_rows",
    "fig8_rows",
    "fig11_rows",
    "nested_solves",
    "probing_sum_rate",
    "probing_sum_rate_convexified",
    "region_transfer_closure",
    "solve_binary_example",
    "solve_causal",
    "solve_encoder_side",
    "solve_encoder_side_dual",
    "solve_nc",
    "solve_probing",
    "solve_sc",
    "solve_source",
    "trace_curve",
]
