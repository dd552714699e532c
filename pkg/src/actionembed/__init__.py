"""Numerical evaluation of rate-distortion-cost and capacity-cost regions
for action-dependent source and channel coding with information embedded
on the actions."""
from __future__ import annotations

__version__ = "0.1.0"
