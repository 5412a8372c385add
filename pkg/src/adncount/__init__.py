"""Deterministic counting in anonymous dynamic networks.

Leader/non-leader mass-distribution state machines, adversarial
1-interval-connected topology schedules, exact and float potential
arithmetic, a lazy-random-walk oracle, and aggregate extensions.
"""

from adncount.numeric import Backend, ExactScalar
from adncount.params import EpsilonPolicy, ProtocolParams, compute_params, total_rounds
from adncount.network import TopologySchedule, RoundGraph, generate, validate, metrics
from adncount.engine import RunConfig, RunOutcome, run

__all__ = [
    "Backend",
    "ExactScalar",
    "EpsilonPolicy",
    "ProtocolParams",
    "compute_params",
    "total_rounds",
    "TopologySchedule",
    "RoundGraph",
    "generate",
    "validate",
    "metrics",
    "RunConfig",
    "RunOutcome",
    "run",
]
