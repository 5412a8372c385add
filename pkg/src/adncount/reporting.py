"""Serialization of run results: outcome JSON, per-epoch CSV, trace JSONL, values files."""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from typing import Iterable

from adncount.engine import EpochRecord, RunOutcome, Snapshot, Trace
from adncount.numeric import ExactScalar, render

SCHEMA = "1"
METRICS_HEADER = ("n", "k", "epsilon", "d", "p", "r", "tau", "rho_final",
                  "first_alarm_round", "accepted", "rounds_epoch")
SWEEP_HEADER = ("n", "topology", "seed", "backend", "outputs_ok", "stopped_simultaneously",
                "total_rounds", "epochs", "final_k")


def _fraction(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _scalar(x) -> str | None:
    return None if x is None else render(x)


def epoch_json(rec: EpochRecord) -> dict:
    return {
        "k": rec.k,
        "epsilon": rec.epsilon,
        "d": rec.d,
        "p": rec.p,
        "r": rec.r,
        "tau": _fraction(rec.tau),
        "rho_final": _scalar(rec.rho_final),
        "first_alarm_round": rec.first_alarm_round,
        "leader_alarm_round": rec.leader_alarm_round,
        "degree_alarm": rec.degree_alarm,
        "accepted": rec.accepted,
        "rounds_epoch": rec.rounds_epoch,
        "completed": rec.completed,
    }


def outcome_json(outcome: RunOutcome) -> dict:
    cfg = outcome.config
    return {
        "schema": SCHEMA,
        "n": cfg.n,
        "topology": cfg.schedule.kind,
        "seed": cfg.schedule.seed,
        "backend": cfg.backend.tag,
        "epsilon": cfg.epsilon_policy.describe(),
        "function": cfg.function,
        "outputs": outcome.outputs,
        "total_rounds": outcome.total_rounds,
        "stopped_simultaneously": outcome.stopped_simultaneously,
        "completed": outcome.completed,
        "per_epoch": [epoch_json(r) for r in outcome.per_epoch],
        "aggregate": outcome.aggregate.to_json() if outcome.aggregate else None,
        "invariant_violations": list(outcome.invariant_violations),
    }


def dumps_outcome(outcome: RunOutcome) -> str:
    return json.dumps(outcome_json(outcome), indent=2, sort_keys=True) + "\n"


def metrics_rows(outcome: RunOutcome) -> list[list]:
    n = outcome.config.n
    return [
        [n, r.k, repr(r.epsilon), r.d, r.p, r.r, _fraction(r.tau), _scalar(r.rho_final),
         "" if r.first_alarm_round is None else r.first_alarm_round,
         int(r.accepted), r.rounds_epoch]
        for r in outcome.per_epoch
    ]


def metrics_csv(outcome: RunOutcome) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    w.writerows(metrics_rows(outcome))
    return buf.getvalue()


def sweep_row(outcome: RunOutcome) -> list:
    cfg = outcome.config
    return [cfg.n, cfg.schedule.kind, cfg.schedule.seed, cfg.backend.tag,
            int(outcome.outputs == [cfg.n] * cfg.n), int(outcome.stopped_simultaneously),
            outcome.total_rounds, len(outcome.per_epoch), outcome.per_epoch[-1].k]


def snapshot_json(snap: Snapshot) -> dict:
    return {
        "round": snap.global_round,
        "k": snap.k,
        "phase": snap.phase,
        "event": snap.event,
        "phis": [render(x) for x in snap.phis],
        "statuses": list(snap.statuses),
        "rho": _scalar(snap.rho),
    }


def trace_lines(snapshots: Iterable[Snapshot]) -> Iterable[str]:
    for snap in snapshots:
        yield json.dumps(snapshot_json(snap), sort_keys=True) + "\n"


def write_trace(path: str, trace: Trace) -> None:
    with open(path, "w") as fh:
        fh.writelines(trace_lines(trace.snapshots))


def read_trace(path: str) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_values(path: str) -> tuple[int, ...]:
    """One nonnegative decimal integer per line; node 0 is the leader."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            if not text.isdigit():
                raise ValueError(f"{path}:{lineno}: expected a nonnegative integer, got {text!r}")
            out.append(int(text))
    return tuple(out)


def write_values(path: str, values: Iterable[int]) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{v}\n" for v in values)


def exact_ratio(x) -> str | None:
    """``N/d^e`` form of an exact scalar (large; not part of the default outputs)."""
    return x.ratio_string() if isinstance(x, ExactScalar) else None
