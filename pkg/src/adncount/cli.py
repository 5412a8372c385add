"""Command-line experiment runner.

Modes:
  run     one run; writes outcome JSON, per-epoch metrics CSV, optional trace JSONL
  sweep   n = 2..n-max times --reps seeds; one CSV row per (n, seed)
  verify  invariant suites for n = 2..n-max; exit status 2 on any failure

Exit status: 0 success, 1 usage error, 2 verification failure, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import dataclass, field

from adncount import reporting
from adncount.engine import EngineError, RunConfig, run
from adncount.extensions import FUNCTIONS, DecodeError
from adncount.network import BUILTIN_KINDS, ScheduleError, TopologySchedule
from adncount.numeric import Backend, NumericError
from adncount.params import EpsilonPolicy, ParamsError
from adncount.verify import verify_suite

log = logging.getLogger("adncount")

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3
EXACT_DEFAULT_MAX_N = 5
TOPOLOGIES = tuple(k.replace("_", "-") for k in BUILTIN_KINDS) + ("from-file",)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class CliConfig:
    mode: str
    n: int | None
    topology: str | None
    seed: int
    epsilon: EpsilonPolicy
    backend: str | None
    function: str
    values: tuple | None
    value_width: int
    schedule_file: str | None
    trace_out: str | None
    metrics_out: str | None
    outcome_out: str | None
    trace_stride: int | None
    n_max: int | None
    reps: int
    xor_mode: str
    outputs: list = field(default_factory=list)

    def backend_for(self, n: int) -> Backend:
        tag = self.backend or ("exact" if n <= EXACT_DEFAULT_MAX_N else "float64")
        return Backend(tag)

    def schedule_for(self, n: int, seed: int) -> TopologySchedule:
        kind = (self.topology or "static-path").replace("-", "_")
        return TopologySchedule(kind, n, seed=seed, source=self.schedule_file)

    def run_config(self, n: int, seed: int) -> RunConfig:
        return RunConfig(
            n=n,
            schedule=self.schedule_for(n, seed),
            backend=self.backend_for(n),
            epsilon_policy=self.epsilon,
            function=self.function,
            values=self.values,
            value_width=self.value_width,
            trace_stride=self.trace_stride,
            keep_trace=self.trace_out is not None,
            xor_mode=self.xor_mode,
        )


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adncount", description="Counting in anonymous dynamic networks.")
    p.add_argument("--mode", choices=("run", "sweep", "verify"), default="run")
    p.add_argument("--n", type=int, help="network size (node 0 is the leader)")
    p.add_argument("--topology", choices=TOPOLOGIES, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", default="auto", help="'auto' (log_k 2 per epoch) or a positive real")
    p.add_argument("--backend", choices=("exact", "float64"), default=None,
                   help=f"default: exact for n <= {EXACT_DEFAULT_MAX_N}, else float64")
    p.add_argument("--function", choices=FUNCTIONS, default="count")
    p.add_argument("--values", help="file with one nonnegative integer per node")
    p.add_argument("--value-width", type=int, default=16)
    p.add_argument("--xor-mode", choices=("parity", "exactly_one"), default="parity")
    p.add_argument("--schedule-file", help="line i lists the u-v edges of round i")
    p.add_argument("--trace-out")
    p.add_argument("--trace-stride", type=int, default=None)
    p.add_argument("--metrics-out")
    p.add_argument("--outcome-out")
    p.add_argument("--n-max", type=int, help="largest n for sweep/verify")
    p.add_argument("--reps", type=int, default=1, help="seeds per n in sweep/verify")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_args(argv) -> CliConfig:
    ns = build_parser().parse_args(argv)
    topology = ns.topology
    if ns.schedule_file:
        if topology not in (None, "from-file"):
            raise UsageError("--schedule-file implies --topology from-file")
        topology = "from-file"
    elif topology == "from-file":
        raise UsageError("--topology from-file needs --schedule-file")
    if ns.mode == "run" and ns.n is None:
        raise UsageError("--n is required in run mode")
    if ns.mode == "sweep" and ns.n_max is None and ns.n is None:
        raise UsageError("sweep mode needs --n-max")
    for name in ("n", "n_max"):
        value = getattr(ns, name)
        if value is not None and value < 2:
            raise UsageError(f"--{name.replace('_', '-')} must be at least 2")
    if ns.reps < 1:
        raise UsageError("--reps must be positive")
    if ns.value_width < 1:
        raise UsageError("--value-width must be positive")
    if ns.trace_stride is not None and ns.trace_stride < 1:
        raise UsageError("--trace-stride must be positive")
    try:
        epsilon = EpsilonPolicy.parse(ns.epsilon)
    except ParamsError as exc:
        raise UsageError(str(exc)) from exc
    values = None
    if ns.function == "count":
        if ns.values:
            raise UsageError("--values given without an aggregate --function")
    else:
        if not ns.values:
            raise UsageError(f"--function {ns.function} needs --values")
        if ns.mode != "run":
            raise UsageError("aggregate functions are only available in run mode")
        try:
            values = reporting.load_values(ns.values)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
        if len(values) != ns.n:
            raise UsageError(f"{ns.values} has {len(values)} values, expected {ns.n}")
    if ns.mode != "run" and ns.trace_out:
        raise UsageError("--trace-out is only available in run mode")
    return CliConfig(
        mode=ns.mode, n=ns.n, topology=topology, seed=ns.seed, epsilon=epsilon,
        backend=ns.backend, function=ns.function, values=values, value_width=ns.value_width,
        schedule_file=ns.schedule_file, trace_out=ns.trace_out, metrics_out=ns.metrics_out,
        outcome_out=ns.outcome_out, trace_stride=ns.trace_stride, n_max=ns.n_max, reps=ns.reps,
        xor_mode=ns.xor_mode,
    )


# --- execution --------------------------------------------------------------------------

def _write(cfg: CliConfig, path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    cfg.outputs.append(path)
    with open(path, "w") as fh:
        fh.write(text)


def _run_mode(cfg: CliConfig) -> int:
    outcome, trace = run(cfg.run_config(cfg.n, cfg.seed))
    if not outcome.completed:
        raise EngineError("run ended without an accepted estimate")
    _write(cfg, cfg.outcome_out, reporting.dumps_outcome(outcome))
    if cfg.metrics_out:
        _write(cfg, cfg.metrics_out, reporting.metrics_csv(outcome))
    if cfg.trace_out:
        _write(cfg, cfg.trace_out, "".join(reporting.trace_lines(trace.snapshots)))
    return EXIT_OK


def _sweep_mode(cfg: CliConfig) -> int:
    n_max = cfg.n_max or cfg.n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(reporting.SWEEP_HEADER)
    for n in range(2, n_max + 1):
        for seed in range(cfg.seed, cfg.seed + cfg.reps):
            outcome, _ = run(cfg.run_config(n, seed))
            log.info("n=%d seed=%d: outputs %s, %d rounds", n, seed, outcome.outputs, outcome.total_rounds)
            w.writerow(reporting.sweep_row(outcome))
    _write(cfg, cfg.metrics_out, buf.getvalue())
    return EXIT_OK


def _verify_mode(cfg: CliConfig) -> int:
    n_max = cfg.n_max or cfg.n or 4
    kinds = BUILTIN_KINDS if cfg.topology is None else (cfg.topology.replace("-", "_"),)
    seeds = range(cfg.seed, cfg.seed + cfg.reps)
    ok = True
    lines = []
    for n in range(2, n_max + 1):
        results = verify_suite(ns=(n,), kinds=kinds, seeds=seeds, backend=cfg.backend_for(n),
                               source=cfg.schedule_file, log=log.info)
        for res in results.values():
            ok &= res.passed
            lines.append(f"n={n} {res.line()}\n")
    _write(cfg, cfg.outcome_out, "".join(lines))
    return EXIT_OK if ok else EXIT_VERIFY


def _cleanup(cfg: CliConfig) -> None:
    for path in cfg.outputs:
        try:
            os.remove(path)
        except OSError:
            pass


def execute(cfg: CliConfig) -> int:
    handlers = {"run": _run_mode, "sweep": _sweep_mode, "verify": _verify_mode}
    try:
        status = handlers[cfg.mode](cfg)
    except (EngineError, ScheduleError, NumericError, ParamsError, DecodeError, OSError, ValueError) as exc:
        _cleanup(cfg)
        print(f"adncount: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if status == EXIT_VERIFY:
        print("adncount: verification failed", file=sys.stderr)
    return status


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"adncount: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
