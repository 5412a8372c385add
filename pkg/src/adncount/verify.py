"""Invariant suites over runs, shared by ``adncount --mode verify`` and the tests.

:class:`InvariantProbe` watches snapshots while a run executes (so large
runs need not keep traces) and checks mass conservation, the [0, 1] bounds
and the walk mixing bound per phase.  The ``lemma*`` functions inspect the
finished per-epoch records.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable

from adncount import numeric, oracle
from adncount.engine import RunConfig, RunOutcome, Snapshot, run
from adncount.network import BUILTIN_KINDS, TopologySchedule, window_delta_diameter
from adncount.numeric import Backend, ExactScalar, Ordering
from adncount.oracle import OracleError

NORMAL = "normal"


def _all_normal(statuses) -> bool:
    return all(s == NORMAL for s in statuses)


def _as_fraction(x) -> Fraction:
    return x.to_fraction() if isinstance(x, ExactScalar) else Fraction(x)


@dataclass
class CheckResult:
    name: str
    passed: bool
    checked: int = 0
    failures: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        extra = f" ({self.failures[0]})" if self.failures else ""
        return f"{verdict} {self.name}: {self.checked} checks{extra}"


class InvariantProbe:
    """Snapshot consumer checking conservation, bounds and the mixing bound."""

    def __init__(self, config: RunConfig, mixing: bool = True):
        self.cfg = config
        self.n = config.n
        self.exact = config.backend.exact
        self.tol = config.backend.tolerance
        self.mixing = mixing
        self.conservation = CheckResult("conservation", True)
        self.bounds = CheckResult("bounds", True)
        self.mixing_bound = CheckResult("mixing_bound", True, detail={"max_ratio": 0.0, "phases": 0})
        self._phase_key = None
        self._samples: list = []
        self._phase_ok = True
        self._last_phase_end = None

    # -- individual checks

    def _total_is(self, phis, target: int) -> bool:
        if self.exact:
            e = max(x.exponent for x in phis)
            return sum(x.rebase(e).numerator for x in phis) == target * phis[0].base ** e
        return abs(sum(phis) - target) <= self.tol

    def _in_unit(self, x) -> bool:
        if self.exact:
            return 0 <= x.numerator <= x.denominator
        return -self.tol <= x <= 1 + self.tol

    def _check_bounds(self, snap: Snapshot, phis) -> None:
        self.bounds.checked += 1
        if not all(self._in_unit(x) for x in phis):
            self.bounds.passed = False
            self.bounds.failures.append(f"round {snap.global_round}: potential outside [0, 1]")

    def _check_conservation(self, snap: Snapshot, phis) -> None:
        self.conservation.checked += 1
        if not self._total_is(phis, self.n - 1):
            self.conservation.passed = False
            self.conservation.failures.append(f"round {snap.global_round}: total potential != n-1")

    # -- per-phase mixing bookkeeping

    def _start_phase(self, snap: Snapshot) -> None:
        self._phase_key = (snap.k, snap.phase)
        self._samples = []
        self._phase_ok = True
        if snap.phase == 1:
            d = self.cfg.epsilon_policy.params(snap.k).d
            start = ((0,) + (1,) * (self.n - 1)) if not self.exact else tuple(
                ExactScalar(0 if i == 0 else 1, 0, d) for i in range(self.n))
            self._samples.append((0, start))
        elif self._last_phase_end is not None and self._last_phase_end[0] == (snap.k, snap.phase - 1):
            phis, statuses = self._last_phase_end[1:]
            if _all_normal(statuses) and any(float(x) > 0 for x in phis):
                self._samples.append((0, phis))
            else:
                self._phase_ok = False
        else:
            self._phase_ok = False

    def _finish_phase(self, snap: Snapshot) -> None:
        if not self.mixing or not self._phase_ok or len(self._samples) < 2:
            return
        params = self.cfg.epsilon_policy.params(snap.k)
        start = snap.global_round - params.r
        delta, diam = window_delta_diameter(self.cfg.schedule, start, snap.global_round)
        if delta >= params.d:
            return
        report = oracle.check_convergence_bound(self._samples, params.d, diam, self.n)
        res = self.mixing_bound
        res.checked += report["rounds_checked"]
        res.detail["phases"] += 1
        res.detail["max_ratio"] = max(res.detail["max_ratio"], report["max_ratio_lhs_over_rhs"])
        if not report["pass"]:
            res.passed = False
            res.failures.append(f"k={snap.k} phase {snap.phase}: ratio {report['max_ratio_lhs_over_rhs']:.6g}")

    def __call__(self, snap: Snapshot) -> None:
        if snap.event == "epoch_end":
            self._check_bounds(snap, snap.phis)
            return
        if (snap.k, snap.phase) != self._phase_key:
            self._start_phase(snap)
        if snap.event == "phase_end":
            phis, statuses = snap.phis_before, snap.statuses_before
        else:
            phis, statuses = snap.phis, snap.statuses
        self._check_bounds(snap, phis)
        normal = _all_normal(statuses)
        if snap.phase == 1 and normal:
            self._check_conservation(snap, phis)
        if normal and self._phase_ok:
            self._samples.append((snap.round, phis))
        else:
            self._phase_ok = False
        if snap.event == "phase_end":
            self._check_bounds(snap, snap.phis)
            self._finish_phase(snap)
            self._last_phase_end = ((snap.k, snap.phase), snap.phis, snap.statuses)
            self._samples = []

    def results(self) -> list[CheckResult]:
        out = [self.conservation, self.bounds]
        if self.mixing:
            out.append(self.mixing_bound)
        return out


# --- per-epoch lemma checks ------------------------------------------------------------

def _rho_cmp(rho, bound: Fraction, backend: Backend) -> Ordering:
    if backend.exact:
        return numeric.compare(rho, bound)
    return numeric.compare(float(rho), float(bound), backend.tolerance)


def lemma_accept_range(outcome: RunOutcome) -> CheckResult:
    """At the accepted epoch k = n: n-1-1/n <= rho <= n-1."""
    res = CheckResult("accept_range", True)
    n, be = outcome.config.n, outcome.config.backend
    for rec in outcome.per_epoch:
        if rec.k != n or not rec.completed:
            continue
        res.checked += 1
        lo, hi = Fraction(n * n - n - 1, n), Fraction(n - 1)
        inside = _rho_cmp(rec.rho_final, lo, be) is not Ordering.LESS and \
            _rho_cmp(rec.rho_final, hi, be) is not Ordering.GREATER
        if not (inside and rec.accepted and rec.alarm_free):
            res.passed = False
            res.failures.append(f"k={n}: rho={numeric.render(rec.rho_final)} accepted={rec.accepted}")
    if res.checked == 0:
        res.passed = False
        res.failures.append("no epoch with k = n")
    return res


def lemma_overshoot(outcome: RunOutcome) -> CheckResult:
    """Rejected alarm-free epochs with k < n <= k^(1+eps) consume rho > k-1."""
    res = CheckResult("overshoot", True)
    n, be = outcome.config.n, outcome.config.backend
    for rec in outcome.per_epoch:
        if not (rec.completed and rec.k < n <= rec.kpow and rec.alarm_free and not rec.accepted):
            continue
        res.checked += 1
        if _rho_cmp(rec.rho_final, Fraction(rec.k - 1), be) is not Ordering.GREATER:
            res.passed = False
            res.failures.append(f"k={rec.k}: rho={numeric.render(rec.rho_final)} not above k-1")
    return res


def lemma_threshold_population(outcome: RunOutcome) -> CheckResult:
    """End of phase 1 without in-phase alarms: slack sums to 1 and at most
    k^(1+eps) nodes sit at or below tau."""
    res = CheckResult("threshold_population", True)
    exact = outcome.config.backend.exact
    tol = outcome.config.backend.tolerance
    for rec in outcome.per_epoch:
        if not rec.phase1_alarm_free or not rec.phase1_end_phis:
            continue
        res.checked += 1
        rep = oracle.slack_report(rec.phase1_end_phis, rec.tau, rec.kpow)
        slack_ok = rep["slack_sum"] == 1 if exact else abs(float(rep["slack_sum"]) - 1) <= tol
        if not (slack_ok and rep["population_ok"]):
            res.passed = False
            res.failures.append(f"k={rec.k}: slack={float(rep['slack_sum'])} below_tau={rep['below_threshold']}")
    return res


def lemma_alarm_latency(outcome: RunOutcome) -> CheckResult:
    """Epochs with k^(1+eps) < n: the leader is alarmed within k^(1+eps) rounds after phase 1."""
    res = CheckResult("alarm_latency", True)
    n = outcome.config.n
    for rec in outcome.per_epoch:
        if not (rec.kpow < n and rec.completed):
            continue
        res.checked += 1
        limit = rec.r + rec.kpow
        if rec.leader_alarm_round is None or rec.leader_alarm_round > limit:
            res.passed = False
            res.failures.append(f"k={rec.k}: leader alarm at {rec.leader_alarm_round}, limit {limit}")
    return res


def outcome_checks(outcome: RunOutcome) -> list[CheckResult]:
    """Termination and round accounting for one completed run."""
    from adncount.params import total_rounds

    cfg = outcome.config
    term = CheckResult("termination", True, checked=1)
    if not (outcome.completed and outcome.stopped_simultaneously and outcome.outputs == [cfg.n] * cfg.n):
        term.passed = False
        term.failures.append(f"outputs {outcome.outputs}, simultaneous={outcome.stopped_simultaneously}")
    rounds = CheckResult("round_count", True, checked=1 + len(outcome.per_epoch))
    expected = total_rounds(cfg.n, cfg.epsilon_policy)
    if outcome.total_rounds != expected:
        rounds.passed = False
        rounds.failures.append(f"total_rounds {outcome.total_rounds} != {expected}")
    for rec in outcome.per_epoch:
        if rec.completed and rec.rounds_epoch != rec.p * rec.r + rec.k:
            rounds.passed = False
            rounds.failures.append(f"k={rec.k}: epoch took {rec.rounds_epoch} rounds")
    return [term, rounds]


def lemma_checks(outcome: RunOutcome) -> list[CheckResult]:
    return [lemma_accept_range(outcome), lemma_overshoot(outcome),
            lemma_threshold_population(outcome), lemma_alarm_latency(outcome)]


# --- oracle equivalence --------------------------------------------------------------------

def _lazy_epoch_start(config: RunConfig) -> int:
    """Global round at which the first epoch with ``d >= n`` begins.

    From that epoch on no degree alarm is possible, so its prefix is a
    walk even when the early epochs alarm at once (large ``n``).
    """
    start, k = 0, 2
    while config.epsilon_policy.params(k).d < config.n:
        start += config.epsilon_policy.params(k).rounds
        k += 1
    return start


def oracle_equivalence(config: RunConfig, rounds: int = 1000, tol: float = 1e-12) -> CheckResult:
    """Compare engine potentials with matrix evolution over alarm-free prefixes.

    The engine records a snapshot after every round over the first ``rounds``
    rounds, and also over the first ``rounds`` rounds of the first epoch whose
    ``d`` exceeds every possible degree.  The oracle restarts from the
    engine's vector at each phase boundary (the leader's consumption is not a
    walk step) and stops at the first alarm.
    """
    res = CheckResult("oracle_equivalence", True)
    lazy_start = _lazy_epoch_start(config)
    cfg = replace(config, trace_stride=1, keep_trace=True, max_rounds=lazy_start + rounds)
    _, trace = run(cfg)
    exact = cfg.backend.exact
    n = cfg.n
    k_now, vec = None, None
    for snap in trace.snapshots:
        if rounds < snap.global_round <= lazy_start:
            continue
        if snap.event == "epoch_end":
            vec = None
            continue
        d = cfg.epsilon_policy.params(snap.k).d
        if snap.k != k_now:
            k_now = snap.k
            vec = [Fraction(0)] + [Fraction(1)] * (n - 1) if exact else [0.0] + [1.0] * (n - 1)
        if vec is None:
            continue
        phis, statuses = ((snap.phis_before, snap.statuses_before) if snap.event == "phase_end"
                          else (snap.phis, snap.statuses))
        if not _all_normal(statuses):
            vec = None
            continue
        try:
            vec = oracle.evolve(vec, cfg.schedule, d, 1, start_round=snap.global_round - 1, exact=exact)
        except OracleError:
            vec = None
            continue
        res.checked += 1
        if exact:
            same = all(_as_fraction(a) == b for a, b in zip(phis, vec))
        else:
            same = all(abs(float(a) - float(b)) <= tol for a, b in zip(phis, vec))
        if not same:
            res.passed = False
            res.failures.append(f"round {snap.global_round}: engine and oracle differ")
        if snap.event == "phase_end":
            vec = None if not _all_normal(snap.statuses) else (
                [_as_fraction(x) for x in snap.phis] if exact else [float(x) for x in snap.phis])
    if res.checked == 0:
        res.detail["note"] = "no alarm-free rounds in prefix"
    return res


# --- suites ---------------------------------------------------------------------------------

def check_run(config: RunConfig, mixing: bool = True, stride: int = 97) -> tuple[RunOutcome, list[CheckResult]]:
    """Run with an invariant probe attached; returns the outcome and all check results."""
    probe = InvariantProbe(config, mixing=mixing)
    cfg = replace(config, trace_stride=stride, keep_trace=False)
    outcome, _ = run(cfg, probe=probe)
    return outcome, outcome_checks(outcome) + probe.results() + lemma_checks(outcome)


def merge(results: Iterable[CheckResult]) -> dict[str, CheckResult]:
    out: dict[str, CheckResult] = {}
    for r in results:
        acc = out.setdefault(r.name, CheckResult(r.name, True))
        acc.checked += r.checked
        acc.passed &= r.passed
        acc.failures.extend(r.failures)
        if "max_ratio" in r.detail:
            acc.detail["max_ratio"] = max(acc.detail.get("max_ratio", 0.0), r.detail["max_ratio"])
    return out


def verify_suite(ns: Iterable[int] = (2, 3, 4), kinds: Iterable[str] = BUILTIN_KINDS,
                 seeds: Iterable[int] = (0,), backend: Backend = Backend(),
                 oracle_rounds: int = 1000, source: str | None = None,
                 log=None) -> dict[str, CheckResult]:
    """Every invariant suite over ``ns x kinds x seeds``."""
    results = []
    for n in ns:
        for kind in kinds:
            for seed in seeds:
                cfg = RunConfig(n=n, schedule=TopologySchedule(kind, n, seed=seed, source=source),
                                backend=backend)
                _, checks = check_run(cfg)
                checks.append(oracle_equivalence(cfg, rounds=oracle_rounds))
                if log is not None:
                    bad = [c.name for c in checks if not c.passed]
                    log(f"n={n} {kind} seed={seed}: {'ok' if not bad else 'FAILED ' + ','.join(bad)}")
                results.extend(checks)
    return merge(results)
