"""Synchronous lockstep execution of the counting protocol.

Two executors produce the same :class:`RunOutcome`:

* :func:`run` -- the default fused executor.  Potentials of all nodes are kept
  as one vector (big-integer numerators over a shared ``d**t`` for the exact
  backend, a numpy array driven by a compiled kernel for float64).
* :func:`run_reference` -- literal message passing through the
  :mod:`adncount.protocol` step functions, one :class:`NodeState` per node.
  Slow; used to cross-check the fused executor.

Round semantics follow the broadcast / receive / compute order: every message
of round ``t`` is built from round-start states before any node updates.
"""

from __future__ import annotations

import itertools
import logging
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import gmpy2
import numpy as np

from adncount import extensions, numeric, protocol
from adncount.extensions import AggregateResult
from adncount.network import BLOCK, TopologySchedule, edge_block, validate_pairs, ScheduleError
from adncount.numeric import Backend, ExactScalar, Ordering
from adncount.params import EpsilonPolicy, ProtocolParams
from adncount.protocol import Decision, Role, Status

log = logging.getLogger(__name__)


class EngineError(RuntimeError):
    pass


# --- configuration and results -------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    n: int
    schedule: TopologySchedule
    backend: Backend = Backend()
    epsilon_policy: EpsilonPolicy = EpsilonPolicy()
    function: str = "count"
    values: tuple | None = None
    value_width: int = 16
    trace_stride: int | None = None
    keep_trace: bool = True
    check_invariants: bool = False
    max_rounds: int | None = None
    xor_mode: str = "parity"
    # safety stop; the protocol itself never looks at n
    max_k: int | None = None

    def __post_init__(self):
        if self.n < 2:
            raise EngineError(f"a network needs more than one node, got n={self.n}")
        if self.schedule.n != self.n:
            raise EngineError(f"schedule is for n={self.schedule.n}, run is for n={self.n}")
        if self.function not in extensions.FUNCTIONS:
            raise EngineError(f"unknown function {self.function!r}")
        if (self.values is None) != (self.function == "count"):
            raise EngineError("values are required exactly when function is not 'count'")
        if self.values is not None:
            object.__setattr__(self, "values", tuple(int(v) for v in self.values))
            if len(self.values) != self.n:
                raise EngineError(f"expected {self.n} values, got {len(self.values)}")
            if any(v < 0 for v in self.values):
                raise EngineError("values must be nonnegative")
            if self.function in extensions.BOOLEAN_FUNCTIONS and any(v > 1 for v in self.values):
                raise EngineError("Boolean functions take 0/1 inputs")
            if self.function in extensions.SUM_FUNCTIONS and any(v >= 1 << self.value_width for v in self.values):
                raise EngineError(f"values must be below 2**{self.value_width}")
        if self.trace_stride is not None and self.trace_stride < 1:
            raise EngineError("trace stride must be positive")

    @property
    def width(self) -> int:
        """Number of value coordinates each node carries."""
        if self.function in extensions.SUM_FUNCTIONS:
            return self.value_width
        if self.function in extensions.BOOLEAN_FUNCTIONS:
            return 1
        return 0


@dataclass
class EpochRecord:
    k: int
    epsilon: float
    d: int
    p: int
    r: int
    tau: Fraction
    kpow: Fraction
    start_round: int
    rho_final: object = None
    first_alarm_round: int | None = None
    leader_alarm_round: int | None = None
    degree_alarm: bool = False
    phase1_alarm_free: bool = True
    accepted: bool = False
    rounds_epoch: int = 0
    completed: bool = False
    phase1_end_phis: tuple = ()

    @property
    def alarm_free(self) -> bool:
        return self.first_alarm_round is None

    @classmethod
    def start(cls, params: ProtocolParams, start_round: int) -> "EpochRecord":
        return cls(k=params.k, epsilon=params.epsilon, d=params.d, p=params.p, r=params.r,
                   tau=params.tau, kpow=params.kpow, start_round=start_round)

    def note_alarm(self, epoch_round: int, leader: bool, threshold: bool = False) -> None:
        """Record an alarm at 1-based epoch round ``epoch_round``.

        Threshold alarms are raised after round ``r`` and reported as round ``r``;
        they do not count against the phase-1 rounds themselves.
        """
        if self.first_alarm_round is None:
            self.first_alarm_round = epoch_round
        if leader and self.leader_alarm_round is None:
            self.leader_alarm_round = epoch_round
        if not threshold and epoch_round <= self.r:
            self.phase1_alarm_free = False


@dataclass(frozen=True)
class Snapshot:
    """State after global round ``global_round`` (rounds completed since start).

    ``round`` counts rounds completed in the current phase.  Phase-end
    snapshots also carry ``phis_before`` and ``statuses_before``: the state
    right after the last round, before the threshold check and the leader's
    consumption.
    """

    global_round: int
    k: int
    phase: int
    round: int
    phis: tuple
    statuses: tuple
    rho: object
    event: str = "sample"
    phis_before: tuple | None = None
    statuses_before: tuple | None = None


@dataclass
class Trace:
    snapshots: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def add(self, snap: Snapshot) -> None:
        if self.snapshots and snap.global_round <= self.snapshots[-1].global_round:
            raise EngineError("trace snapshots must be strictly increasing in round")
        self.snapshots.append(snap)


@dataclass
class RunOutcome:
    config: RunConfig
    outputs: list
    total_rounds: int
    per_epoch: list
    stopped_simultaneously: bool
    completed: bool
    aggregate: AggregateResult | None = None
    invariant_violations: list = field(default_factory=list)
    phase1_snapshots: tuple = ()

    @property
    def accepted_epoch(self) -> EpochRecord | None:
        for rec in self.per_epoch:
            if rec.accepted:
                return rec
        return None


Probe = Callable[[Snapshot], None]


# --- schedule access -----------------------------------------------------------------

class _Rounds:
    """Iterates edge lists of consecutive global rounds, block by block."""

    def __init__(self, schedule: TopologySchedule):
        self.schedule = schedule
        self.validate = schedule.kind == "from_file"

    def chunk(self, start: int, stop: int):
        """Edge block and row range covering ``[start, min(stop, block end))``."""
        blk = edge_block(self.schedule, start // BLOCK)
        a = start - blk.start
        if a >= len(blk):
            raise ScheduleError(f"schedule exhausted at round {start}")
        b = min(len(blk), stop - blk.start)
        if self.validate:
            for row in range(a, b):
                report = validate_pairs(self.schedule.n, blk.pairs(row))
                if not report.ok:
                    raise ScheduleError(f"round {blk.start + row}: {report.violation}")
        return blk, a, b

    def pairs(self, g: int) -> list[tuple[int, int]]:
        blk, a, _ = self.chunk(g, g + 1)
        return blk.pairs(a)


# --- fused executor --------------------------------------------------------------------

class _FusedRun:
    def __init__(self, config: RunConfig, probe: Probe | None):
        self.cfg = config
        self.n = config.n
        self.exact = config.backend.exact
        self.tol = config.backend.tolerance
        self.probe = probe
        self.trace = Trace()
        self.rounds = _Rounds(config.schedule)
        self.g = 0
        self.violations: list[str] = []
        self.bits = extensions.encode_values(config.values, config.width) if config.width else []
        self.limit = config.max_rounds if config.max_rounds is not None else sys.maxsize

    # -- snapshots

    def _phis(self, st) -> tuple:
        if self.exact:
            return tuple(ExactScalar(x, st["e"], st["d"]) for x in st["N"])
        return tuple(float(x) for x in st["X"][:, 0])

    def _statuses(self, st) -> tuple:
        return tuple(Status.ALARM.value if a else Status.NORMAL.value for a in st["alarm"])

    def _emit(self, snap: Snapshot) -> None:
        if self.cfg.keep_trace:
            self.trace.add(snap)
        if self.probe is not None:
            self.probe(snap)

    # -- epoch state

    def _fresh(self, params: ProtocolParams) -> dict:
        n, w = self.n, self.cfg.width
        st = {"d": params.d, "e": 0, "alarm": [False] * n, "rho": None}
        if self.exact:
            st["N"] = [gmpy2.mpz(0)] + [gmpy2.mpz(1)] * (n - 1)
            st["one"] = gmpy2.mpz(1)
            st["C"] = [[gmpy2.mpz(self.bits[i][j]) for i in range(n)] for j in range(w)]
            st["rho"] = ExactScalar(0, 0, params.d)
        else:
            X = np.zeros((n, 1 + w))
            X[1:, 0] = 1.0
            if w:
                X[:, 1:] = self.bits
            st["X"] = X
            st["alarm"] = np.zeros(n, dtype=np.bool_)
            st["rho"] = 0.0
        return st

    def _rho(self, st):
        return st["rho"]

    # -- round advance

    def _advance(self, st, blk, a, b, rec, epoch_round0, coords_on, conserve):
        if self.exact:
            self._advance_exact(st, blk, a, b, rec, epoch_round0, coords_on, conserve)
        else:
            self._advance_float(st, blk, a, b, rec, epoch_round0, coords_on, conserve)

    def _advance_exact(self, st, blk, a, b, rec, epoch_round0, coords_on, conserve):
        n, d = self.n, st["d"]
        N, one, alarm = st["N"], st["one"], st["alarm"]
        C = st["C"] if coords_on else []
        any_alarm = any(alarm)
        check = self.cfg.check_invariants
        if self.cfg.schedule.static:
            pairs = blk.pairs(0)
            deg = blk.deg[0].tolist()
            rows = itertools.repeat((pairs, deg, max(deg)), b - a)
        else:
            us, vs = blk.u[a:b].tolist(), blk.v[a:b].tolist()
            degs = blk.deg[a:b].tolist()
            rows = (
                ([(u, v) for u, v in zip(ur, vr) if u >= 0], dr, max(dr))
                for ur, vr, dr in zip(us, vs, degs)
            )
        for step, (pairs, deg, maxdeg) in enumerate(rows):
            one_next = one * d
            if any_alarm or maxdeg >= d:
                new_alarm = list(alarm)
                for i in range(n):
                    if deg[i] >= d and not alarm[i]:
                        new_alarm[i] = True
                        rec.degree_alarm = True
                if any_alarm:
                    for u, v in pairs:
                        if alarm[u]:
                            new_alarm[v] = True
                        if alarm[v]:
                            new_alarm[u] = True
                for i in range(n):
                    if new_alarm[i] and not alarm[i]:
                        rec.note_alarm(epoch_round0 + step + 1, i == 0)
                alarm = new_alarm
                any_alarm = any(alarm)
            new = [(d - deg[i]) * N[i] for i in range(n)]
            for u, v in pairs:
                new[u] += N[v]
                new[v] += N[u]
            newC = []
            for c in C:
                nc = [(d - deg[i]) * c[i] for i in range(n)]
                for u, v in pairs:
                    nc[u] += c[v]
                    nc[v] += c[u]
                newC.append(nc)
            if any_alarm:
                for i in range(n):
                    if alarm[i]:
                        new[i] = one_next
                        for c, nc in zip(C, newC):
                            nc[i] = c[i] * d
            N, one = new, one_next
            if C:
                C = newC
            if check:
                g = self.g + step + 1
                if any(x < 0 or x > one for x in N):
                    self.violations.append(f"round {g}: potential outside [0, 1]")
                if conserve and not any_alarm and sum(N) != (n - 1) * one:
                    self.violations.append(f"round {g}: total potential differs from n-1")
        st["N"], st["one"], st["alarm"] = N, one, alarm
        if coords_on:
            st["C"] = C
        st["e"] += b - a

    def _advance_float(self, st, blk, a, b, rec, epoch_round0, coords_on, conserve):
        from adncount import _kernels as K

        X, alarm = st["X"], st["alarm"]
        ncols = X.shape[1] if coords_on else 1
        out = np.array([-1, -1, 0, 0, 0], dtype=np.int64)
        before_leader = bool(alarm[0])
        K.advance_float(X, alarm, blk.u, blk.v, blk.deg, a, b, st["d"], ncols,
                        self.cfg.check_invariants, float(self.n - 1) if conserve else 0.0,
                        self.tol, out)
        if out[K.DEGREE_ALARM]:
            rec.degree_alarm = True
        if out[K.FIRST_ALARM] >= 0:
            rec.note_alarm(epoch_round0 + int(out[K.FIRST_ALARM]) + 1, False)
        if out[K.LEADER_ALARM] >= 0 and not before_leader:
            rec.note_alarm(epoch_round0 + int(out[K.LEADER_ALARM]) + 1, True)
        if out[K.CLAIM2_BAD]:
            self.violations.append(f"rounds {self.g + 1}..{self.g + b - a}: {out[K.CLAIM2_BAD]} potentials outside [0, 1]")
        if out[K.CLAIM1_BAD]:
            self.violations.append(f"rounds {self.g + 1}..{self.g + b - a}: total potential drifted from n-1")
        st["e"] += b - a

    # -- phase end

    def _phase_end(self, st, params: ProtocolParams, phase: int, rec: EpochRecord):
        n = self.n
        before = self._phis(st), self._statuses(st)
        if phase == 1:
            rec.phase1_end_phis = before[0]
            self._snapshot_coords(st, params)
            for i in range(n):
                if st["alarm"][i]:
                    continue
                if self._above_tau(st, i, params.tau):
                    st["alarm"][i] = True
                    self._set_one(st, i)
                    rec.note_alarm(params.r, i == 0, threshold=True)
        if not st["alarm"][0]:
            if self.exact:
                st["rho"] = numeric.add(st["rho"], ExactScalar(st["N"][0], st["e"], st["d"]))
                st["N"][0] = gmpy2.mpz(0)
            else:
                st["rho"] = st["rho"] + float(st["X"][0, 0])
                st["X"][0, 0] = 0.0
        return before

    def _above_tau(self, st, i, tau: Fraction) -> bool:
        if self.exact:
            return st["N"][i] * tau.denominator > tau.numerator * st["one"]
        return numeric.compare(float(st["X"][i, 0]), float(tau), self.tol) is Ordering.GREATER

    def _set_one(self, st, i):
        if self.exact:
            st["N"][i] = st["one"]
        else:
            st["X"][i, 0] = 1.0

    def _snapshot_coords(self, st, params):
        if not self.cfg.width:
            self.phase1 = ()
            return
        if self.exact:
            self.phase1 = tuple(
                tuple(ExactScalar(c[i], st["e"], st["d"]) for c in st["C"]) for i in range(self.n)
            )
        else:
            self.phase1 = tuple(tuple(float(x) for x in st["X"][i, 1:]) for i in range(self.n))

    def _leader_decides(self, st, params: ProtocolParams) -> bool:
        if st["alarm"][0]:
            return False
        k = params.k
        lo, hi = Fraction(k * k - k - 1, k), Fraction(k - 1)
        rho = st["rho"]
        if self.exact:
            return numeric.compare(rho, lo) is not Ordering.LESS and numeric.compare(rho, hi) is not Ordering.GREATER
        return (numeric.compare(rho, float(lo), self.tol) is not Ordering.LESS
                and numeric.compare(rho, float(hi), self.tol) is not Ordering.GREATER)

    # -- epochs

    def _epoch(self, params: ProtocolParams) -> EpochRecord | None:
        rec = EpochRecord.start(params, self.g)
        st = self._fresh(params)
        p, r, k = params.p, params.r, params.k
        stride = self.cfg.trace_stride
        for phase in range(1, p + 1):
            done = 0
            coords_on = phase == 1 and bool(self.cfg.width)
            while done < r:
                stop = self.g + (r - done)
                if stride:
                    next_sample = (self.g // stride + 1) * stride
                    stop = min(stop, next_sample)
                if self.g >= self.limit:
                    rec.rho_final = self._rho(st)
                    return rec
                stop = min(stop, self.limit)
                blk, a, b = self.rounds.chunk(self.g, stop)
                self._advance(st, blk, a, b, rec, (phase - 1) * r + done, coords_on, phase == 1)
                self.g += b - a
                done += b - a
                if stride and self.g % stride == 0 and done < r:
                    self._emit(Snapshot(self.g, k, phase, done, self._phis(st),
                                        self._statuses(st), self._rho(st)))
            before, before_st = self._phase_end(st, params, phase, rec)
            self._emit(Snapshot(self.g, k, phase, r, self._phis(st), self._statuses(st),
                                self._rho(st), event="phase_end", phis_before=before,
                                statuses_before=before_st))
        rec.rho_final = self._rho(st)
        accepted = self._leader_decides(st, params)
        rec.accepted = accepted
        done_nodes = [False] * self.n
        done_nodes[0] = accepted
        for _ in range(k):
            if self.g >= self.limit:
                return rec
            pairs = self.rounds.pairs(self.g)
            new = list(done_nodes)
            for u, v in pairs:
                if done_nodes[u]:
                    new[v] = True
                if done_nodes[v]:
                    new[u] = True
            done_nodes = new
            self.g += 1
        rec.completed = True
        rec.rounds_epoch = self.g - rec.start_round
        self.done_nodes = done_nodes
        statuses = tuple(Status.DONE.value if x else (Status.ALARM.value if st["alarm"][i] else Status.NORMAL.value)
                         for i, x in enumerate(done_nodes))
        self._emit(Snapshot(self.g, k, p, r, self._phis(st), statuses, self._rho(st), event="epoch_end"))
        self.trace.events.append({"round": self.g, "event": "epoch_end", "k": k, "accepted": accepted})
        return rec

    def execute(self) -> tuple[RunOutcome, Trace]:
        policy = self.cfg.epsilon_policy
        max_k = self.cfg.max_k or 4 * self.n + 8
        records = []
        self.phase1 = ()
        k = 2
        outputs = [None] * self.n
        stopped = False
        completed = False
        while True:
            params = policy.params(k)
            rec = self._epoch(params)
            records.append(rec)
            if not rec.completed:
                break
            if rec.accepted:
                outputs = [k if x else None for x in self.done_nodes]
                stopped = all(self.done_nodes)
                completed = True
                break
            if any(self.done_nodes):
                raise EngineError("a node stopped although the leader rejected")
            k += 1
            if k > max_k:
                raise EngineError(f"no estimate accepted up to k={max_k}")
        outcome = RunOutcome(
            config=self.cfg,
            outputs=outputs,
            total_rounds=self.g,
            per_epoch=records,
            stopped_simultaneously=stopped,
            completed=completed,
            invariant_violations=self.violations,
            phase1_snapshots=self.phase1 if completed else (),
        )
        if completed and self.cfg.function != "count":
            outcome.aggregate = aggregate(self.cfg, outcome, self.g)
        return outcome, self.trace


def aggregate(cfg: RunConfig, outcome: RunOutcome, end_round: int) -> AggregateResult:
    """Decode the requested aggregate once counting has stopped with size ``n``."""
    n = outcome.outputs[0]
    fn = cfg.function
    if fn in extensions.EXTREMA_FUNCTIONS:
        hi, lo = extensions.flood_extrema(cfg.values, cfg.schedule, n, start_round=end_round)
        return AggregateResult(max=hi, min=lo)
    leader_input = cfg.values[0]
    sums = {extensions.decode_sum(snap, n, leader_input) for snap in outcome.phase1_snapshots}
    if len(sums) != 1:
        raise EngineError(f"nodes decoded different sums: {sorted(sums)}")
    total = sums.pop()
    if fn in extensions.BOOLEAN_FUNCTIONS:
        return AggregateResult(sum=total, boolean={fn: extensions.boolean_eval(total, n, fn, cfg.xor_mode)})
    return AggregateResult(sum=total, average=Fraction(total, n))


def run(config: RunConfig, probe: Probe | None = None) -> tuple[RunOutcome, Trace]:
    """Run the protocol until the leader accepts (or ``max_rounds`` is hit)."""
    return _FusedRun(config, probe).execute()


# --- reference executor ------------------------------------------------------------------

@dataclass(frozen=True)
class World:
    states: tuple
    schedule: TopologySchedule
    global_round: int = 0
    record: EpochRecord | None = None


def _inboxes(world: World, pairs, make) -> list[list]:
    msgs = [make(s) for s in world.states]
    inbox = [[] for _ in world.states]
    for u, v in sorted(pairs):
        inbox[u].append(msgs[v])
        inbox[v].append(msgs[u])
    return inbox


def _round_pairs(world: World):
    return _Rounds(world.schedule).pairs(world.global_round)


def step_round(world: World) -> World:
    """One phase round: all messages from round-start states, then all updates."""
    states = world.states
    keys = {(s.k, s.phase_index, s.round_index) for s in states}
    if len(keys) != 1:
        raise EngineError(f"nodes out of lockstep: {sorted(keys)}")
    inbox = _inboxes(world, _round_pairs(world), protocol.outgoing_message)
    new = tuple(protocol.apply_round(s, box) for s, box in zip(states, inbox))
    rec = world.record
    if rec is not None:
        s0 = states[0]
        epoch_round = (s0.phase_index - 1) * s0.params.r + s0.round_index + 1
        for i, (a, b) in enumerate(zip(states, new)):
            if a.status is Status.NORMAL and b.status is Status.ALARM:
                if len(inbox[i]) >= a.params.d:
                    rec.degree_alarm = True
                rec.note_alarm(epoch_round, i == 0)
    return replace(world, states=new, global_round=world.global_round + 1)


def dissemination_round(world: World) -> World:
    inbox = _inboxes(world, _round_pairs(world), protocol.dissemination_message)
    new = tuple(protocol.dissemination_step(s, box) for s, box in zip(world.states, inbox))
    return replace(world, states=new, global_round=world.global_round + 1)


def epoch_report(world: World) -> EpochRecord:
    """Per-epoch record (k, final rho, first alarm, verdict) at an epoch boundary."""
    rec = world.record
    if rec is None:
        raise EngineError("world carries no epoch record")
    return rec


def _ref_phis(states) -> tuple:
    return tuple(s.phi for s in states)


def _ref_statuses(states) -> tuple:
    return tuple(s.status.value for s in states)


def run_reference(config: RunConfig, probe: Probe | None = None) -> tuple[RunOutcome, Trace]:
    """Message-passing executor; same outputs as :func:`run`, much slower."""
    n, policy, backend = config.n, config.epsilon_policy, config.backend
    trace = Trace()
    violations: list[str] = []
    limit = config.max_rounds if config.max_rounds is not None else sys.maxsize
    max_k = config.max_k or 4 * n + 8
    stride = config.trace_stride

    def emit(snap):
        if config.keep_trace:
            trace.add(snap)
        if probe is not None:
            probe(snap)

    params = policy.params(2)
    values = config.values or (0,) * n
    states = tuple(
        protocol.init_node(Role.LEADER if i == 0 else Role.NONLEADER, 2, params, backend,
                           values[i] if config.width else None, config.width)
        for i in range(n)
    )
    world = World(states, config.schedule, 0, None)
    records = []
    completed = False
    while True:
        params = world.states[0].params
        rec = EpochRecord.start(params, world.global_round)
        world = replace(world, record=rec)
        records.append(rec)
        world, finished = _reference_phases(world, params, config, emit, violations, limit, stride)
        if not finished:
            break
        rec.rho_final = world.states[0].rho
        decision = protocol.end_of_epoch_leader(world.states[0])
        rec.accepted = decision is Decision.ACCEPT
        leader = protocol.conclude_epoch(world.states[0], decision)
        world = replace(world, states=(leader,) + world.states[1:])
        if world.global_round + params.k > limit:
            break
        for _ in range(params.k):
            world = dissemination_round(world)
        rec.completed = True
        rec.rounds_epoch = world.global_round - rec.start_round
        emit(Snapshot(world.global_round, params.k, params.p, params.r, _ref_phis(world.states),
                      _ref_statuses(world.states), world.states[0].rho, event="epoch_end"))
        trace.events.append({"round": world.global_round, "event": "epoch_end", "k": params.k,
                             "accepted": rec.accepted})
        if rec.accepted:
            completed = True
            break
        if any(s.status is Status.DONE for s in world.states):
            raise EngineError("a node stopped although the leader rejected")
        world = replace(world, states=tuple(protocol.finish_epoch(s, policy) for s in world.states))
        if world.states[0].k > max_k:
            raise EngineError(f"no estimate accepted up to k={max_k}")

    final = world.states
    outputs = [s.k if s.status is Status.DONE else None for s in final] if completed else [None] * n
    outcome = RunOutcome(
        config=config,
        outputs=outputs,
        total_rounds=world.global_round,
        per_epoch=records,
        stopped_simultaneously=completed and all(s.status is Status.DONE for s in final),
        completed=completed,
        invariant_violations=violations,
        phase1_snapshots=tuple(s.phase1_snapshot for s in final) if completed and config.width else (),
    )
    if completed and config.function != "count":
        outcome.aggregate = aggregate(config, outcome, world.global_round)
    return outcome, trace


def _reference_phases(world: World, params: ProtocolParams, config: RunConfig, emit,
                      violations: list, limit: int, stride: int | None) -> tuple[World, bool]:
    """Run the ``p`` phases of one epoch; the flag is False if ``limit`` cut it short."""
    rec = world.record
    for phase in range(1, params.p + 1):
        for rnd in range(1, params.r + 1):
            if world.global_round >= limit:
                rec.rho_final = world.states[0].rho
                return world, False
            world = step_round(world)
            if config.check_invariants:
                _check_claims(world, phase, violations, config.backend)
            if stride and world.global_round % stride == 0 and rnd < params.r:
                emit(Snapshot(world.global_round, params.k, phase, rnd, _ref_phis(world.states),
                              _ref_statuses(world.states), world.states[0].rho))
        before, before_st = _ref_phis(world.states), _ref_statuses(world.states)
        if phase == 1:
            rec.phase1_end_phis = before
        new = tuple(protocol.end_of_phase(s, phase) for s in world.states)
        for i, (a, b) in enumerate(zip(world.states, new)):
            if a.status is Status.NORMAL and b.status is Status.ALARM:
                rec.note_alarm(params.r, i == 0, threshold=True)
        world = replace(world, states=new)
        emit(Snapshot(world.global_round, params.k, phase, params.r, _ref_phis(new),
                      _ref_statuses(new), new[0].rho, event="phase_end", phis_before=before,
                      statuses_before=before_st))
    return world, True


def _check_claims(world: World, phase: int, violations: list, backend: Backend) -> None:
    n = len(world.states)
    phis = [s.phi for s in world.states]
    lo, hi = Fraction(0), Fraction(1)
    for x in phis:
        if backend.compare(x, lo if backend.exact else 0.0) is Ordering.LESS or \
                backend.compare(x, hi if backend.exact else 1.0) is Ordering.GREATER:
            violations.append(f"round {world.global_round}: potential outside [0, 1]")
            break
    if phase == 1 and world.record is not None and world.record.alarm_free:
        total = phis[0]
        for x in phis[1:]:
            total = numeric.add(total, x)
        if backend.compare(total, Fraction(n - 1) if backend.exact else float(n - 1)) is not Ordering.EQUAL:
            violations.append(f"round {world.global_round}: total potential differs from n-1")
