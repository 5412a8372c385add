from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from adncount import engine, network, protocol
from adncount.engine import EngineError, RunConfig, World, run, run_reference, step_round
from adncount.network import BUILTIN_KINDS, ScheduleError, TopologySchedule
from adncount.numeric import Backend
from adncount.params import compute_params
from adncount.protocol import Role, Status

FLOAT = Backend("float64")


def cfg(n, kind="static_path", seed=0, **kw):
    return RunConfig(n=n, schedule=TopologySchedule(kind, n, seed=seed), **kw)


# --- end-to-end examples --------------------------------------------------------------

def test_two_nodes_static_path():
    out, _ = run(cfg(2))
    assert out.outputs == [2, 2]
    assert out.total_rounds == 4541
    assert out.stopped_simultaneously and out.completed


def test_three_nodes_permuted_path():
    out, _ = run(cfg(3, "dynamic_permuted_path", seed=42))
    assert out.outputs == [3, 3, 3]
    assert out.total_rounds == 38267


def test_five_nodes_clique_float():
    out, _ = run(cfg(5, "static_clique", backend=FLOAT))
    assert out.outputs == [5] * 5
    assert out.total_rounds == 553014


# --- step_round -------------------------------------------------------------------------

def _world(n, kind="static_path", k=2):
    prm = compute_params(k)
    states = tuple(protocol.init_node(Role.LEADER if i == 0 else Role.NONLEADER, k, prm)
                   for i in range(n))
    return World(states, TopologySchedule(kind, n))


def test_step_round_two_node_examples():
    w = step_round(_world(2))
    assert [s.phi for s in w.states] == [Fraction(1, 4), Fraction(3, 4)]
    w = step_round(w)
    assert [s.phi for s in w.states] == [Fraction(3, 8), Fraction(5, 8)]
    assert w.global_round == 2


def test_step_round_star_centre_alarms():
    w = step_round(_world(6, "static_star"))
    statuses = [s.status for s in w.states]
    assert statuses[1] is Status.ALARM
    assert statuses.count(Status.ALARM) == 1
    out, _ = run(cfg(6, "static_star", max_rounds=10))
    rec = out.per_epoch[0]
    assert rec.first_alarm_round == 1 and rec.degree_alarm


def test_step_round_refuses_broken_lockstep():
    w = _world(2)
    lagging = replace(w.states[1], round_index=5)
    with pytest.raises(EngineError):
        step_round(replace(w, states=(w.states[0], lagging)))


def test_step_round_is_two_phase():
    # on a path the middle node must see round-start values of both ends
    w = step_round(_world(3))
    assert [s.phi for s in w.states] == [Fraction(1, 4), Fraction(3, 4), Fraction(1)]


# --- epoch reports ----------------------------------------------------------------------------

def test_epoch_report_overshoot_at_k2_for_three_nodes():
    out, _ = run(cfg(3))
    first = out.per_epoch[0]
    assert first.k == 2 and not first.accepted and first.alarm_free
    assert first.rho_final > 1


def test_epoch_report_leader_alarm_for_five_nodes():
    out, _ = run(cfg(5, "dynamic_permuted_path", seed=1, max_rounds=5000))
    first = out.per_epoch[0]
    assert first.k == 2 and not first.accepted
    assert first.leader_alarm_round is not None
    assert first.leader_alarm_round <= first.r + 4


def test_epoch_report_accepts_two_nodes():
    out, _ = run(cfg(2))
    rec = out.per_epoch[0]
    assert rec.accepted and Fraction(1, 2) <= rec.rho_final <= 1


def test_epoch_report_reference_world():
    w = replace(_world(2), record=engine.EpochRecord.start(compute_params(2), 0))
    assert engine.epoch_report(w).k == 2
    with pytest.raises(EngineError):
        engine.epoch_report(_world(2))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_rounds_per_epoch(n):
    out, _ = run(cfg(n, "dynamic_random_tree", seed=n))
    for rec in out.per_epoch:
        assert rec.rounds_epoch == rec.p * rec.r + rec.k
    assert out.total_rounds == sum(r.rounds_epoch for r in out.per_epoch)


# --- fused executor against message passing ----------------------------------------------------

def _leader_view(outcome, trace):
    recs = [(r.k, r.rho_final, r.first_alarm_round, r.leader_alarm_round, r.degree_alarm,
             r.phase1_alarm_free, r.accepted, r.rounds_epoch, r.completed) for r in outcome.per_epoch]
    return outcome.outputs, outcome.total_rounds, recs


def _assert_same(config):
    fast, ft = run(config)
    slow, st_ = run_reference(config)
    assert _leader_view(fast, ft) == _leader_view(slow, st_)
    assert len(ft.snapshots) == len(st_.snapshots)
    for a, b in zip(ft.snapshots, st_.snapshots):
        assert (a.global_round, a.k, a.phase, a.round, a.event) == (b.global_round, b.k, b.phase, b.round, b.event)
        assert a.statuses == b.statuses
        if config.backend.exact:
            assert a.phis == b.phis and a.rho == b.rho
        else:
            assert a.phis == pytest.approx(b.phis, abs=1e-12)
    return fast


@pytest.mark.parametrize("kind", BUILTIN_KINDS)
def test_fused_equals_reference_full_run(kind):
    out = _assert_same(cfg(3, kind, seed=5, trace_stride=211))
    assert out.outputs == [3, 3, 3]


@pytest.mark.parametrize("kind", BUILTIN_KINDS)
@pytest.mark.parametrize("backend", [Backend(), FLOAT])
def test_fused_equals_reference_with_alarms(kind, backend):
    _assert_same(cfg(6, kind, seed=2, trace_stride=7, max_rounds=1500, backend=backend))


@settings(max_examples=8)
@given(st.sampled_from(BUILTIN_KINDS), st.integers(2, 7), st.integers(0, 2**20))
def test_fused_equals_reference_prefixes(kind, n, seed):
    _assert_same(cfg(n, kind, seed=seed, trace_stride=3, max_rounds=600))


def test_fused_equals_reference_extension_coordinates():
    config = cfg(3, "dynamic_random_connected", seed=8, function="sum", values=(3, 9, 14), value_width=4)
    fast = _assert_same(config)
    slow, _ = run_reference(config)
    assert fast.phase1_snapshots == slow.phase1_snapshots
    assert fast.aggregate.sum == slow.aggregate.sum == 26


# --- invariants --------------------------------------------------------------------------------

@pytest.mark.parametrize("kind", BUILTIN_KINDS)
def test_alarm_spreads_within_n_minus_one_rounds(kind):
    n = 6
    _, trace = run(cfg(n, kind, seed=11, trace_stride=1, max_rounds=600))
    first = None
    for snap in trace.snapshots:
        if snap.k != 2:
            break
        statuses = snap.statuses_before if snap.event == "phase_end" else snap.statuses
        if first is None and "alarm" in statuses:
            first = snap.global_round
        if first is not None and snap.global_round >= first + n - 1:
            assert all(s == "alarm" for s in statuses)
    assert first is not None


@pytest.mark.parametrize("kind", BUILTIN_KINDS)
def test_alarmed_nodes_hold_unit_potential(kind):
    _, trace = run(cfg(6, kind, seed=4, trace_stride=1, max_rounds=800))
    for snap in trace.snapshots:
        for phi, status in zip(snap.phis, snap.statuses):
            if status == "alarm":
                assert phi == 1


def test_debug_invariants_clean():
    out, _ = run(cfg(4, "dynamic_random_tree", seed=3, check_invariants=True))
    assert out.invariant_violations == []
    out, _ = run(cfg(6, "dynamic_random_connected", seed=3, check_invariants=True, backend=FLOAT))
    assert out.invariant_violations == []


def test_trace_snapshots_strictly_increase():
    _, trace = run(cfg(3, "dynamic_permuted_path", trace_stride=50))
    rounds = [s.global_round for s in trace.snapshots]
    assert rounds == sorted(set(rounds))
    assert {s.event for s in trace.snapshots} == {"sample", "phase_end", "epoch_end"}
    assert [e["k"] for e in trace.events] == [2, 3]


def test_default_trace_has_boundaries_only():
    _, trace = run(cfg(2))
    assert len(trace.snapshots) == 17 + 1
    assert all(s.event != "sample" for s in trace.snapshots)


def test_probe_receives_every_snapshot():
    seen = []
    _, trace = run(cfg(2, keep_trace=False, trace_stride=100), probe=seen.append)
    assert trace.snapshots == []
    _, kept = run(cfg(2, trace_stride=100))
    assert [x.global_round for x in seen] == [x.global_round for x in kept.snapshots]
    # stride counts global rounds; 17 phase ends and one epoch end on top
    assert sum(x.event == "sample" for x in seen) == 4541 // 100
    assert len(seen) == 4541 // 100 + 17 + 1


def _relabel_file(tmp_path, sched, perm, rounds):
    path = tmp_path / "relabelled.txt"
    graphs = [[(perm[u], perm[v]) for u, v in network.generate(sched, t).edges] for t in range(rounds)]
    network.write_schedule_file(str(path), graphs)
    return str(path)


@pytest.mark.parametrize("kind", ["static_star", "dynamic_random_connected"])
def test_permutation_equivariance(tmp_path, kind):
    n = 5
    sched = TopologySchedule(kind, n, seed=21)
    perm = [0, 3, 1, 4, 2]
    src = _relabel_file(tmp_path, sched, perm, 4541)
    base = RunConfig(n=n, schedule=sched, max_rounds=4541, trace_stride=97)
    moved = replace(base, schedule=TopologySchedule("from_file", n, source=src))
    a, ta = run(base)
    b, tb = run(moved)
    assert [(r.rho_final, r.first_alarm_round, r.leader_alarm_round) for r in a.per_epoch] == \
        [(r.rho_final, r.first_alarm_round, r.leader_alarm_round) for r in b.per_epoch]
    assert [s.rho for s in ta.snapshots] == [s.rho for s in tb.snapshots]
    for sa, sb in zip(ta.snapshots, tb.snapshots):
        assert [sa.phis[i] for i in range(n)] == [sb.phis[perm[i]] for i in range(n)]


# --- errors ------------------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(EngineError):
        RunConfig(n=1, schedule=TopologySchedule("static_path", 2))
    with pytest.raises(EngineError):
        RunConfig(n=3, schedule=TopologySchedule("static_path", 2))
    with pytest.raises(EngineError):
        cfg(3, function="sum")
    with pytest.raises(EngineError):
        cfg(3, values=(1, 2, 3))
    with pytest.raises(EngineError):
        cfg(3, function="sum", values=(1, 2))
    with pytest.raises(EngineError):
        cfg(3, function="and", values=(1, 2, 0))
    with pytest.raises(EngineError):
        cfg(3, function="sum", values=(1, 2, 300), value_width=8)
    with pytest.raises(EngineError):
        cfg(3, function="median", values=(1, 2, 3))


def test_exhausted_schedule_file(tmp_path):
    path = tmp_path / "short.txt"
    path.write_text("0-1\n" * 100)
    with pytest.raises(ScheduleError, match="exhausted"):
        run(RunConfig(n=2, schedule=TopologySchedule("from_file", 2, source=str(path))))


def test_disconnected_round_rejected_before_delivery(tmp_path):
    path = tmp_path / "broken.txt"
    path.write_text("0-1 1-2\n0-1\n")
    sched = TopologySchedule("from_file", 3, source=str(path))
    with pytest.raises(ScheduleError, match="round 1: disconnected"):
        run(RunConfig(n=3, schedule=sched))
    with pytest.raises(ScheduleError, match="round 1: disconnected"):
        run_reference(RunConfig(n=3, schedule=sched))


def test_max_rounds_stops_cleanly():
    out, _ = run(cfg(3, max_rounds=1000))
    assert not out.completed and out.total_rounds == 1000
    assert out.outputs == [None] * 3
    assert not out.per_epoch[0].completed
