"""Dynamic topology schedules satisfying 1-interval connectivity.

Randomized kinds are generated in blocks of :data:`BLOCK` rounds.  Each block
draws from a generator keyed by ``(seed, block index, kind)``, so any round can
be regenerated on its own and two calls for the same round always agree.
Node 0 is the leader in every kind.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

BLOCK = 1024

KINDS = (
    "static_path",
    "static_clique",
    "static_star",
    "dynamic_permuted_path",
    "dynamic_random_tree",
    "dynamic_random_connected",
    "from_file",
)
BUILTIN_KINDS = KINDS[:-1]
STATIC_KINDS = KINDS[:3]

_KIND_CODE = {kind: i for i, kind in enumerate(KINDS)}


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class RoundGraph:
    n: int
    edges: frozenset

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "RoundGraph":
        return cls(n, frozenset(tuple(sorted(p)) for p in pairs))

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n)]
        for u, v in sorted(self.edges):
            adj[u].append(v)
            adj[v].append(u)
        return adj


@dataclass(frozen=True)
class TopologySchedule:
    kind: str
    n: int
    seed: int = 0
    source: str | None = None
    max_degree: int = 3
    edge_prob: float = 0.25

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScheduleError(f"unknown topology kind {self.kind!r}")
        if self.n < 2:
            raise ScheduleError(f"n must be at least 2, got {self.n}")
        if not 0 <= self.seed < 2**64:
            raise ScheduleError("seed must be a 64-bit unsigned integer")
        if self.kind == "from_file" and not self.source:
            raise ScheduleError("from_file schedules need a source path")
        if self.max_degree < 2:
            raise ScheduleError("tree degree bound must be at least 2")

    @property
    def static(self) -> bool:
        return self.kind in STATIC_KINDS


@dataclass(frozen=True)
class TopologyMetrics:
    delta: int
    diameter: int
    chronopath: int


@dataclass(frozen=True)
class Validation:
    ok: bool
    violation: str | None = None

    def __bool__(self):
        return self.ok


# --- edge blocks -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EdgeBlock:
    """Edges for rounds ``[start, start + len)``.

    ``u``/``v`` have shape (rounds, max_edges) padded with -1.
    """

    start: int
    u: np.ndarray
    v: np.ndarray
    deg: np.ndarray = field(repr=False)

    def __len__(self):
        return self.u.shape[0]

    def pairs(self, row: int) -> list[tuple[int, int]]:
        u, v = self.u[row], self.v[row]
        keep = u >= 0
        return list(zip(u[keep].tolist(), v[keep].tolist()))


def _make_block(start: int, u: np.ndarray, v: np.ndarray, n: int) -> EdgeBlock:
    rows = u.shape[0]
    deg = np.zeros((rows, n), dtype=np.int64)
    mask = u >= 0
    r_idx = np.broadcast_to(np.arange(rows)[:, None], u.shape)[mask]
    np.add.at(deg, (r_idx, u[mask]), 1)
    np.add.at(deg, (r_idx, v[mask]), 1)
    u.setflags(write=False)
    v.setflags(write=False)
    deg.setflags(write=False)
    return EdgeBlock(start, u, v, deg)


def _static_pairs(kind: str, n: int) -> list[tuple[int, int]]:
    if kind == "static_path":
        return [(i, i + 1) for i in range(n - 1)]
    if kind == "static_clique":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    if n == 2:
        return [(0, 1)]
    # star centred on a non-leader so the leader sits on the periphery
    return [(0, 1)] + [(1, j) for j in range(2, n)]


def _rng(sched: TopologySchedule, block: int) -> np.random.Generator:
    return np.random.default_rng([sched.seed, block, _KIND_CODE[sched.kind]])


def _positions(rng: np.random.Generator, rows: int, n: int) -> np.ndarray:
    """Random node order per round with the leader fixed at position 0."""
    order = np.argsort(rng.random((rows, n - 1)), axis=1) + 1
    return np.concatenate([np.zeros((rows, 1), dtype=np.int64), order], axis=1)


def _permuted_path(sched, rng, rows):
    pos = _positions(rng, rows, sched.n)
    return pos[:, :-1].copy(), pos[:, 1:].copy()


def _random_tree(sched, rng, rows):
    """Leader-rooted random tree, every node of degree <= ``max_degree``.

    Position i attaches to a uniformly chosen earlier position that still has
    room for a child (the root may take ``max_degree`` children, others one
    fewer because of their parent edge).
    """
    n, bound = sched.n, sched.max_degree
    pos = _positions(rng, rows, n)
    draws = rng.random((rows, n))
    room = np.full((rows, n), bound - 1, dtype=np.int64)
    room[:, 0] = bound
    parent = np.zeros((rows, n), dtype=np.int64)
    ar = np.arange(rows)
    for i in range(1, n):
        eligible = room[:, :i] > 0
        count = eligible.sum(axis=1)
        pick = np.minimum((draws[:, i] * count).astype(np.int64), count - 1)
        # index of the (pick)-th eligible position
        rank = np.cumsum(eligible, axis=1) - 1
        chosen = np.argmax((rank == pick[:, None]) & eligible, axis=1)
        parent[:, i] = chosen
        room[ar, chosen] -= 1
    u = pos[ar[:, None], parent[:, 1:]]
    v = pos[:, 1:]
    return u, v.copy()


def _random_connected(sched, rng, rows):
    """Random recursive spanning tree plus each remaining pair with ``edge_prob``."""
    n = sched.n
    pos = _positions(rng, rows, n)
    ar = np.arange(rows)
    adj = np.zeros((rows, n, n), dtype=bool)
    draws = rng.random((rows, n))
    for i in range(1, n):
        j = np.minimum((draws[:, i] * i).astype(np.int64), i - 1)
        a, b = pos[ar, i], pos[ar, j]
        adj[ar, a, b] = True
        adj[ar, b, a] = True
    iu, ju = np.triu_indices(n, 1)
    extra = rng.random((rows, iu.size)) < sched.edge_prob
    present = adj[:, iu, ju] | extra
    u = np.where(present, iu[None, :], -1)
    v = np.where(present, ju[None, :], -1)
    return u, v


_GENERATORS = {
    "dynamic_permuted_path": _permuted_path,
    "dynamic_random_tree": _random_tree,
    "dynamic_random_connected": _random_connected,
}


@lru_cache(maxsize=16)
def _load_file(path: str, mtime: float) -> tuple[tuple[tuple[int, int], ...], ...]:
    rounds = []
    with open(path) as fh:
        for lineno, line in enumerate(fh):
            pairs = []
            for token in line.split():
                try:
                    a, b = token.split("-")
                    pairs.append((int(a), int(b)))
                except ValueError as exc:
                    raise ScheduleError(f"{path}:{lineno + 1}: bad edge token {token!r}") from exc
            rounds.append(tuple(pairs))
    return tuple(rounds)


def load_schedule_file(path: str) -> tuple[tuple[tuple[int, int], ...], ...]:
    try:
        return _load_file(path, os.path.getmtime(path))
    except FileNotFoundError as exc:
        raise ScheduleError(f"schedule file not found: {path}") from exc


def write_schedule_file(path: str, graphs) -> None:
    with open(path, "w") as fh:
        for g in graphs:
            pairs = g.edges if isinstance(g, RoundGraph) else g
            fh.write(" ".join(f"{u}-{v}" for u, v in sorted(pairs)) + "\n")


@lru_cache(maxsize=32)
def edge_block(sched: TopologySchedule, block: int) -> EdgeBlock:
    """Edges for rounds ``[block*BLOCK, (block+1)*BLOCK)``.

    For ``from_file`` the block may be shorter (or empty) at the end of the file.
    """
    start = block * BLOCK
    n = sched.n
    if sched.static:
        pairs = _static_pairs(sched.kind, n)
        u = np.tile(np.array([p[0] for p in pairs], dtype=np.int64), (BLOCK, 1))
        v = np.tile(np.array([p[1] for p in pairs], dtype=np.int64), (BLOCK, 1))
    elif sched.kind == "from_file":
        rounds = load_schedule_file(sched.source)[start:start + BLOCK]
        width = max((len(r) for r in rounds), default=0)
        u = np.full((len(rounds), max(width, 1)), -1, dtype=np.int64)
        v = np.full_like(u, -1)
        for row, pairs in enumerate(rounds):
            for j, (a, b) in enumerate(pairs):
                if not (0 <= a < n and 0 <= b < n):
                    raise ScheduleError(f"round {start + row}: edge {a}-{b} out of range for n={n}")
                u[row, j], v[row, j] = a, b
    else:
        u, v = _GENERATORS[sched.kind](sched, _rng(sched, block), BLOCK)
        u = np.ascontiguousarray(u, dtype=np.int64)
        v = np.ascontiguousarray(v, dtype=np.int64)
    return _make_block(start, u, v, n)


def generate(sched: TopologySchedule, round_index: int) -> RoundGraph:
    """The communication graph of round ``round_index`` (0-based)."""
    if round_index < 0:
        raise ScheduleError("round index must be nonnegative")
    blk = edge_block(sched, round_index // BLOCK)
    row = round_index - blk.start
    if row >= len(blk):
        raise ScheduleError(f"schedule {sched.source} has no round {round_index}")
    return RoundGraph.from_pairs(sched.n, blk.pairs(row))


# --- validation --------------------------------------------------------------------

def validate(g: RoundGraph) -> Validation:
    if g.n < 2:
        return Validation(False, "too few nodes")
    for u, v in g.edges:
        if u == v:
            return Validation(False, f"self-loop at node {u}")
        if not (0 <= u < g.n and 0 <= v < g.n):
            return Validation(False, f"edge {u}-{v} out of range")
    seen = {0}
    queue = deque([0])
    adj = g.neighbors()
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                queue.append(y)
    if len(seen) != g.n:
        return Validation(False, "disconnected")
    return Validation(True)


def validate_pairs(n: int, pairs) -> Validation:
    """Like :func:`validate` but also catches duplicate edges in a raw pair list."""
    keys = [tuple(sorted(p)) for p in pairs]
    if len(set(keys)) != len(keys):
        return Validation(False, "duplicate edge")
    return validate(RoundGraph(n, frozenset(keys)))


def validate_block(blk: EdgeBlock, n: int) -> np.ndarray:
    """Vectorised validation of a block; returns a bool array, True where round is valid."""
    u, v = blk.u, blk.v
    rows = u.shape[0]
    mask = u >= 0
    ok = ~np.any(mask & (u == v), axis=1)
    # duplicates: canonical pair ids must be unique per row
    ids = np.where(mask, np.minimum(u, v) * n + np.maximum(u, v), -1 - np.arange(u.shape[1])[None, :])
    srt = np.sort(ids, axis=1)
    ok &= ~np.any((srt[:, 1:] == srt[:, :-1]) & (srt[:, 1:] >= 0), axis=1)
    # connectivity by min-label propagation
    labels = np.tile(np.arange(n), (rows, 1))
    r_idx = np.broadcast_to(np.arange(rows)[:, None], u.shape)[mask]
    uu, vv = u[mask], v[mask]
    for _ in range(n):
        m = np.minimum(labels[r_idx, uu], labels[r_idx, vv])
        new = labels.copy()
        np.minimum.at(new, (r_idx, uu), m)
        np.minimum.at(new, (r_idx, vv), m)
        if np.array_equal(new, labels):
            break
        labels = new
    ok &= np.all(labels == 0, axis=1)
    return ok


# --- metrics ----------------------------------------------------------------------------

def block_diameters(blk: EdgeBlock, n: int) -> np.ndarray:
    """Per-round graph diameter by vectorised Floyd-Warshall (inf if disconnected)."""
    rows = len(blk)
    dist = np.full((rows, n, n), np.inf)
    idx = np.arange(n)
    dist[:, idx, idx] = 0
    mask = blk.u >= 0
    r_idx = np.broadcast_to(np.arange(rows)[:, None], blk.u.shape)[mask]
    dist[r_idx, blk.u[mask], blk.v[mask]] = 1
    dist[r_idx, blk.v[mask], blk.u[mask]] = 1
    for w in range(n):
        np.minimum(dist, dist[:, :, w:w + 1] + dist[:, w:w + 1, :], out=dist)
    return dist.max(axis=(1, 2))


def _iter_blocks(sched: TopologySchedule, start: int, stop: int):
    """Yield (block, first_row, end_row) covering global rounds [start, stop)."""
    g = start
    while g < stop:
        blk = edge_block(sched, g // BLOCK)
        row = g - blk.start
        if row >= len(blk):
            raise ScheduleError(f"schedule exhausted at round {g}")
        end = min(len(blk), stop - blk.start)
        yield blk, row, end
        g = blk.start + end


def window_delta_diameter(sched: TopologySchedule, start: int, stop: int) -> tuple[int, int]:
    """Dynamic max degree and dynamic diameter over rounds ``[start, stop)``."""
    delta, diam = 0, 0
    if sched.static:
        stop = min(stop, start + 1)
    for blk, a, b in _iter_blocks(sched, start, stop):
        delta = max(delta, int(blk.deg[a:b].max()))
        dm = block_diameters(_slice(blk, a, b), sched.n).max()
        if not np.isfinite(dm):
            raise ScheduleError("disconnected round inside metrics window")
        diam = max(diam, int(dm))
    return delta, diam


def _slice(blk: EdgeBlock, a: int, b: int) -> EdgeBlock:
    return EdgeBlock(blk.start + a, blk.u[a:b], blk.v[a:b], blk.deg[a:b])


def flooding_time(sched: TopologySchedule, source: int, start: int, limit: int | None = None) -> list[int]:
    """Rounds needed for information at ``source`` (at round ``start``) to reach each node.

    A node is reached in round t if one of its round-t neighbours was reached
    before round t.
    """
    n = sched.n
    limit = limit if limit is not None else n - 1
    reached = [None] * n
    reached[source] = 0
    have = {source}
    t = start
    while len(have) < n and t - start < limit:
        g = generate(sched, t)
        new = set()
        for u, v in g.edges:
            if u in have and v not in have:
                new.add(v)
            elif v in have and u not in have:
                new.add(u)
        t += 1
        for x in new:
            reached[x] = t - start
        have |= new
    return reached


def metrics(sched: TopologySchedule, rounds: int) -> TopologyMetrics:
    """Dynamic max degree, dynamic diameter and chronopath over rounds ``[0, rounds)``.

    The chronopath is the largest flooding latency over all sources and all
    start rounds in the window (floods may use rounds after the window).
    """
    if rounds < 1:
        raise ScheduleError("need at least one round")
    delta, diam = window_delta_diameter(sched, 0, rounds)
    chrono = 0
    starts = range(1) if sched.static else range(rounds)
    for t0 in starts:
        for s in range(sched.n):
            try:
                lat = flooding_time(sched, s, t0)
            except ScheduleError:
                break
            if None in lat:
                raise ScheduleError("flood did not complete in n-1 rounds; schedule is not 1-interval connected")
            chrono = max(chrono, max(lat))
    return TopologyMetrics(delta=delta, diameter=diam, chronopath=chrono)
