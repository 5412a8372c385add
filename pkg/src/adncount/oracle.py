"""Matrix reference for the potential dynamics.

The per-round update is the action of a symmetric d-lazy walk matrix
(``1/d`` per edge, ``1 - deg/d`` on the diagonal).  This module rebuilds the
trajectory from that matrix alone, independently of the protocol code, and
checks the walk's L2 mixing bound on sampled potentials.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2
import numpy as np

from adncount.network import RoundGraph, TopologySchedule, generate
from adncount.numeric import ExactScalar


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class WalkMatrix:
    n: int
    d: int
    entries: tuple          # rows of Fractions
    lazy: bool              # False when some degree reaches d

    def __post_init__(self):
        for i in range(self.n):
            for j in range(i):
                if self.entries[i][j] != self.entries[j][i]:
                    raise OracleError("walk matrix is not symmetric")

    def row_sums(self) -> list[Fraction]:
        return [sum(row, Fraction(0)) for row in self.entries]

    def apply(self, v: Sequence) -> list:
        return [sum((m * x for m, x in zip(row, v)), Fraction(0)) for row in self.entries]

    def as_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])


def walk_matrix(g: RoundGraph, d: int) -> WalkMatrix:
    if d < 2:
        raise OracleError("d must be at least 2")
    n = g.n
    deg = g.degrees()
    m = [[Fraction(0)] * n for _ in range(n)]
    for u, v in g.edges:
        m[u][v] = m[v][u] = Fraction(1, d)
    for i in range(n):
        m[i][i] = 1 - Fraction(deg[i], d)
    return WalkMatrix(n, d, tuple(tuple(r) for r in m), lazy=max(deg) < d)


def _integer_matrix(g: RoundGraph, d: int) -> list[list[int]]:
    """``d`` times the walk matrix; raises when the walk would not be lazy."""
    wm = walk_matrix(g, d)
    return [[int(x * d) for x in row] for row in wm.entries], wm.lazy


def evolve(v0: Sequence, schedule: TopologySchedule, d: int, t: int,
           start_round: int = 0, exact: bool = True) -> list:
    """``M_t ... M_1 v0`` using the schedule's rounds ``start_round .. start_round+t-1``.

    Exact mode returns Fractions (dense integer products over a ``d**t``
    denominator); float mode returns a numpy vector.
    """
    n = schedule.n
    if len(v0) != n:
        raise OracleError(f"vector has {len(v0)} entries, schedule has {n} nodes")
    if exact:
        v0 = [Fraction(x) for x in v0]
        den0 = 1
        for x in v0:
            den0 = den0 * x.denominator // gmpy2.gcd(den0, x.denominator)
        num = [gmpy2.mpz(x.numerator * (den0 // x.denominator)) for x in v0]
    else:
        vec = np.asarray(v0, dtype=float)
    for step in range(t):
        rnd = start_round + step
        g = generate(schedule, rnd)
        a, lazy = _integer_matrix(g, d)
        if not lazy:
            raise OracleError(f"round {rnd}: a node has degree >= d={d}")
        if exact:
            num = [sum(aij * x for aij, x in zip(row, num) if aij) for row in a]
        else:
            vec = (np.array(a, dtype=float) / d) @ vec
    if exact:
        den = den0 * gmpy2.mpz(d) ** t
        return [Fraction(int(x), int(den)) for x in num]
    return vec


# --- mixing bound ---------------------------------------------------------------------

def _numerators(vec: Sequence) -> list:
    """Integer numerators sharing one denominator (only ratios matter below)."""
    if all(isinstance(x, ExactScalar) for x in vec):
        e = max(x.exponent for x in vec)
        return [gmpy2.mpz(x.rebase(e).numerator) for x in vec]
    fr = [Fraction(x.to_fraction() if isinstance(x, ExactScalar) else x) for x in vec]
    den = 1
    for x in fr:
        den = den * x.denominator // gmpy2.gcd(den, x.denominator)
    return [gmpy2.mpz(x.numerator) * (den // x.denominator) for x in fr]


@dataclass(frozen=True)
class _Distance:
    """``||p - 1/n||^2 = top / (n^2 S^2)`` with ``top = sum_i (n*N_i - S)^2``."""

    diffs: tuple
    s: object

    @property
    def top(self):
        return sum(x * x for x in self.diffs)

    def top_approx(self):
        return sum(gmpy2.mpfr(x) ** 2 for x in self.diffs)


def _distance_terms(num: Sequence, n: int) -> _Distance:
    s = sum(num)
    if s <= 0:
        raise OracleError("potential vector has no mass")
    return _Distance(tuple(n * x - s for x in num), s)


def l2_distance_sq(vec: Sequence, n: int) -> Fraction:
    dist = _distance_terms(_numerators(vec), n)
    return Fraction(int(dist.top), int(n * n * dist.s * dist.s))


# 128-bit evaluation of a handful of products errs by far less than this
_DECISIVE = 1e-25


def _bound_ok(cur: _Distance, start: _Distance, q: int, t: int):
    """Whether ``top * S0^2 * q^t <= (q-1)^t * top0 * S^2``, and the ratio of the sides."""
    with gmpy2.context(precision=128):
        approx = (cur.top_approx() / start.top_approx()) * (gmpy2.mpfr(start.s) / gmpy2.mpfr(cur.s)) ** 2 \
            * (gmpy2.mpfr(q) / gmpy2.mpfr(q - 1)) ** t
        ratio = float(approx)
        if abs(approx - 1) > _DECISIVE:
            return bool(approx < 1), ratio
    lhs = cur.top * start.s ** 2 * gmpy2.mpz(q) ** t
    rhs = gmpy2.mpz(q - 1) ** t * start.top * cur.s ** 2
    return lhs <= rhs, ratio


def check_convergence_bound(samples: Iterable[tuple[int, Sequence]], d: int, D: int, n: int,
                            chronopath: int | None = None) -> dict:
    """Check ``||p_t - u||^2 <= (1 - 1/(d*D*n))^t ||p_0 - u||^2`` at each sample.

    ``samples`` yields ``(t, potentials)`` with ``t`` counted from the start of
    the phase; the ``t = 0`` sample supplies ``p_0`` and must come first.
    Comparisons are exact integer inequalities.  When ``chronopath`` is given
    the same check with it in place of ``D`` is reported alongside.
    """
    it = iter(samples)
    try:
        t0, v0 = next(it)
    except StopIteration:
        return {"rounds_checked": 0, "max_ratio_lhs_over_rhs": 0.0, "pass": True}
    if t0 != 0:
        raise OracleError("first sample must be the phase start (t=0)")
    start = _distance_terms(_numerators(v0), n)
    uniform = not any(start.diffs)
    q = d * D * n
    checked, worst, ok = 0, 0.0, True
    chrono_ok, chrono_worst = True, 0.0
    for t, vec in it:
        cur = _distance_terms(_numerators(vec), n)
        checked += 1
        if uniform or not any(cur.diffs):
            good = not any(cur.diffs)
            ratio = 0.0 if good else float("inf")
        else:
            good, ratio = _bound_ok(cur, start, q, t)
        ok &= good
        worst = max(worst, ratio)
        if chronopath is not None and not uniform and any(cur.diffs):
            g2, r2 = _bound_ok(cur, start, d * max(chronopath, 1) * n, t)
            chrono_ok &= g2
            chrono_worst = max(chrono_worst, r2)
    report = {"rounds_checked": checked, "max_ratio_lhs_over_rhs": worst, "pass": ok}
    if chronopath is not None:
        report["chronopath_bound"] = {"max_ratio_lhs_over_rhs": chrono_worst, "pass": chrono_ok}
    return report


def bounded_form_holds(vec: Sequence, n: int, d: int, D: int, t: int) -> bool:
    """The weaker form that replaces ``||p_0 - u||^2`` by 1."""
    dist = l2_distance_sq(vec, n)
    return dist <= Fraction(d * D * n - 1, d * D * n) ** t


# --- slack -------------------------------------------------------------------------------

def slack(phis: Sequence) -> list[Fraction]:
    return [1 - (x.to_fraction() if isinstance(x, ExactScalar) else Fraction(x)) for x in phis]


def threshold_population(phis: Sequence, tau: Fraction) -> int:
    """Number of nodes with potential at most ``tau``."""
    return sum(1 for s in slack(phis) if 1 - s <= tau)


def slack_report(phis: Sequence, tau: Fraction, kpow: Fraction) -> dict:
    s = slack(phis)
    low = threshold_population(phis, tau)
    return {
        "slack_sum": sum(s, Fraction(0)),
        "below_threshold": low,
        "population_ok": low <= kpow,
    }
