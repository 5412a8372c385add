"""Aggregates computed alongside counting: sum, average, symmetric Boolean
functions, and max/min by flooding.

Each input bit rides along as an extra coordinate updated by exactly the same
rule as the potential.  After the accepted epoch (size ``n``), the value of
coordinate ``j`` at the end of phase 1 is close to ``S_j / n`` where ``S_j`` is
the number of nodes with bit ``j`` set, so ``round(n * coord_j)`` recovers it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from adncount.network import TopologySchedule, generate
from adncount.numeric import ExactScalar

SUM_FUNCTIONS = ("sum", "average")
BOOLEAN_FUNCTIONS = ("and", "or", "xor", "nand", "nor", "xnor")
EXTREMA_FUNCTIONS = ("max", "min")
FUNCTIONS = ("count",) + SUM_FUNCTIONS + BOOLEAN_FUNCTIONS + EXTREMA_FUNCTIONS


class DecodeError(ArithmeticError):
    pass


@dataclass(frozen=True)
class AggregateResult:
    sum: int | None = None
    average: Fraction | None = None
    boolean: dict | None = None
    max: int | None = None
    min: int | None = None

    def to_json(self) -> dict:
        out = {}
        if self.sum is not None:
            out["sum"] = self.sum
        if self.average is not None:
            out["average"] = f"{self.average.numerator}/{self.average.denominator}"
        if self.boolean is not None:
            out["boolean"] = dict(self.boolean)
        if self.max is not None:
            out["max"] = self.max
            out["min"] = self.min
        return out


def encode_values(inputs: Sequence[int], width: int) -> list[tuple[int, ...]]:
    """Bits (LSB first) per node; node 0, the leader, contributes zeros."""
    out = []
    for i, x in enumerate(inputs):
        if x < 0 or x >= 1 << width:
            raise ValueError(f"input {x} of node {i} does not fit in {width} bits")
        out.append((0,) * width if i == 0 else tuple((x >> j) & 1 for j in range(width)))
    return out


def _round_scaled(coord, n: int) -> int:
    """``round(n * coord)``, refusing ambiguous residues of 1/2 or more."""
    if isinstance(coord, ExactScalar):
        num, den = n * coord.numerator, coord.denominator
        s = (2 * num + den) // (2 * den)
        if 2 * abs(num - s * den) >= den:
            raise DecodeError(f"coordinate {coord!r} times {n} is not within 1/2 of an integer")
        return int(s)
    if isinstance(coord, Fraction):
        return _round_fraction(coord, n)
    x = n * float(coord)
    s = round(x)
    if abs(x - s) >= 0.5:
        raise DecodeError(f"coordinate {coord!r} times {n} is not within 1/2 of an integer")
    return int(s)


def _round_fraction(coord: Fraction, n: int) -> int:
    x = n * coord
    s = (2 * x.numerator + x.denominator) // (2 * x.denominator)
    if abs(x - s) >= Fraction(1, 2):
        raise DecodeError(f"coordinate {coord} times {n} is not within 1/2 of an integer")
    return int(s)


def bit_counts(snapshot: Sequence, n: int) -> list[int]:
    return [_round_scaled(c, n) for c in snapshot]


def decode_sum(snapshot: Sequence, n: int, leader_input: int = 0) -> int:
    """Sum of all inputs from one node's phase-1 coordinates of the accepted epoch."""
    return leader_input + sum(s << j for j, s in enumerate(bit_counts(snapshot, n)))


def residues(snapshot: Sequence, n: int) -> list[float]:
    """``|n*coord_j - round(n*coord_j)|`` per coordinate, for margin reporting."""
    out = []
    for c in snapshot:
        x = n * (c.to_fraction() if isinstance(c, ExactScalar) else Fraction(c))
        out.append(float(abs(x - round(x))))
    return out


def boolean_eval(total: int, n: int, fn: str, xor_mode: str = "parity") -> int:
    """Symmetric Boolean function of ``n`` bits from their sum.

    ``xor_mode="parity"`` gives the usual n-ary XOR (odd number of ones);
    ``"exactly_one"`` reads XOR as "exactly one input is set".
    """
    if not 0 <= total <= n:
        raise ValueError(f"bit sum {total} outside [0, {n}]")
    if xor_mode not in ("parity", "exactly_one"):
        raise ValueError(f"unknown xor mode {xor_mode!r}")
    xor = total % 2 == 1 if xor_mode == "parity" else total == 1
    table = {
        "and": total == n,
        "or": total > 0,
        "xor": xor,
    }
    base = fn[1:] if fn in ("nand", "nor") else ("xor" if fn == "xnor" else fn)
    if base not in table:
        raise ValueError(f"unknown Boolean function {fn!r}")
    value = table[base]
    return int(not value if fn in ("nand", "nor", "xnor") else value)


def flood_extrema(inputs: Sequence[int], schedule: TopologySchedule, n: int,
                  start_round: int = 0, per_node: bool = False):
    """Flood running max/min for ``n`` rounds starting at ``start_round``.

    Returns ``(max, min)``, or per-node lists of each when ``per_node``.
    """
    if len(inputs) != n:
        raise ValueError(f"expected {n} inputs, got {len(inputs)}")
    hi, lo = list(inputs), list(inputs)
    for t in range(start_round, start_round + n):
        g = generate(schedule, t)
        new_hi, new_lo = hi[:], lo[:]
        for u, v in g.edges:
            new_hi[u] = max(new_hi[u], hi[v])
            new_hi[v] = max(new_hi[v], hi[u])
            new_lo[u] = min(new_lo[u], lo[v])
            new_lo[v] = min(new_lo[v], lo[u])
        hi, lo = new_hi, new_lo
    if per_node:
        return hi, lo
    if len(set(hi)) != 1 or len(set(lo)) != 1:
        raise RuntimeError("flooding did not converge; schedule is not 1-interval connected")
    return hi[0], lo[0]
