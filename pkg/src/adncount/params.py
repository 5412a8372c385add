"""Per-estimate parameter schedule and the closed-form round count.

For an estimate ``k`` and slack exponent ``eps`` the protocol uses::

    d   = ceil(k^(1+eps))
    p   = ceil((2+eps) k^(1+eps) / (1-1/k) * ln k)
    r   = ceil((4 + 2 eps + max(0, -2 ln(k^eps - 1)/ln k)) * d * k^(2+2eps) * ln k)
    tau = 1 - 1/k^(1+eps)

and a run that stops at estimate ``n`` takes ``sum_{k=2..n} (p*r + k)`` rounds.
All transcendental quantities are evaluated with mpmath at 50 significant
digits so that the ceilings agree with the true real-valued ceilings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath

WORK_DPS = 50
# a value closer than this to an integer is re-evaluated at higher precision
_BOUNDARY = mpmath.mpf(10) ** -30


class ParamsError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolParams:
    k: int
    epsilon: float
    d: int
    p: int
    r: int
    tau: Fraction
    # k^(1+eps): the Lemma 3/4 population bound (2k under the auto policy)
    kpow: Fraction

    @property
    def rounds(self) -> int:
        """Rounds of one epoch: p phases of r rounds plus k dissemination rounds."""
        return self.p * self.r + self.k


@dataclass(frozen=True)
class EpsilonPolicy:
    mode: str = "auto"
    value: float | None = None

    def __post_init__(self):
        if self.mode not in ("auto", "fixed"):
            raise ParamsError(f"unknown epsilon mode {self.mode!r}")
        if self.mode == "fixed":
            if self.value is None or not math.isfinite(self.value) or self.value <= 0:
                raise ParamsError(f"fixed epsilon must be a positive finite real, got {self.value!r}")

    @classmethod
    def parse(cls, text: str) -> "EpsilonPolicy":
        if text == "auto":
            return cls()
        try:
            value = float(text)
        except ValueError as exc:
            raise ParamsError(f"epsilon must be 'auto' or a positive real, got {text!r}") from exc
        return cls("fixed", value)

    def params(self, k: int) -> ProtocolParams:
        if self.mode == "auto":
            return compute_params(k, None)
        return compute_params(k, self.value)

    def describe(self) -> str:
        return "auto" if self.mode == "auto" else repr(self.value)


def default_epsilon(k: int) -> float:
    """``log_k 2``, the choice that makes ``k^eps == 2``."""
    if k < 2:
        raise ParamsError(f"k must be at least 2, got {k}")
    return math.log(2) / math.log(k)


def _ceil(x: mpmath.mpf) -> int:
    c = int(mpmath.ceil(x))
    if abs(x - mpmath.nint(x)) < _BOUNDARY:
        raise ParamsError(f"ceiling argument {mpmath.nstr(x, 40)} is within 1e-30 of an integer")
    return c


def _rational(x: mpmath.mpf) -> Fraction:
    """Exact rational when ``x`` is an integer at working precision, else a 40-digit approximation."""
    nearest = mpmath.nint(x)
    if abs(x - nearest) < _BOUNDARY:
        return Fraction(int(nearest))
    return Fraction(mpmath.nstr(x, 40, min_fixed=-mpmath.inf, max_fixed=mpmath.inf)).limit_denominator(10**40)


@lru_cache(maxsize=None)
def compute_params(k: int, epsilon: float | None = None) -> ProtocolParams:
    """Parameters for estimate ``k``.

    ``epsilon=None`` selects the auto policy ``eps = log_k 2``; in that case the
    identity ``k^eps = 2`` is used symbolically so ``d = 2k`` and the max-term
    in ``r`` vanishes exactly.
    """
    if not isinstance(k, int) or k < 2:
        raise ParamsError(f"k must be an integer >= 2, got {k!r}")
    if epsilon is not None and (not math.isfinite(epsilon) or epsilon <= 0):
        raise ParamsError(f"epsilon must be a positive finite real, got {epsilon!r}")

    with mpmath.workdps(WORK_DPS):
        lnk = mpmath.log(k)
        if epsilon is None:
            eps = mpmath.log(2) / lnk
            keps = mpmath.mpf(2)
            extra = mpmath.mpf(0)
        else:
            eps = mpmath.mpf(epsilon)
            keps = mpmath.power(k, eps)
            extra = max(mpmath.mpf(0), -2 * mpmath.log(keps - 1) / lnk)
        kpow = k * keps                      # k^(1+eps)
        if epsilon is None:
            kpow_exact = Fraction(2 * k)
            d = 2 * k
        else:
            kpow_exact = _rational(kpow)
            d = int(kpow_exact) if kpow_exact.denominator == 1 else _ceil(kpow)
        p = _ceil((2 + eps) * kpow / (1 - mpmath.mpf(1) / k) * lnk)
        r = _ceil((4 + 2 * eps + extra) * d * kpow * kpow * lnk)
        tau = 1 - 1 / kpow_exact
        eps_float = float(eps)

    if not 0 < tau < 1 or d < 2 or p < 1 or r < 1:
        raise ParamsError(f"degenerate parameters for k={k}, eps={epsilon}")
    return ProtocolParams(k=k, epsilon=eps_float, d=d, p=p, r=r, tau=tau, kpow=kpow_exact)


def total_rounds(n: int, policy: EpsilonPolicy | None = None) -> int:
    """Closed-form rounds until all nodes stop when the true size is ``n``."""
    if n < 2:
        raise ParamsError(f"n must be at least 2, got {n}")
    policy = policy or EpsilonPolicy()
    return sum(policy.params(k).rounds for k in range(2, n + 1))
