"""Parameter schedule against an independent decimal-module evaluation."""

import math
from decimal import Decimal, getcontext
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from adncount.params import (EpsilonPolicy, ParamsError, compute_params, default_epsilon,
                             total_rounds)

getcontext().prec = 60


def _ceil(x: Decimal) -> int:
    return int(x.to_integral_value(rounding="ROUND_CEILING"))


def oracle_auto(k: int) -> tuple[int, int, int]:
    """With k^eps = 2: (2+eps) ln k = 2 ln k + ln 2 and (4+2eps) ln k = 4 ln k + 2 ln 2."""
    lnk, ln2 = Decimal(k).ln(), Decimal(2).ln()
    d = 2 * k
    p = _ceil(Decimal(2 * k) * (2 * lnk + ln2) * k / (k - 1))
    r = _ceil(Decimal(d) * 4 * k * k * (4 * lnk + 2 * ln2))
    return d, p, r


# frozen from oracle_auto
AUTO_TABLE = {
    2: (4, 17, 267),
    3: (6, 27, 1249),
    4: (8, 37, 3549),
    5: (10, 49, 7825),
    6: (12, 62, 14781),
    7: (14, 75, 25163),
    8: (16, 89, 39748),
}
TOTALS = {2: 4541, 3: 38267, 4: 169584, 5: 553014, 6: 1469442, 7: 3356674, 8: 6894254}


@pytest.mark.parametrize("k", sorted(AUTO_TABLE))
def test_oracle_table_is_frozen(k):
    assert oracle_auto(k) == AUTO_TABLE[k]


@pytest.mark.parametrize("k", sorted(AUTO_TABLE))
def test_auto_params_match_oracle(k):
    prm = compute_params(k)
    assert (prm.d, prm.p, prm.r) == AUTO_TABLE[k]
    assert prm.tau == Fraction(2 * k - 1, 2 * k)
    assert prm.kpow == 2 * k
    assert prm.rounds == prm.p * prm.r + k


@pytest.mark.parametrize("k", range(2, 65))
def test_auto_params_match_oracle_wide(k):
    prm = compute_params(k)
    assert (prm.d, prm.p, prm.r) == oracle_auto(k)


def test_epsilon_one_at_k2_equals_auto():
    prm = compute_params(2, 1.0)
    assert (prm.d, prm.p, prm.r, prm.tau) == (4, 17, 267, Fraction(3, 4))


def test_default_epsilon():
    assert default_epsilon(2) == 1.0
    assert default_epsilon(4) == pytest.approx(0.5, abs=1e-15)
    assert default_epsilon(3) == pytest.approx(0.630930, abs=1e-6)
    with pytest.raises(ParamsError):
        default_epsilon(1)


@pytest.mark.parametrize("n", sorted(TOTALS))
def test_total_rounds(n):
    assert total_rounds(n) == TOTALS[n]


def test_total_rounds_by_hand():
    assert total_rounds(2) == 17 * 267 + 2
    assert total_rounds(3) == 4541 + 27 * 1249 + 3
    assert total_rounds(5) == 38267 + 37 * 3549 + 4 + 49 * 7825 + 5


def test_rejects_bad_inputs():
    with pytest.raises(ParamsError):
        compute_params(1)
    with pytest.raises(ParamsError):
        compute_params(3, float("nan"))
    with pytest.raises(ParamsError):
        compute_params(3, -0.5)
    with pytest.raises(ParamsError):
        total_rounds(1)
    with pytest.raises(ParamsError):
        EpsilonPolicy("fixed", None)
    with pytest.raises(ParamsError):
        EpsilonPolicy.parse("lots")


def test_policy_parse():
    assert EpsilonPolicy.parse("auto") == EpsilonPolicy()
    assert EpsilonPolicy.parse("0.5") == EpsilonPolicy("fixed", 0.5)
    assert EpsilonPolicy.parse("0.5").describe() == "0.5"


def oracle_fixed(k: int, eps: float) -> tuple[int, int, int]:
    e = Decimal(eps)
    lnk = Decimal(k).ln()
    keps = (e * lnk).exp()
    kpow = k * keps
    if abs(kpow - kpow.to_integral_value()) < Decimal("1e-40"):
        kpow = kpow.to_integral_value()
    d = _ceil(kpow)
    extra = max(Decimal(0), -2 * (keps - 1).ln() / lnk)
    p = _ceil((2 + e) * kpow / (1 - Decimal(1) / k) * lnk)
    r = _ceil((4 + 2 * e + extra) * d * kpow * kpow * lnk)
    return d, p, r


@given(st.integers(2, 30), st.sampled_from([0.25, 0.3, 0.5, 0.75, 1.5, 2.0]))
def test_fixed_epsilon_matches_oracle(k, eps):
    prm = compute_params(k, eps)
    assert (prm.d, prm.p, prm.r) == oracle_fixed(k, eps)
    assert 0 < prm.tau < 1
    assert prm.d >= prm.kpow


@given(st.integers(2, 63))
def test_total_rounds_monotone(n):
    assert total_rounds(n + 1) > total_rounds(n)


@given(st.integers(2, 200))
def test_auto_policy_identities(k):
    prm = compute_params(k)
    assert prm.d == 2 * k
    assert prm.epsilon == pytest.approx(math.log(2) / math.log(k))


def test_envelope_constant():
    ratios = [total_rounds(n) / (n ** 5 * math.log(n) ** 2) for n in range(2, 65)]
    assert max(ratios) == ratios[0]
    assert 294 < ratios[0] < 296
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
