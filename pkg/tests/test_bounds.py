import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from p2slab import bounds as bd


def test_alpha_exponents():
    assert bd.tradeoff("trotter", 2, 1, 1e-4, 1.0).alpha_exponent == pytest.approx(2 / 4)
    assert bd.tradeoff("floquet-magnus", 1, 1, 1e-4, 1.0).alpha_exponent == pytest.approx(1 / 3)
    assert bd.tradeoff("floquet-magnus", 0, 1, 1e-4, 1.0).alpha_exponent == 1.0
    assert bd.tradeoff("schrieffer-wolff", 1, 1, 1e-4, 1.0).alpha_exponent == pytest.approx(1 / 4)
    assert bd.tradeoff("schrieffer-wolff", 0, 1, 1e-4, 1.0).alpha_exponent == pytest.approx(1 / 2)


def test_trotter_control_is_integer():
    r = bd.trotter_tradeoff(2, 1, 1e-5, 1.0)
    assert r.control_name == "T" and r.control == int(r.control) and r.control >= 1


def test_fm_zeroth_order_balance_point():
    # with no u-dependence in the noise term the bound is minimised at u -> 0;
    # the reported control is the balance point c_noise gamma / c_map
    r = bd.fm_tradeoff(0, 1, 1e-3, 1.0)
    assert r.control == pytest.approx(1e-3)


@pytest.mark.parametrize("mapping", bd.MAPPINGS)
def test_tradeoff_rejects_bad_input(mapping):
    with pytest.raises(ValueError):
        bd.tradeoff(mapping, 1, 1, 0.0, 1.0)
    with pytest.raises(ValueError):
        bd.tradeoff(mapping, 1, 0, 1e-3, 1.0)


def test_unknown_mapping():
    with pytest.raises(ValueError):
        bd.tradeoff("adiabatic", 1, 1, 1e-3, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(bd.MAPPINGS), st.integers(1, 4), st.integers(1, 3), st.floats(-9, -3))
def test_bound_monotone_in_noise(mapping, p, d, lg):
    a = bd.tradeoff(mapping, p, d, 10 ** lg, 1.0).error_bound
    b = bd.tradeoff(mapping, p, d, 10 ** (lg + 0.5), 1.0).error_bound
    assert b >= a


def test_concatenated_rate_exact():
    assert bd.concatenated_rate(1e-3, 1e-2, 1, 2) == 1e-6
    assert bd.concatenated_rate(1e-3, 1e-2, 1, 0) == 1e-3
    # large exponents switch to the log form and underflow gracefully
    assert bd.concatenated_rate(1e-3, 1e-2, 1, 12) == 0.0


def test_ft_requires_below_threshold():
    with pytest.raises(ValueError, match="below threshold"):
        bd.FTParams(xi0=2e-2)
    assert bd.FTParams(xi0=1e-3).threshold_ratio == pytest.approx(10.0)


@pytest.mark.parametrize("delta, expected", [(1e-3, 3), (1e-6, 4), (1e-9, 5), (1e-12, 5)])
def test_required_levels(delta, expected):
    r = bd.ft_overhead(bd.FTParams(xi0=1e-3, delta=delta))
    assert r.required_L == expected
    assert abs(r.required_L - r.required_L_closed_form) <= 1


def test_required_levels_double_log_growth():
    deltas = 10.0 ** -np.arange(3, 31, 3)
    Ls = [bd.ft_overhead(bd.FTParams(xi0=1e-3, delta=float(x))).required_L for x in deltas]
    assert Ls == sorted(Ls)
    # levels track log log(1/delta) with base t+1 = 2
    assert Ls[-1] - Ls[0] <= math.ceil(math.log2(math.log(deltas[-1]) / math.log(deltas[0]))) + 1
