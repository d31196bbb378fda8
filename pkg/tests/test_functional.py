import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ltlab.errors import DegenerateInputError, InvalidInputError
from ltlab.functional import (
    check_gamma,
    gns_exponent,
    gns_reference_L1,
    riesz_ratio,
    riesz_sum,
    subadditivity_check,
)
from ltlab.grid import Grid1D, PotentialField, RadialGrid, rescale
from ltlab.kdv import SolitonSpec, soliton_profile

LINE = Grid1D(-60.0, 60.0, 8192)


# -- admissibility -------------------------------------------------------------


@pytest.mark.parametrize("gamma,dim", [(0.5, 1), (0.3, 1), (0.0, 2), (-0.1, 3), (0.0, 3), (math.nan, 1)])
def test_inadmissible_gamma(gamma, dim):
    with pytest.raises(InvalidInputError):
        check_gamma(gamma, dim)


@pytest.mark.parametrize("gamma,dim", [(0.51, 1), (1.5, 1), (0.01, 2), (0.5, 3)])
def test_admissible_gamma(gamma, dim):
    check_gamma(gamma, dim)


def test_gamma_zero_only_with_flag():
    check_gamma(0.0, 3, allow_zero=True)


# -- riesz_ratio ---------------------------------------------------------------


@pytest.mark.parametrize("betas", [(0.7,), (0.8, 0.5), (0.9, 0.6, 0.3), (1.0, 0.8, 0.5, 0.3)])
def test_soliton_ratio_is_three_sixteenths(betas):
    V = soliton_profile(SolitonSpec(betas, tuple(np.linspace(-6, 6, len(betas)))), LINE)
    rep = riesz_ratio(V, 1.5, len(betas))
    assert rep.ratio == pytest.approx(0.1875, abs=1e-4)
    assert rep.ratio * rep.norm_power == pytest.approx(rep.riesz_sum, rel=1e-15)


def test_truncation_at_negative_count():
    V = soliton_profile(SolitonSpec((0.6,)), LINE)
    one = riesz_ratio(V, 1.5, 1)
    three = riesz_ratio(V, 1.5, 3)
    # the extra eigsh vectors perturb the ground level only at round-off
    assert three.ratio == pytest.approx(one.ratio, rel=1e-10)
    assert three.negative_count == 1
    assert three.eigenvalues[1:] == (0.0, 0.0)


@pytest.mark.parametrize("t", [0.5, 2.0])
@pytest.mark.parametrize("gamma", [1.0, 1.5, 2.0])
def test_ratio_dilation_invariant(t, gamma):
    g = Grid1D(-60.0, 60.0, 8191)
    V = PotentialField(g, 2.0 * np.exp(-0.5 * g.nodes ** 2))
    a = riesz_ratio(V, gamma, 3).ratio
    b = riesz_ratio(rescale(V, t), gamma, 3).ratio
    assert b == pytest.approx(a, rel=1e-3)


def test_ratio_zero_potential_is_degenerate():
    with pytest.raises(DegenerateInputError):
        riesz_ratio(PotentialField(LINE, np.zeros(LINE.n)), 1.5, 1)


def test_ratio_rejects_gamma_zero():
    g = RadialGrid(10.0, 100, 3)
    with pytest.raises(InvalidInputError):
        riesz_ratio(PotentialField(g, np.exp(-g.nodes)), 0.0, 1)


def test_riesz_sum_ignores_padding():
    assert riesz_sum([-4.0, -1.0, 0.0], 1.5, 3) == pytest.approx(9.0)
    assert riesz_sum([-4.0, -1.0, 0.0], 1.5, 1) == pytest.approx(8.0)


def test_report_serializes():
    V = soliton_profile(SolitonSpec((0.6,)), LINE)
    d = riesz_ratio(V, 1.5, 2).to_dict()
    assert set(d) >= {"gamma", "dim", "n_states", "riesz_sum", "norm_power", "ratio", "eigenvalues"}
    row = riesz_ratio(V, 1.5, 2).ledger_row()
    assert list(row) == ["gamma", "dim", "N", "ratio", "norm_power", "neg_count"]


@settings(max_examples=20, deadline=None)
@given(
    amp=st.floats(min_value=0.2, max_value=4.0),
    width=st.floats(min_value=0.3, max_value=3.0),
    gamma=st.sampled_from([1.0, 1.5, 2.0]),
)
def test_one_level_ratio_below_reference(amp, width, gamma):
    g = Grid1D(-40.0, 40.0, 2047)
    V = PotentialField(g, amp * np.exp(-0.5 * (g.nodes / width) ** 2))
    ratio = riesz_ratio(V, gamma, 1).ratio
    ref = oracles.lt_one_level_1d_closed_form(gamma)
    assert ratio <= ref * (1 + 1e-3)


# -- GNS reference ---------------------------------------------------------------


def test_gns_exponent():
    assert gns_exponent(1.5, 1) == pytest.approx(4.0)
    assert gns_exponent(1.0, 1) == pytest.approx(6.0)
    assert gns_exponent(1.0, 3) == pytest.approx(10.0 / 3.0)


def test_gns_gamma_three_halves():
    assert gns_reference_L1(1.5, 1) == pytest.approx(0.1875, abs=1e-3)


def test_gns_matches_shooting_oracle_gamma_one():
    assert oracles.gns_L1_shooting_1d(1.0) == pytest.approx(
        oracles.FROZEN_GNS_L1_GAMMA1_D1, abs=oracles.FROZEN_GNS_TOL
    )
    assert gns_reference_L1(1.0, 1) == pytest.approx(oracles.FROZEN_GNS_L1_GAMMA1_D1, abs=1e-3)


@pytest.mark.parametrize("gamma", [0.55, 0.6, 0.75, 2.0, 3.0])
def test_gns_matches_closed_form_1d(gamma):
    assert gns_reference_L1(gamma, 1) == pytest.approx(oracles.lt_one_level_1d_closed_form(gamma), rel=1e-3)


@pytest.mark.parametrize("gamma,dim", [(1.0, 2), (1.0, 3), (0.5, 3)])
def test_gns_higher_dimensions_bound_radial_quotients(gamma, dim):
    # any radial potential gives a lower bound for L^(1)
    L1 = gns_reference_L1(gamma, dim)
    g = RadialGrid(30.0, 3000, dim)
    for amp in (2.0, 8.0, 30.0):
        V = PotentialField(g, amp * np.exp(-0.5 * g.nodes ** 2))
        assert riesz_ratio(V, gamma, 1).ratio <= L1 * (1 + 1e-3)


def test_gns_rejects_critical():
    with pytest.raises(InvalidInputError):
        gns_reference_L1(0.0, 3)


def test_gns_nonconvergence_raises():
    from ltlab.errors import NumericalFailureError

    with pytest.raises(NumericalFailureError) as info:
        gns_reference_L1(1.0, 2, max_iter=1)
    assert info.value.residual > 0


# -- subadditivity ---------------------------------------------------------------


def test_constant_table_has_no_violations():
    assert subadditivity_check({n: 0.3 for n in range(1, 8)}) == []


def test_three_sixteenths_table():
    table = {n: 0.1875 for n in range(1, 6)}
    for mode in ("subadditive", "quotient_monotone", "monotone"):
        assert subadditivity_check(table, mode=mode) == []


def test_lowered_second_entry_is_reported():
    table = {1: 1.0, 2: 0.9}
    assert (2, 1) in subadditivity_check(table)
    assert (2, 1) in subadditivity_check(table, mode="monotone")


@pytest.mark.parametrize("table", [{}, {1: 0.0}, {1: -1.0}, {1: math.inf}])
def test_bad_tables(table):
    with pytest.raises(InvalidInputError):
        subadditivity_check(table)


def test_bad_mode():
    with pytest.raises(InvalidInputError):
        subadditivity_check({1: 1.0}, mode="nope")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=1e-3, max_value=10.0), min_size=1, max_size=12))
def test_tables_from_a_single_potential_are_quotient_monotone(mus_raw):
    # N mu_N^{d/2} / norm: N/c_N = norm / mu_N^{d/2} is nondecreasing for decreasing mu
    mus = sorted(mus_raw, reverse=True)
    table = {N: N * mus[N - 1] ** 1.5 / 7.0 for N in range(1, len(mus) + 1)}
    assert subadditivity_check(table, mode="quotient_monotone") == []


def test_round_off_at_large_scale_is_not_a_violation():
    # equal mu_5 = mu_6 = 1e-3: both quotients are ~2.2e5 and differ only in the last bits
    mu = 1e-3
    table = {5: 5 * mu ** 1.5 / 7.0, 6: 6 * mu ** 1.5 / 7.0}
    assert subadditivity_check(table, mode="quotient_monotone") == []
    assert subadditivity_check({1: 1e-8, 2: 1e-8 * (1 - 1e-6)}, mode="monotone") == [(2, 1)]
