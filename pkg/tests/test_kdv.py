import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ltlab.errors import InvalidInputError
from ltlab.grid import Grid1D, PotentialField, lp_norm_power
from ltlab.kdv import (
    MANIFOLD_CUBE_SUM,
    SolitonSpec,
    exact_spectrum,
    manifold_distance,
    normalize_to_manifold,
    soliton_profile,
    soliton_values,
)

LINE = Grid1D(-60.0, 60.0, 8192)


# -- SolitonSpec ---------------------------------------------------------------


@pytest.mark.parametrize(
    "betas,shifts",
    [((0.5, 0.8), None), ((0.5, 0.5), None), ((0.5, -0.1), None), ((), None), ((0.8, 0.5), (0.0,)),
     ((math.inf,), None), ((0.5,), (math.nan,))],
)
def test_spec_validation(betas, shifts):
    with pytest.raises(InvalidInputError):
        SolitonSpec(betas, shifts)


def test_spec_default_shifts():
    assert SolitonSpec((0.8, 0.5)).shifts == (0.0, 0.0)


# -- profile -------------------------------------------------------------------


@pytest.mark.parametrize("b", [0.3, 0.8, 1.7])
def test_one_soliton_closed_form(b):
    x = LINE.nodes
    V = soliton_profile(SolitonSpec((b,)), LINE)
    # the log-det formula is accurate relative to the peak 2 b^2 (tails lose relative digits)
    np.testing.assert_allclose(V.values, oracles.one_soliton(x, b), rtol=1e-12, atol=1e-14 * 2 * b * b)
    assert soliton_values([b], [0.0], np.array([0.0]))[0] == pytest.approx(2 * b * b, rel=1e-14)


@pytest.mark.parametrize("X", [-7.5, 3.0])
def test_one_soliton_centred_at_shift(X):
    b = 0.6
    vals = soliton_values([b], [X], LINE.nodes)
    np.testing.assert_allclose(vals, oracles.one_soliton(LINE.nodes, b, X), rtol=1e-12, atol=1e-14 * 2 * b * b)


def test_l2_norm_identity():
    betas = (0.9, 0.6, 0.3)
    V = soliton_profile(SolitonSpec(betas, (-3.0, 1.0, 4.0)), LINE)
    assert lp_norm_power(V, 2.0) == pytest.approx(16.0 / 3.0 * sum(b ** 3 for b in betas), rel=1e-8)


def test_large_separation_is_sum_of_one_solitons():
    b1, b2 = 0.8, 0.5
    x = LINE.nodes
    V = soliton_values([b1, b2], [-30.0, 30.0], x)
    # the faster soliton is phase shifted by the interaction; the slower one is not
    shift = oracles.two_soliton_asymptotic_shift(b1, b2)
    ref = oracles.one_soliton(x, b1, -30.0 + shift) + oracles.one_soliton(x, b2, 30.0)
    assert np.max(np.abs(V - ref)) <= 1e-6


def test_profile_finite_far_from_solitons():
    x = np.array([-1e4, -500.0, 0.0, 500.0, 1e4])
    vals = soliton_values([1.5, 1.0, 0.2], [0.0, 10.0, -10.0], x)
    assert np.all(np.isfinite(vals)) and np.all(vals >= 0)


@settings(max_examples=25, deadline=None)
@given(
    betas=st.lists(st.floats(min_value=0.2, max_value=1.2), min_size=1, max_size=4, unique=True),
    shifts=st.lists(st.floats(min_value=-8.0, max_value=8.0), min_size=4, max_size=4),
)
def test_spectrum_oracle_closure(betas, shifts):
    betas = sorted(betas, reverse=True)
    if len(betas) > 1 and min(-np.diff(betas)) < 0.05:
        return
    spec = SolitonSpec(tuple(betas), tuple(shifts[: len(betas)]))
    g = Grid1D(-60.0, 60.0, 4096)
    V = soliton_profile(spec, g)
    from ltlab.schrodinger import lowest_eigenpairs

    lam = lowest_eigenpairs(V, spec.order).eigenvalues
    # second-order error: |d lambda| <~ beta^4 h^2 / 3
    np.testing.assert_allclose(lam, exact_spectrum(spec), atol=max(betas) ** 4 * g.h ** 2)


# -- spectrum, normalization ---------------------------------------------------


def test_exact_spectrum_examples():
    np.testing.assert_allclose(exact_spectrum(SolitonSpec((0.8, 0.5))), [-0.64, -0.25])
    assert exact_spectrum(SolitonSpec((0.3,)))[0] == pytest.approx(-0.09)
    a = exact_spectrum(SolitonSpec((0.8, 0.5), (0.0, 0.0)))
    b = exact_spectrum(SolitonSpec((0.8, 0.5), (-9.0, 4.0)))
    assert np.array_equal(a, b)


def test_normalize_one_soliton():
    spec = normalize_to_manifold(SolitonSpec((1.0,)))
    assert spec.betas[0] == pytest.approx((3 / 16) ** (1 / 3), rel=1e-14)


def test_normalize_idempotent_and_cube_sum():
    spec = normalize_to_manifold(SolitonSpec((0.9, 0.6, 0.3), (1.0, 2.0, 3.0)))
    assert sum(b ** 3 for b in spec.betas) == pytest.approx(MANIFOLD_CUBE_SUM, abs=1e-12)
    again = normalize_to_manifold(spec)
    np.testing.assert_allclose(again.betas, spec.betas, rtol=1e-15)
    np.testing.assert_allclose(again.shifts, spec.shifts, rtol=1e-15)


def test_normalize_scales_shifts_like_rescale():
    # beta -> c beta and X -> X / c is exactly the dilation c^2 V(c x)
    spec = SolitonSpec((0.9, 0.4), (2.0, -3.0))
    norm = normalize_to_manifold(spec)
    c = norm.betas[0] / spec.betas[0]
    x = np.linspace(-20, 20, 101)
    np.testing.assert_allclose(
        soliton_values(norm.betas, norm.shifts, x), c * c * soliton_values(spec.betas, spec.shifts, c * x),
        rtol=1e-10, atol=1e-14,
    )


def test_degeneration_to_lower_order():
    b = (0.9, 0.6)
    full = soliton_values([0.9, 0.6, 1e-3], [0.0, 5.0, 0.0], LINE.nodes)
    lower = soliton_values(list(b), [0.0, 5.0], LINE.nodes)
    # the tiny third soliton only shifts the others by O(beta_3); compare up to a fit of shifts
    d = math.sqrt(LINE.h * np.sum((full - lower) ** 2))
    assert d <= 1e-2


# -- manifold distance ---------------------------------------------------------


def test_self_fit_two_soliton():
    spec = normalize_to_manifold(SolitonSpec((0.8, 0.5), (-4.0, 6.0)))
    fit = manifold_distance(soliton_profile(spec, LINE), 2)
    assert fit.l2_distance <= 1e-6
    assert fit.order == 2
    np.testing.assert_allclose(fit.fitted_spec.betas, spec.betas, atol=1e-6)
    assert sum(b ** 3 for b in fit.fitted_spec.betas) == pytest.approx(MANIFOLD_CUBE_SUM, abs=1e-12)


def test_distance_shift_invariant():
    g = Grid1D(-60.0, 60.0, 4095)
    x = g.nodes
    base = np.exp(-0.5 * x ** 2)
    moved = np.exp(-0.5 * (x - 10 * g.h) ** 2)
    a = manifold_distance(PotentialField(g, base), 2).l2_distance
    b = manifold_distance(PotentialField(g, moved), 2).l2_distance
    assert a == pytest.approx(b, abs=1e-8)


def test_gaussian_distance_positive():
    g = Grid1D(-30.0, 30.0, 2047)
    V = PotentialField(g, np.exp(-0.5 * g.nodes ** 2))
    fit = manifold_distance(V, 2)
    assert fit.l2_distance > 1e-3 and math.isfinite(fit.l2_distance)


def test_no_bound_state_fits_zero():
    g = Grid1D(-10.0, 10.0, 199)
    V = PotentialField(g, np.zeros(199))
    fit = manifold_distance(V, 3)
    assert fit.order == 0 and fit.fitted_spec is None and fit.l2_distance == 0.0


def test_manifold_distance_rejects_radial_and_bad_order():
    from ltlab.grid import RadialGrid

    with pytest.raises(InvalidInputError):
        manifold_distance(PotentialField(RadialGrid(1.0, 9, 3), np.ones(9)), 1)
    with pytest.raises(InvalidInputError):
        manifold_distance(PotentialField(LINE, np.zeros(LINE.n)), 0)
