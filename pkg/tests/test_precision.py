"""Precision context plumbing and the digit-budget rules."""

import gmpy2
from hypothesis import given, strategies as st

from hopfzero.precision import (
    clamp_digits,
    current_digits,
    digits_for_one_dim,
    digits_for_transit,
    digits_for_two_dim,
    mpf,
    structural_tol,
    to_decimal,
    working_precision,
)


def test_context_nests_and_restores():
    base = current_digits()
    with working_precision(60):
        assert current_digits() == 60
        with working_precision(25):
            assert current_digits() == 25
        assert current_digits() == 60
    assert current_digits() == base


def test_literal_parsing_uses_active_precision():
    with working_precision(50):
        x = mpf("0.1")
        # a 53-bit 0.1 differs from the 50-digit one in the 17th place
        assert abs(x - mpf(1) / 10) < mpf(10) ** -48


def test_to_decimal_round_trip():
    with working_precision(40):
        x = gmpy2.const_pi()
        s = to_decimal(x, 38)
        assert abs(mpf(s) - x) < mpf(10) ** -36


@given(st.floats(0.02, 0.5))
def test_one_dim_budget_covers_the_gap_size(eps):
    d = digits_for_one_dim(eps)
    # the gap is about exp(-pi/(2 eps)); the budget must see it with room
    gap_digits = float(gmpy2.const_pi()) / (2 * eps) / 2.302585
    assert d >= gap_digits + 10


@given(st.floats(0.02, 0.5), st.floats(0.5, 1.9))
def test_two_dim_budget_dominates_one_dim_for_small_a(eps, a):
    if a <= 1:
        assert digits_for_two_dim(eps, a) >= digits_for_one_dim(eps)


@given(st.floats(0.02, 0.5), st.floats(0.5, 1.9))
def test_transit_budget_at_least_two_dim(eps, a):
    assert digits_for_transit(eps, a) >= digits_for_two_dim(eps, a, margin=16)


def test_clamp_bounds():
    assert clamp_digits(5) == 16
    assert clamp_digits(1000) == 400
    assert clamp_digits(77) == 77


def test_structural_tol_tracks_digits():
    with working_precision(40):
        t40 = structural_tol()
    with working_precision(80):
        t80 = structural_tol()
    assert t80 < t40 < mpf("1e-20")
