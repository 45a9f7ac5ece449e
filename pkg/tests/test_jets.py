"""Jet arithmetic, file format, and the open-condition gates."""

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from hopfzero.errors import ConditionFailure, JetParseError
from hopfzero.fields import (
    bundled_field,
    model_2jet,
    truncated_unfolding,
    volume_preserving_test_field,
)
from hopfzero.jets import (
    MultiJet,
    UnfoldingJet,
    check_generic_unfolding,
    check_linear_part,
    check_open_conditions,
    jet_divergence,
    jet_inverse_scalar,
    parse_jet_text,
    unfolding_to_jetfile,
)
from hopfzero.precision import mpf, working_precision

CAP = 4

# dyadic coefficients keep every arithmetic check exact
coeff = st.integers(-8, 8).map(lambda n: mpf(n) / 4)
index = st.tuples(*(st.integers(0, 2) for _ in range(5))).filter(
    lambda i: sum(i) <= CAP
)
jets = st.dictionaries(index, coeff, max_size=6).map(
    lambda d: MultiJet(d, CAP)
)
points = st.tuples(*(st.integers(-2, 2).map(lambda n: mpf(n) / 2) for _ in range(5)))


@given(jets, jets, points)
def test_sum_evaluates_pointwise(u, v, p):
    assert (u + v).evaluate(p) == u.evaluate(p) + v.evaluate(p)


@given(jets, jets, points)
def test_product_evaluates_pointwise_below_cap(u, v, p):
    # keep total degree within the cap so truncation cannot bite
    if u.degree() + v.degree() > CAP:
        return
    assert (u * v).evaluate(p) == u.evaluate(p) * v.evaluate(p)


@given(jets, points)
def test_partial_matches_difference_quotient_structure(u, p):
    # d/dx of sum c * x^i ... = sum c*i * x^(i-1) ...; check against a
    # direct finite evaluation of the derivative polynomial
    du = u.partial(0)
    expect = mpf(0)
    for idx, c in u.terms.items():
        if idx[0] == 0:
            continue
        val = c * idx[0]
        for var, e in enumerate(idx):
            e2 = e - 1 if var == 0 else e
            val *= p[var] ** e2
        expect += val
    assert du.evaluate(p) == expect


@given(jets)
def test_graded_parts_reassemble(u):
    total = MultiJet.zero(CAP)
    for d in range(CAP + 1):
        total = total + u.graded_part(d)
    assert total.isclose(u, tol=0)


@given(st.dictionaries(index, coeff, max_size=4))
def test_inverse_scalar_is_reciprocal_jet(d):
    d = dict(d)
    d[(0, 0, 0, 0, 0)] = mpf(1)  # unit constant term keeps it invertible
    u = MultiJet(d, CAP)
    inv = jet_inverse_scalar(u)
    prod = u * inv
    one = MultiJet.constant(1, CAP)
    assert prod.isclose(one, tol=mpf(10) ** -40)


def test_substitute_composes_with_evaluation():
    u = MultiJet({(2, 0, 0, 0, 0): mpf(1), (0, 1, 1, 0, 0): mpf("0.5")}, CAP)
    args = [MultiJet.variable(1, CAP), MultiJet.variable(0, CAP),
            MultiJet.constant(mpf("0.25"), CAP), MultiJet.zero(CAP),
            MultiJet.zero(CAP)]
    swapped = u.substitute(args)
    p = (mpf("0.5"), mpf("-1"), mpf("2"), mpf(0), mpf(0))
    q = (p[1], p[0], mpf("0.25"), mpf(0), mpf(0))
    assert swapped.evaluate(p) == u.evaluate(q)


# ---------------------------------------------------------------------------
# condition gates


def test_model_gate_witnesses_are_exact_integers():
    rep = check_open_conditions(model_2jet(1, 1, 1))
    assert rep.hz_star is True
    assert rep.a_less_2 is True
    assert rep.bracket_zz_rr == 8
    assert rep.bracket_zz_xz == -4
    assert rep.ratio_shear == mpf("0.5")


def test_model_gate_rejects_wrong_shear_sign():
    rep = check_open_conditions(model_2jet(-1, 1, 1))
    assert rep.hz_star is False


def test_shear_ratio_boundary_is_strict():
    rep = check_open_conditions(model_2jet(2, 1, 1))
    assert rep.a_less_2 is False  # ratio exactly 1 must not pass


def test_linear_part_rotation_rate():
    assert check_linear_part(model_2jet()) == 1


def test_linear_part_rejects_shear():
    bad = model_2jet()
    px = bad.px + MultiJet({(1, 0, 0, 0, 0): mpf("0.3")}, bad.cap)
    with pytest.raises(ConditionFailure):
        check_linear_part(UnfoldingJet(px=px, py=bad.py, pz=bad.pz, cap=bad.cap))


def test_unfolding_witness_value():
    rep = check_generic_unfolding(truncated_unfolding())
    assert rep.ok is True
    assert rep.witness == -1


def test_vp_witness_uses_mu_only():
    rep = check_generic_unfolding(volume_preserving_test_field())
    assert rep.ok is True
    assert rep.witness == -1


def test_vp_field_divergence_vanishes_identically():
    div = jet_divergence(volume_preserving_test_field())
    assert div.max_abs() == 0


def test_vp_mode_rejects_divergent_field():
    with pytest.raises(ConditionFailure):
        UnfoldingJet(
            px=truncated_unfolding().px,
            py=truncated_unfolding().py,
            pz=truncated_unfolding().pz,
            cap=truncated_unfolding().cap,
            mode="volume_preserving",
        )


# ---------------------------------------------------------------------------
# text format


SAMPLE = """# test jet
degree_cap 4
mode general
x 0 1 0 0 0 1
x 1 0 1 0 0 -1.25
y 1 0 0 0 0 -1
z 0 0 2 0 0 0.333333333333333333333333333333
z 2 0 0 0 0 1
z 0 2 0 0 0 1
"""


def test_round_trip_preserves_literals():
    jf = parse_jet_text(SAMPLE)
    text = jf.to_text()
    again = parse_jet_text(text)
    assert [(e.component, e.index, e.literal) for e in jf.entries] == [
        (e.component, e.index, e.literal) for e in again.entries
    ]


def test_long_literal_survives_precision_change():
    jf = parse_jet_text(SAMPLE)
    with working_precision(60):
        uj = jf.to_unfolding()
        c = uj.pz.coeff((0, 0, 2, 0, 0))
        third = mpf(1) / 3
        assert abs(c - third) < mpf(10) ** -30


def test_parse_error_reports_line_number():
    bad = SAMPLE + "x 1 2 3 4\n"
    with pytest.raises(JetParseError) as err:
        parse_jet_text(bad)
    assert "line 9" in str(err.value)


def test_parse_rejects_degree_above_cap():
    bad = "degree_cap 2\nmode general\nx 0 1 0 0 0 1\ny 1 0 0 0 0 -1\nz 0 0 3 0 0 1\n"
    with pytest.raises(JetParseError):
        parse_jet_text(bad)


def test_unfolding_to_jetfile_round_trip():
    uj = bundled_field("standard")
    jf = unfolding_to_jetfile(uj, digits=40)
    back = parse_jet_text(jf.to_text()).to_unfolding()
    assert back.isclose(uj, tol=mpf(10) ** -38)
    assert back.mode == uj.mode
