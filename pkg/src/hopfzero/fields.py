"""Bundled example fields.

All builders return UnfoldingJet instances around a Hopf-zero point at the
origin with rotation rate 1.  Coefficients are exact decimals so condition
witnesses evaluate to exact small rationals.

The quadratic skeleton used everywhere is
    x' = y + nu x - a x z
    y' = -x + nu y - a y z
    z' = -mu + c z^2 + b (x^2 + y^2)
(with c = 1 unless stated).  Cubic terms break the rotational symmetry so
that both splitting measurements come out nonzero.  Sorting the planar
perturbations by how they transform under rotation (write w = x + i y):

  * z^3 terms in the x- and y-equations act as theta-independent forcing on
    w.  They break the vertical axis, so the one-dimensional gap opens at
    its generic order, and they displace the center of each section curve,
    which is exactly the first angular harmonic of the two-dimensional gap.
    This is the only cubic class that feeds that harmonic: measured on a
    single-channel field, every other cubic leaves it at rounding level.
  * terms proportional to (x z^2, -y z^2) act like z^2 conj(w): they shape
    the curves (second harmonic) but cancel out of both gap measurements.
  * terms proportional to (y z^2, -x z^2) act like i z^2 w: a
    height-dependent rotation speed, invisible to either gap but present
    so that phases are not artificially rigid.
  * a z^3 term in the z-equation is axisymmetric; it sets the vertical
    Stokes shift c0 that scales the one-dimensional envelope.
"""

from __future__ import annotations

from .jets import (
    DEFAULT_CAP,
    MODE_GENERAL,
    MODE_VOLUME_PRESERVING,
    MultiJet,
    UnfoldingJet,
)
from .precision import mpf

# Multi-index order: (x, y, z, mu, nu)
_X = (1, 0, 0, 0, 0)
_Y = (0, 1, 0, 0, 0)
_Z = (0, 0, 1, 0, 0)
_MU = (0, 0, 0, 1, 0)
_NU = (0, 0, 0, 0, 1)
_XZ = (1, 0, 1, 0, 0)
_YZ = (0, 1, 1, 0, 0)
_XNU = (1, 0, 0, 0, 1)
_YNU = (0, 1, 0, 0, 1)
_Z2 = (0, 0, 2, 0, 0)
_X2 = (2, 0, 0, 0, 0)
_Y2 = (0, 2, 0, 0, 0)
_XZ2 = (1, 0, 2, 0, 0)
_YZ2 = (0, 1, 2, 0, 0)
_Z3 = (0, 0, 3, 0, 0)
_Z2MU = (0, 0, 2, 1, 0)
_X3 = (3, 0, 0, 0, 0)
_Y3 = (0, 3, 0, 0, 0)
_X2Z = (2, 0, 1, 0, 0)
_Y2Z = (0, 2, 1, 0, 0)


def _jet(terms: dict, cap: int) -> MultiJet:
    return MultiJet({k: mpf(v) for k, v in terms.items()}, cap)


def model_2jet(a=1, b=1, c=1, cap: int = DEFAULT_CAP) -> UnfoldingJet:
    """Quadratic singularity model without parameters."""
    a, b, c = mpf(a), mpf(b), mpf(c)
    return UnfoldingJet(
        px=_jet({_Y: 1, _XZ: -a}, cap),
        py=_jet({_X: -1, _YZ: -a}, cap),
        pz=_jet({_Z2: c, _X2: b, _Y2: b}, cap),
        cap=cap,
    )


def truncated_unfolding(a=1, b=1, c=1, cap: int = DEFAULT_CAP) -> UnfoldingJet:
    """Two-parameter unfolding of the quadratic model."""
    a, b, c = mpf(a), mpf(b), mpf(c)
    return UnfoldingJet(
        px=_jet({_Y: 1, _XNU: 1, _XZ: -a}, cap),
        py=_jet({_X: -1, _YNU: 1, _YZ: -a}, cap),
        pz=_jet({_MU: -1, _Z2: c, _X2: b, _Y2: b}, cap),
        cap=cap,
    )


def axisymmetric_test_field(a=1, b=1, eta="0.5", cap: int = DEFAULT_CAP) -> UnfoldingJet:
    """Unfolding plus a rotation-invariant cubic term in the z-equation only.

    The vertical axis and every circle about it remain invariant objects, so
    both splitting measurements must come out zero on this field.
    """
    base = truncated_unfolding(a, b, cap=cap)
    pz = base.pz + _jet({_Z3: eta}, cap)
    return UnfoldingJet(px=base.px, py=base.py, pz=pz, cap=cap)


def standard_test_field(
    a=1,
    b=1,
    c0="0.1",
    eta_sym="0.6",
    eta_plan="0.4",
    eta_skew="0.25",
    eta_rot="0.8",
    cap: int = DEFAULT_CAP,
) -> UnfoldingJet:
    """The bundled non-axisymmetric test field.

    eta_plan weights z^3 in the x-equation, eta_skew the same monomial in
    the y-equation: together the theta-independent forcing
    (eta_plan + i eta_skew) z^3 on w = x + i y.  This single channel breaks
    the vertical axis and drives the first harmonic of the two-dimensional
    gap, both at their generic orders.  Two independent weights keep the
    harmonic's phase away from special values.

    eta_sym  weights (x z^2, -y z^2): curve shape, cancels from both gaps.
    eta_rot  weights (y z^2, -x z^2): height-dependent rotation speed.
    c0       weights z^3 in the z-equation: vertical Stokes shift.

    A parameter-carrying axis breaker such as z^2 mu in the x-equation also
    opens both gaps, but its harmonic component runs two powers of epsilon
    shallower than the z^3 one, and mixing the two channels at comparable
    size wrecks the phase-drift measurement at the large-epsilon end of the
    working window.  Keep any such term well below eta_plan.
    """
    es, er = mpf(eta_sym), mpf(eta_rot)
    base = truncated_unfolding(a, b, cap=cap)
    px = base.px + MultiJet({_XZ2: es, _Z3: mpf(eta_plan), _YZ2: er}, cap)
    py = base.py + MultiJet({_YZ2: -es, _Z3: mpf(eta_skew), _XZ2: -er}, cap)
    pz = base.pz + _jet({_Z3: c0}, cap)
    return UnfoldingJet(px=px, py=py, pz=pz, cap=cap)


def volume_preserving_test_field(
    b=1,
    eta_sym="0.6",
    eta_axis="0.5",
    eta_rot="0.8",
    eta_h="0.3",
    cap: int = DEFAULT_CAP,
) -> UnfoldingJet:
    """Divergence-free one-parameter unfolding (a = 1, no nu).

    The cubic block is built in divergence-compensated pairs:
      (x z^2, -y z^2)          divergence-free by itself,
      z^3 in the x-equation    no divergence,
      (y z^2, -x z^2)          no divergence,
      (x^2 - y^2) z in z'      compensated by (-x^3/3, +y^3/3) in (f, g).
    """
    b = mpf(b)
    es, ea, er, eh = mpf(eta_sym), mpf(eta_axis), mpf(eta_rot), mpf(eta_h)
    third = eh / 3
    px = _jet({_Y: 1, _XZ: -1}, cap) + MultiJet(
        {_XZ2: es, _Z3: ea, _YZ2: er, _X3: -third}, cap
    )
    py = _jet({_X: -1, _YZ: -1}, cap) + MultiJet(
        {_YZ2: -es, _XZ2: -er, _Y3: third}, cap
    )
    pz = _jet({_MU: -1, _Z2: 1, _X2: b, _Y2: b}, cap) + MultiJet(
        {_X2Z: eh, _Y2Z: -eh}, cap
    )
    return UnfoldingJet(px=px, py=py, pz=pz, cap=cap, mode=MODE_VOLUME_PRESERVING)


BUNDLED_FIELDS = {
    "model2jet": model_2jet,
    "unfolding": truncated_unfolding,
    "axisymmetric": axisymmetric_test_field,
    "standard": standard_test_field,
    "volume_preserving": volume_preserving_test_field,
}


def bundled_field(name: str, **kwargs) -> UnfoldingJet:
    try:
        builder = BUNDLED_FIELDS[name]
    except KeyError:
        raise KeyError(
            f"unknown bundled field {name!r}; choices: {sorted(BUNDLED_FIELDS)}"
        ) from None
    return builder(**kwargs)
