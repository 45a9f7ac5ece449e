"""Reduction of a Hopf-zero unfolding to its quadratic normal form.

The reduction runs in five composable stages, each realized as an explicit
jet-level change of variables so the whole chain can be verified by
pushforward identities:

  A. parameter-dependent translation killing the linear parameter response
     of the planar equations;
  B. degree-2 homological elimination in the complex basis w = x + i y,
     realized as the time-1 flow of the solved generator (so the change is
     exactly divergence-free whenever the generator is);
  C. linear reparameterization built from the resonant parameter
     coefficients;
  D. a fibered change in z together with the matching time rescale making
     the rotation speed identically 1; the pair is chosen so that a
     divergence-free field stays divergence-free;
  E. final scaling of z and the parameters normalizing the quadratic
     coefficients of the vertical equation.

After stage E the quadratic part is exactly

    x' = y + nu x - a x z
    y' = -x + nu y - a y z
    z' = -mu + z^2 + b (x^2 + y^2)

and everything of higher order is returned as the residual (f, g, h).
"""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2

from .errors import ConditionFailure, NumericalFailure
from .flow import PolyField
from .jets import (
    MODE_GENERAL,
    MODE_VOLUME_PRESERVING,
    JetMap,
    MultiJet,
    UnfoldingJet,
    check_generic_unfolding,
    check_linear_part,
    check_open_conditions,
    jet_compose,
    jet_divergence,
    jet_inverse_scalar,
)
from .precision import current_digits, mpf, structural_tol, to_decimal

_I = gmpy2.mpc(0, 1)

# multi-index helpers, order (x, y, z, mu, nu)
_MU = (0, 0, 0, 1, 0)
_NU = (0, 0, 0, 0, 1)
_W = (1, 0, 0, 0, 0)
_WZ = (1, 0, 1, 0, 0)
_WMU = (1, 0, 0, 1, 0)
_WNU = (1, 0, 0, 0, 1)
_Z2 = (0, 0, 2, 0, 0)
_WWB = (1, 1, 0, 0, 0)
_ZMU = (0, 0, 1, 1, 0)
_ZNU = (0, 0, 1, 0, 1)
_MU2 = (0, 0, 0, 2, 0)
_NU2 = (0, 0, 0, 0, 2)
_MUNU = (0, 0, 0, 1, 1)


def _fmt(x):
    return to_decimal(x, 6)


# ---------------------------------------------------------------------------
# complex basis helpers


def _to_complex(px: MultiJet, py: MultiJet, pz: MultiJet):
    """Rewrite (px, py, pz) in the basis (w, wb, z, mu, nu), w = x + i y."""
    cap = px.cap
    half = mpf("0.5")
    w = MultiJet.variable(0, cap)
    wb = MultiJet.variable(1, cap)
    x_sub = w.scale(half) + wb.scale(half)
    y_sub = w.scale(-_I * half) + wb.scale(_I * half)
    args = (x_sub, y_sub, MultiJet.variable(2, cap),
            MultiJet.variable(3, cap), MultiJet.variable(4, cap))
    pw = px.substitute(args) + py.substitute(args).scale(_I)
    pzc = pz.substitute(args)
    return pw, pzc


def _to_real(jet_c: MultiJet):
    """Substitute w = x + i y back; returns the complex-coefficient jet."""
    cap = jet_c.cap
    x = MultiJet.variable(0, cap)
    y = MultiJet.variable(1, cap)
    w_sub = x + y.scale(_I)
    wb_sub = x + y.scale(-_I)
    args = (w_sub, wb_sub, MultiJet.variable(2, cap),
            MultiJet.variable(3, cap), MultiJet.variable(4, cap))
    return jet_c.substitute(args)


def _re(c):
    return c.real if isinstance(c, gmpy2.mpc) else gmpy2.mpfr(c)


def _im(c):
    return c.imag if isinstance(c, gmpy2.mpc) else gmpy2.mpfr(0)


def _real_jet(jet_c: MultiJet, tol) -> MultiJet:
    worst = mpf(0)
    out = {}
    for idx, c in jet_c.terms.items():
        im = abs(_im(c))
        if im > worst:
            worst = im
        out[idx] = _re(c)
    if worst > tol:
        raise NumericalFailure(
            f"imaginary residue {_fmt(worst)} above tolerance {_fmt(tol)}"
        )
    return MultiJet(out, jet_c.cap, _trusted=True)


# ---------------------------------------------------------------------------
# stage B: homological elimination via a generator flow


def _solve_generator(pw2: MultiJet, pz2: MultiJet, alpha):
    """Divide the non-resonant degree-2 part by its homological divisor."""
    cap = pw2.cap
    hw = {}
    for idx, c in pw2.terms.items():
        k = idx[1] - idx[0] + 1
        if k == 0:
            continue
        hw[idx] = c / (_I * alpha * k)
    hz = {}
    for idx, c in pz2.terms.items():
        k = idx[1] - idx[0]
        if k == 0:
            continue
        hz[idx] = c / (_I * alpha * k)
    return MultiJet(hw, cap, _trusted=True), MultiJet(hz, cap, _trusted=True)


def _conjugate_swap(jet_c: MultiJet) -> MultiJet:
    out = {}
    for (p, q, r, s, t), c in jet_c.terms.items():
        cc = gmpy2.mpc(_re(c), -_im(c))
        out[(q, p, r, s, t)] = cc
    return MultiJet(out, jet_c.cap, _trusted=True)


def _generator_real(hw: MultiJet, hz: MultiJet, tol):
    hwb = _conjugate_swap(hw)
    gx_c = _to_real(hw.scale(mpf("0.5")) + hwb.scale(mpf("0.5")))
    gy_c = _to_real(hw.scale(-_I * mpf("0.5")) + hwb.scale(_I * mpf("0.5")))
    gz_c = _to_real(hz)
    return _real_jet(gx_c, tol), _real_jet(gy_c, tol), _real_jet(gz_c, tol)


def _flow_map(gen, cap: int, time=1) -> JetMap:
    """Time-1 Lie-series flow of a vector field with terms of degree >= 2."""
    t = mpf(time)
    state = []
    for i in range(3):
        u = MultiJet.variable(i, cap)
        total = u
        k = 0
        while not u.is_zero() and k < cap + 1:
            nxt = MultiJet.zero(cap)
            for v in range(3):
                nxt = nxt + u.partial(v) * gen[v]
            k += 1
            u = nxt.scale(t / k)
            total = total + u
        state.append(total)
    params = (MultiJet.variable(3, cap), MultiJet.variable(4, cap))
    return JetMap(state=tuple(state), params=params, cap=cap)


def _drop_nonresonant_deg2(px, py, pz, alpha, tol):
    """Zero the (numerically tiny) non-resonant degree-2 coefficients."""
    pw, pzc = _to_complex(px, py, pz)
    pw2 = pw.graded_part(2)
    pz2 = pzc.graded_part(2)
    resid_w = {}
    for idx, c in pw2.terms.items():
        if idx[1] - idx[0] + 1 != 0:
            resid_w[idx] = c
    resid_z = {}
    for idx, c in pz2.terms.items():
        if idx[1] - idx[0] != 0:
            resid_z[idx] = c
    worst = mpf(0)
    for c in list(resid_w.values()) + list(resid_z.values()):
        worst = max(worst, abs(c))
    if worst > tol:
        raise NumericalFailure(
            f"homological stage left degree-2 residue {_fmt(worst)}"
        )
    rw = MultiJet(resid_w, pw.cap, _trusted=True)
    rz = MultiJet(resid_z, pw.cap, _trusted=True)
    rwb = _conjugate_swap(rw)
    rx = _real_jet(_to_real(rw.scale(mpf("0.5")) + rwb.scale(mpf("0.5"))), tol * 4)
    ry = _real_jet(_to_real(rw.scale(-_I * mpf("0.5")) + rwb.scale(_I * mpf("0.5"))), tol * 4)
    rzr = _real_jet(_to_real(rz), tol * 4)
    return px - rx, py - ry, pz - rzr


# ---------------------------------------------------------------------------
# result containers


@dataclass(frozen=True)
class NormalFormTrace:
    """Intermediate coefficients recorded along the reduction."""

    alpha_star: object
    beta1: object
    gamma1: object
    gamma2: object
    alpha3: object
    beta0: tuple       # (nu, mu) linear response of the planar radial part
    gamma0: tuple      # (mu, nu) response of the vertical part, sign-flipped
    ebar: tuple        # (mu z, nu z) coefficients entering the final shift
    z_flipped: bool
    generator_norm: object

    def as_dict(self):
        num = lambda v: to_decimal(v, current_digits())
        return {
            "alpha_star": num(self.alpha_star),
            "beta1": num(self.beta1),
            "gamma1": num(self.gamma1),
            "gamma2": num(self.gamma2),
            "alpha3": num(self.alpha3),
            "beta0": [num(v) for v in self.beta0],
            "gamma0": [num(v) for v in self.gamma0],
            "ebar": [num(v) for v in self.ebar],
            "z_flipped": self.z_flipped,
            "generator_norm": num(self.generator_norm),
        }


@dataclass(frozen=True)
class NormalFormResult:
    """Normalized field, its invariants, and the full change of variables."""

    a: object
    b: object
    alpha_star: object
    field: UnfoldingJet
    residual: tuple            # (f, g, h), all terms of degree >= 3
    variable_change: JetMap    # original coordinates as jets in normalized ones
    inverse_change: JetMap
    rescale: MultiJet          # time-change factor expressed in final variables
    trace: NormalFormTrace
    mode: str
    cap: int
    digits: int

    def summary(self):
        num = lambda v: to_decimal(v, current_digits())
        return {
            "a": num(self.a),
            "b": num(self.b),
            "alpha_star": num(self.alpha_star),
            "mode": self.mode,
            "cap": self.cap,
            "digits": self.digits,
            "c0": num(compute_c0(self)),
            "trace": self.trace.as_dict(),
        }


# ---------------------------------------------------------------------------
# the pipeline


def _planar_param_response(px: MultiJet, py: MultiJet, pz: MultiJet):
    c1, d1 = px.coeff(_MU), px.coeff(_NU)
    c2, d2 = py.coeff(_MU), py.coeff(_NU)
    c3, d3 = pz.coeff(_MU), pz.coeff(_NU)
    return (c1, d1), (c2, d2), (c3, d3)


def _resonant_data(px, py, pz):
    """Resonant degree <= 2 coefficients read off the complex basis."""
    pw, pzc = _to_complex(px, py, pz)
    c_w = pw.coeff(_W)
    c_wz = pw.coeff(_WZ)
    c_wmu = pw.coeff(_WMU)
    c_wnu = pw.coeff(_WNU)
    return {
        "alpha": -_im(c_w),
        "beta1": -_re(c_wz),
        "alpha3": -_im(c_wz),
        "beta01": _re(c_wnu),
        "alpha1": -_im(c_wnu),
        "beta02": _re(c_wmu),
        "alpha2": -_im(c_wmu),
        "gamma1": _re(pzc.coeff(_Z2)),
        "gamma2": _re(pzc.coeff(_WWB)),
        "c3": _re(pzc.coeff(_MU)),
        "d3": _re(pzc.coeff(_NU)),
        "g11": _re(pzc.coeff(_ZMU)),
        "g12": _re(pzc.coeff(_ZNU)),
        "g3": _re(pzc.coeff(_MU2)),
        "g4": _re(pzc.coeff(_NU2)),
        "g5": _re(pzc.coeff(_MUNU)),
    }


def reduce_to_normal_form(uj: UnfoldingJet, *, mode: str | None = None) -> NormalFormResult:
    """Run the five-stage reduction and validate the resulting quadratic part."""
    mode = uj.mode if mode is None else mode
    cap = uj.cap
    digits = current_digits()
    tol0 = structural_tol(digits)

    alpha = check_linear_part(uj)
    oc = check_open_conditions(uj)
    if not oc.hz_star:
        raise ConditionFailure(
            "open conditions fail: cannot orient the vertical quadratic part"
        )
    gen_rep = check_generic_unfolding(uj, mode=mode)
    if not gen_rep.ok:
        raise ConditionFailure(
            f"generic unfolding condition fails (witness {_fmt(gen_rep.witness)})"
        )

    px, py, pz = uj.px, uj.py, uj.pz
    scale0 = max(px.max_abs(), py.max_abs(), pz.max_abs(), mpf(1))
    tol = tol0 * scale0
    mjv = MultiJet.variable
    X, Y, Z = mjv(0, cap), mjv(1, cap), mjv(2, cap)
    MU, NU = mjv(3, cap), mjv(4, cap)

    maps = []

    # stage A: translate the plane so the planar equations lose their
    # constant parameter response
    (c1, d1), (c2, d2), _ = _planar_param_response(px, py, pz)
    shift_x = MU.scale(c2 / alpha) + NU.scale(d2 / alpha)
    shift_y = MU.scale(-c1 / alpha) + NU.scale(-d1 / alpha)
    map_a = JetMap(state=(X + shift_x, Y + shift_y, Z), params=(MU, NU), cap=cap)
    maps.append(map_a)
    cur = jet_compose(UnfoldingJet(px, py, pz, cap=cap, mode=MODE_GENERAL), map_a)
    px, py, pz = cur.px, cur.py, cur.pz
    for idx in (_MU, _NU):
        if abs(px.coeff(idx)) > tol or abs(py.coeff(idx)) > tol:
            raise NumericalFailure("translation stage left a planar parameter term")

    # stage B: kill every non-resonant degree-2 term with a generator flow.
    # The generator couples to the degree-1 parameter terms of the vertical
    # equation (the correction D(g) . P lowers state degree while keeping
    # total degree 2), so the solve is swept to a fixed point; the coupling
    # is nilpotent and three sweeps are exact up to rounding.
    hw_acc = MultiJet.zero(cap)
    hz_acc = MultiJet.zero(cap)
    base = UnfoldingJet(px, py, pz, cap=cap, mode=MODE_GENERAL)
    map_b = JetMap.identity(cap)
    cur = base
    for sweep in range(8):
        pw, pzc = _to_complex(cur.px, cur.py, cur.pz)
        dw, dz = _solve_generator(pw.graded_part(2), pzc.graded_part(2), alpha)
        resid = max(dw.max_abs(), dz.max_abs())
        if resid <= tol * 16:
            break
        hw_acc = hw_acc + dw
        hz_acc = hz_acc + dz
        gx, gy, gz = _generator_real(hw_acc, hz_acc, tol)
        map_b = _flow_map((gx, gy, gz), cap)
        cur = jet_compose(base, map_b)
    else:
        raise NumericalFailure(
            "homological sweeps did not converge; nonresonant residue remains"
        )
    gx, gy, gz = _generator_real(hw_acc, hz_acc, tol)
    gen_norm = max(gx.max_abs(), gy.max_abs(), gz.max_abs())
    if mode == MODE_VOLUME_PRESERVING:
        div_gen = gx.partial(0) + gy.partial(1) + gz.partial(2)
        if div_gen.max_abs() > tol * 8:
            raise NumericalFailure(
                "volume-preserving input produced a generator with divergence "
                f"{_fmt(div_gen.max_abs())}"
            )
    maps.append(map_b)
    px, py, pz = _drop_nonresonant_deg2(cur.px, cur.py, cur.pz, alpha, tol * 16)

    # orientation: normalize the sign of the z^2 coefficient
    z_flipped = False
    if _re(pz.coeff(_Z2)) < 0:
        z_flipped = True
        flip = JetMap(state=(X, Y, -Z), params=(MU, NU), cap=cap)
        maps.append(flip)
        cur = jet_compose(UnfoldingJet(px, py, pz, cap=cap, mode=MODE_GENERAL), flip)
        px, py, pz = cur.px, cur.py, cur.pz

    res = _resonant_data(px, py, pz)
    beta1, gamma1, gamma2 = res["beta1"], res["gamma1"], res["gamma2"]
    alpha3 = res["alpha3"]
    if abs(gamma1) <= tol:
        raise ConditionFailure("vanishing z^2 coefficient; quadratic model degenerate")

    # stage C: linear parameter change from the resonant responses
    beta01, beta02 = res["beta01"], res["beta02"]
    g01, g02 = -res["c3"], -res["d3"]
    if mode == MODE_VOLUME_PRESERVING:
        if abs(g01) <= tol:
            raise ConditionFailure("vertical parameter response vanishes")
        p_mu = MU.scale(1 / g01)
        p_nu = NU
    else:
        det = g01 * beta01 - g02 * beta02
        if abs(det) <= tol:
            raise ConditionFailure(
                f"parameter change is singular (determinant {_fmt(det)})"
            )
        p_mu = MU.scale(beta01 / det) + NU.scale(-g02 / det)
        p_nu = MU.scale(-beta02 / det) + NU.scale(g01 / det)
    map_c = JetMap(state=(X, Y, Z), params=(p_mu, p_nu), cap=cap)
    maps.append(map_c)
    cur = jet_compose(UnfoldingJet(px, py, pz, cap=cap, mode=MODE_GENERAL), map_c)
    px, py, pz = cur.px, cur.py, cur.pz

    # stage D: fibered z-change plus time rescale; the pair keeps
    # divergence-free fields divergence-free and sets the rotation speed to 1
    res_d = _resonant_data(px, py, pz)
    b0 = res_d["alpha"]
    b_z, b_mu, b_nu = res_d["alpha3"], res_d["alpha2"], res_d["alpha1"]
    denom = MultiJet.constant(b0, cap) + MU.scale(b_mu) + NU.scale(b_nu)
    rhs = Z.scale(b0)
    phi = MultiJet.zero(cap)
    for _ in range(cap + 2):
        phi = (rhs - (phi * phi).scale(b_z / 2)) * jet_inverse_scalar(denom)
    map_d = JetMap(state=(X, Y, phi), params=(MU, NU), cap=cap)
    maps.append(map_d)
    cur = jet_compose(UnfoldingJet(px, py, pz, cap=cap, mode=MODE_GENERAL), map_d)
    rescale = phi.partial(2).scale(1 / b0)
    px = cur.px * rescale
    py = cur.py * rescale
    pz = cur.pz * rescale

    # stage E: scale z and the parameters to pin the vertical quadratic part
    res_e = _resonant_data(px, py, pz)
    gb1 = res_e["gamma1"]
    gb11, gb12 = res_e["g11"], res_e["g12"]
    bb1 = res_e["beta1"]
    bb0 = res_e["beta01"]
    gb0 = -res_e["c3"]
    g3, g4, g5 = res_e["g3"], res_e["g4"], res_e["g5"]
    if mode == MODE_VOLUME_PRESERVING:
        if max(abs(gb11), abs(gb12)) > tol * 64:
            raise NumericalFailure(
                "volume-preserving reduction produced a parameter-dependent "
                f"vertical shift ({_fmt(max(abs(gb11), abs(gb12)))})"
            )
        e_jet = MultiJet.zero(cap)
        nu_hat = NU
        mu_hat = MU.scale(gb0 * gb1) + (MU * MU).scale(-gb1 * g3)
    else:
        e_jet = MU.scale(gb11 / 2) + NU.scale(gb12 / 2)
        nu_hat = NU.scale(bb0) + e_jet.scale(bb1 / gb1)
        mu_hat = (
            MU.scale(gb0 * gb1)
            + e_jet * e_jet
            - ((MU * MU).scale(g3) + (NU * NU).scale(g4) + (MU * NU).scale(g5)).scale(gb1)
        )
    forward_e = JetMap(
        state=(X, Y, Z.scale(gb1) + e_jet),
        params=(mu_hat, nu_hat),
        cap=cap,
    )
    map_e = forward_e.inverse()
    maps.append(map_e)
    cur = jet_compose(UnfoldingJet(px, py, pz, cap=cap, mode=MODE_GENERAL), map_e)
    px, py, pz = cur.px, cur.py, cur.pz
    rescale = rescale.substitute(map_e.full_tuple())

    # assemble, validate the quadratic part, split off the residual
    a_val = -px.coeff(_WZ)  # coefficient of x z in the x-equation
    b_val = pz.coeff((2, 0, 0, 0, 0))
    vp = mode == MODE_VOLUME_PRESERVING
    vtol = tol * 64
    if vp and abs(a_val - 1) > vtol:
        raise NumericalFailure(
            f"volume-preserving invariant a = 1 violated: a = {_fmt(a_val)}"
        )
    nu_terms = {} if vp else {(1, 0, 0, 0, 1): mpf(1)}
    skel_px = Y + MultiJet({(1, 0, 1, 0, 0): -a_val, **nu_terms}, cap)
    nu_terms = {} if vp else {(0, 1, 0, 0, 1): mpf(1)}
    skel_py = -X + MultiJet({(0, 1, 1, 0, 0): -a_val, **nu_terms}, cap)
    skel_pz = MultiJet(
        {_MU: mpf(-1), _Z2: mpf(1), (2, 0, 0, 0, 0): b_val, (0, 2, 0, 0, 0): b_val},
        cap,
    )
    resid = (px - skel_px, py - skel_py, pz - skel_pz)
    clean = []
    for r in resid:
        low = MultiJet(
            {i: c for i, c in r.terms.items() if sum(i) <= 2}, cap, _trusted=True
        )
        if low.max_abs() > vtol:
            raise NumericalFailure(
                f"normalized quadratic part off by {_fmt(low.max_abs())}"
            )
        keep = {i: c for i, c in r.terms.items() if sum(i) >= 3}
        if vp:
            worst_nu = max((abs(c) for i, c in keep.items() if i[4] > 0), default=mpf(0))
            if worst_nu > vtol:
                raise NumericalFailure(
                    "volume-preserving reduction kept a second parameter "
                    f"({_fmt(worst_nu)})"
                )
            keep = {i: c for i, c in keep.items() if i[4] == 0}
        clean.append(MultiJet(keep, cap, _trusted=True))
    f_res, g_res, h_res = clean
    final = UnfoldingJet(
        skel_px + f_res, skel_py + g_res, skel_pz + h_res, cap=cap,
        mode=MODE_VOLUME_PRESERVING if vp else MODE_GENERAL,
    )

    # cross-check the invariants against the one-step trace identities
    a_trace = beta1 / gamma1
    b_trace = gamma1 * gamma2 / (alpha * alpha)
    if abs(a_val - a_trace) > vtol * 8 or abs(b_val - b_trace) > vtol * 8:
        raise NumericalFailure(
            "invariant mismatch between reduced field and trace identities: "
            f"a {_fmt(a_val)} vs {_fmt(a_trace)}, b {_fmt(b_val)} vs {_fmt(b_trace)}"
        )

    total = maps[0]
    for m in maps[1:]:
        total = total.compose(m)
    trace = NormalFormTrace(
        alpha_star=alpha,
        beta1=beta1,
        gamma1=gamma1,
        gamma2=gamma2,
        alpha3=alpha3,
        beta0=(beta01, beta02),
        gamma0=(g01, g02),
        ebar=(gb11, gb12),
        z_flipped=z_flipped,
        generator_norm=gen_norm,
    )
    return NormalFormResult(
        a=a_val,
        b=b_val,
        alpha_star=alpha,
        field=final,
        residual=(f_res, g_res, h_res),
        variable_change=total,
        inverse_change=total.inverse(),
        rescale=rescale,
        trace=trace,
        mode=mode,
        cap=cap,
        digits=digits,
    )


def compute_c0(nf: NormalFormResult):
    """Cubic vertical coefficient steering the one-dimensional splitting."""
    return nf.residual[2].coeff((0, 0, 3, 0, 0))


# ---------------------------------------------------------------------------
# blow-up to the slow-rotation scaled system


@dataclass(frozen=True)
class ScaledSystem:
    """Blown-up system at (mu, nu) = (eps^2, eps*sigma) on time s = eps*t.

    After straighten_south, `straighten` holds the coordinate-change data
    (the system is then expressed in coordinates where the bottom point is
    (0,0,-1) and its one-dimensional stable manifold is the z-axis) and
    `h_split` holds the pair (h1 z-polynomial coefficients, h2 monomial
    dict) of the vertical perturbation split h = (z+1) h1(z) + h2.
    """

    a: object
    b: object
    epsilon: object
    sigma: object
    field: PolyField
    remainder: PolyField
    digits: int
    nf: NormalFormResult | None = None
    straighten: object = None
    h_split: tuple | None = None

    def skeleton(self) -> PolyField:
        """Scaled system with the remainder removed."""
        return _scaled_skeleton(self.a, self.b, self.epsilon, self.sigma)

    def params(self):
        return {
            "a": to_decimal(self.a, self.digits),
            "b": to_decimal(self.b, self.digits),
            "epsilon": to_decimal(self.epsilon, self.digits),
            "sigma": to_decimal(self.sigma, self.digits),
        }


def _scaled_skeleton(a, b, eps, sigma) -> PolyField:
    inv_eps = 1 / mpf(eps)
    return PolyField.from_dicts(
        {(0, 1, 0): inv_eps, (1, 0, 0): sigma, (1, 0, 1): -a},
        {(1, 0, 0): -inv_eps, (0, 1, 0): sigma, (0, 1, 1): -a},
        {(0, 0, 0): mpf(-1), (0, 0, 2): mpf(1), (2, 0, 0): b, (0, 2, 0): b},
    )


def _scale_residual(res_jets, eps, sigma) -> PolyField:
    """Apply the singular scaling eps^-2 R(eps x, eps y, eps z, eps^2, eps sigma)."""
    eps = mpf(eps)
    sigma = mpf(sigma)
    dicts = []
    for jet in res_jets:
        d = {}
        for (i, j, k, l, m), c in jet.terms.items():
            power = i + j + k + 2 * l + m - 2
            coeff = c * eps ** power * sigma ** m
            key = (i, j, k)
            d[key] = d.get(key, mpf(0)) + coeff
        dicts.append(d)
    return PolyField.from_dicts(*dicts)


def blow_up(nf: NormalFormResult, epsilon, sigma, *, sigma0=None) -> ScaledSystem:
    """Rescale the normalized unfolding onto the slow manifold chart."""
    eps = mpf(epsilon)
    sig = mpf(sigma)
    if eps <= 0:
        raise ConditionFailure(f"blow-up needs epsilon > 0, got {_fmt(eps)}")
    s0 = mpf(sigma0) if sigma0 is not None else mpf(nf.a) / 2
    if abs(sig) > s0 * eps:
        raise ConditionFailure(
            f"sigma {_fmt(sig)} outside the window |sigma| <= {_fmt(s0 * eps)}"
        )
    if nf.mode == MODE_VOLUME_PRESERVING and sig != 0:
        raise ConditionFailure("volume-preserving mode has no second parameter")
    remainder = _scale_residual(nf.residual, eps, sig)
    skel = _scaled_skeleton(nf.a, nf.b, eps, sig)
    merged = []
    for sk, rm in zip(skel.components, remainder.components):
        d = {idx: c for idx, c in sk}
        for idx, c in rm:
            d[idx] = d.get(idx, mpf(0)) + c
        merged.append(d)
    return ScaledSystem(
        a=nf.a,
        b=nf.b,
        epsilon=eps,
        sigma=sig,
        field=PolyField.from_dicts(*merged),
        remainder=remainder,
        digits=current_digits(),
        nf=nf,
    )


# ---------------------------------------------------------------------------
# straightening the bottom point's one-dimensional stable manifold
#
# Three exact unimodular changes: translate the bottom equilibrium to
# z = -1, shear (x, y) by polynomials in z fitted along the computed stable
# orbit so that orbit becomes the z-axis, and tilt z by a linear form in
# (x, y) so the vertical perturbation loses its planar gradient at the
# point.  Each change pushes the polynomial field forward exactly, so the
# result is again a PolyField (of higher degree).


def _p3_add(d1: dict, d2: dict) -> dict:
    out = dict(d1)
    for k, c in d2.items():
        out[k] = out.get(k, mpf(0)) + c
    return {k: c for k, c in out.items() if c != 0}


def _p3_scale(d: dict, s) -> dict:
    s = mpf(s)
    if s == 0:
        return {}
    return {k: c * s for k, c in d.items()}


def _p3_mul(d1: dict, d2: dict) -> dict:
    out = {}
    for (i1, j1, k1), c1 in d1.items():
        for (i2, j2, k2), c2 in d2.items():
            key = (i1 + i2, j1 + j2, k1 + k2)
            out[key] = out.get(key, mpf(0)) + c1 * c2
    return {k: c for k, c in out.items() if c != 0}


def _p3_pow(d: dict, n: int) -> dict:
    out = {(0, 0, 0): mpf(1)}
    for _ in range(n):
        out = _p3_mul(out, d)
    return out


def _p3_compose(comp, subs) -> dict:
    """Substitute polynomials subs = (Px, Py, Pz) into a packed component."""
    cache = [{}, {}, {}]

    def power(var: int, n: int) -> dict:
        if n == 0:
            return {(0, 0, 0): mpf(1)}
        if n not in cache[var]:
            cache[var][n] = _p3_mul(power(var, n - 1), subs[var])
        return cache[var][n]

    out = {}
    for (i, j, k), c in comp:
        term = {(0, 0, 0): c}
        if i:
            term = _p3_mul(term, power(0, i))
        if j:
            term = _p3_mul(term, power(1, j))
        if k:
            term = _p3_mul(term, power(2, k))
        out = _p3_add(out, term)
    return out


def _poly1_eval(coeffs, x):
    acc = mpf(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly1_deriv(coeffs):
    return tuple(k * coeffs[k] for k in range(1, len(coeffs)))


def _poly1_as_p3(coeffs, var_dict: dict) -> dict:
    """Polynomial sum c_k * V^k as a 3-var dict, V given as a dict."""
    out = {}
    acc = {(0, 0, 0): mpf(1)}
    for k, c in enumerate(coeffs):
        if k > 0:
            acc = _p3_mul(acc, var_dict)
        if c != 0:
            out = _p3_add(out, _p3_scale(acc, c))
    return out


@dataclass(frozen=True)
class StraightenData:
    """Composite change: translate, shear by X(z), Y(z), tilt z by (x, y).

    Maps are exact in closed form both ways.  `shear_x`/`shear_y` are
    coefficients in powers of (w + 1) where w is the translated vertical
    variable; `fit_residual` is the worst orbit-sample deviation absorbed
    by the polynomial fit, which bounds how far the transformed stable
    orbit sits from the axis.
    """

    shift: object
    shear_x: tuple
    shear_y: tuple
    tilt: tuple
    fit_residual: object
    orbit_samples: int
    eq_residual: object

    def _shear_at(self, w):
        u = w + 1
        return (_poly1_eval(self.shear_x, u), _poly1_eval(self.shear_y, u))

    def to_original(self, p):
        """Straightened coordinates -> original scaled coordinates."""
        xi, eta, zeta = (mpf(c) for c in p)
        w = zeta + self.tilt[0] * xi + self.tilt[1] * eta
        sx, sy = self._shear_at(w)
        return (xi + sx, eta + sy, w + self.shift)

    def from_original(self, p):
        """Original scaled coordinates -> straightened coordinates."""
        x, y, z = (mpf(c) for c in p)
        w = z - self.shift
        sx, sy = self._shear_at(w)
        u, v = x - sx, y - sy
        return (u, v, w - self.tilt[0] * u - self.tilt[1] * v)

    def as_dict(self, digits: int | None = None) -> dict:
        d = digits if digits is not None else current_digits()
        return {
            "shift": to_decimal(self.shift, d),
            "shear_x": [to_decimal(c, d) for c in self.shear_x],
            "shear_y": [to_decimal(c, d) for c in self.shear_y],
            "tilt": [to_decimal(c, d) for c in self.tilt],
            "fit_residual": to_decimal(self.fit_residual, d),
            "orbit_samples": self.orbit_samples,
            "eq_residual": to_decimal(self.eq_residual, d),
        }


def _pushforward(field: PolyField, shift, shear_x, shear_y, tilt) -> PolyField:
    """Exact polynomial pushforward through translate/shear/tilt."""
    alpha, beta = tilt
    # w as a polynomial in the straightened variables (xi, eta, zeta)
    w = {(0, 0, 1): mpf(1)}
    if alpha != 0:
        w[(1, 0, 0)] = mpf(alpha)
    if beta != 0:
        w[(0, 1, 0)] = mpf(beta)
    wp1 = _p3_add(w, {(0, 0, 0): mpf(1)})
    sx = _poly1_as_p3(shear_x, wp1)
    sy = _poly1_as_p3(shear_y, wp1)
    dsx = _poly1_as_p3(_poly1_deriv(shear_x), wp1)
    dsy = _poly1_as_p3(_poly1_deriv(shear_y), wp1)
    subs = (
        _p3_add({(1, 0, 0): mpf(1)}, sx),
        _p3_add({(0, 1, 0): mpf(1)}, sy),
        _p3_add(w, {(0, 0, 0): mpf(shift)}),
    )
    fx = _p3_compose(field.fx, subs)
    fy = _p3_compose(field.fy, subs)
    fz = _p3_compose(field.fz, subs)
    # shear: du = dx - X'(w) dz, dv = dy - Y'(w) dz   (w-equation is fz)
    gu = _p3_add(fx, _p3_scale(_p3_mul(dsx, fz), -1))
    gv = _p3_add(fy, _p3_scale(_p3_mul(dsy, fz), -1))
    # tilt: dzeta = dw - alpha du - beta dv
    gz = fz
    if alpha != 0:
        gz = _p3_add(gz, _p3_scale(gu, -alpha))
    if beta != 0:
        gz = _p3_add(gz, _p3_scale(gv, -beta))
    return PolyField.from_dicts(gu, gv, gz)


def _fit_shear(ws, xs, ys, x_eq, y_eq, degree: int):
    """Least-squares fit of X(w), Y(w) = eq + sum c_k (w+1)^k, k >= 1."""
    from .linalg import solve_least_squares

    amat = []
    for w in ws:
        u = w + 1
        row, p = [], mpf(1)
        for _ in range(degree):
            p = p * u
            row.append(p)
        amat.append(row)
    bx = [x - x_eq for x in xs]
    by = [y - y_eq for y in ys]
    cx = solve_least_squares(amat, bx)
    cy = solve_least_squares(amat, by)
    shear_x = (mpf(x_eq),) + tuple(cx)
    shear_y = (mpf(y_eq),) + tuple(cy)
    res = mpf(0)
    for w, x, y in zip(ws, xs, ys):
        u = w + 1
        res = max(res, abs(_poly1_eval(shear_x, u) - x))
        res = max(res, abs(_poly1_eval(shear_y, u) - y))
    return shear_x, shear_y, res


def _h_split(field: PolyField, a, b, epsilon, sigma) -> tuple:
    """Split the vertical perturbation as h = (z+1) h1(z) + h2(x,y,z)."""
    skel = _scaled_skeleton(a, b, epsilon, sigma)
    hd = _p3_scale(
        _p3_add(dict(field.fz), _p3_scale(dict(skel.fz), -1)),
        1 / mpf(epsilon),
    )
    axis = {}
    for (i, j, k), c in hd.items():
        if i == 0 and j == 0:
            axis[k] = axis.get(k, mpf(0)) + c
    deg = max(axis) if axis else 0
    coeffs = [axis.get(k, mpf(0)) for k in range(deg + 1)]
    # synthetic division of the axis polynomial by (z + 1)
    q = [mpf(0)] * deg
    rem = mpf(0)
    for k in range(deg, -1, -1):
        if k == deg:
            if deg > 0:
                q[deg - 1] = coeffs[deg]
            else:
                rem = coeffs[0]
        elif k > 0:
            q[k - 1] = coeffs[k] - q[k]
        else:
            rem = coeffs[0] - q[0]
    h1 = tuple(q)
    h2 = dict(hd)
    # subtract (z+1) h1(z) = sum q_k (z^{k+1} + z^k)
    for k, c in enumerate(h1):
        if c == 0:
            continue
        for key in ((0, 0, k + 1), (0, 0, k)):
            h2[key] = h2.get(key, mpf(0)) - c
            if h2[key] == 0:
                del h2[key]
    return h1, h2, rem


def straighten_south(
    sys: ScaledSystem,
    *,
    south=None,
    degree: int = 10,
    z_floor="-1.55",
    n_samples: int = 96,
    delta=None,
) -> ScaledSystem:
    """Coordinates in which the bottom point's stable curve is the z-axis.

    Fits the shear polynomials along the computed one-dimensional stable
    orbit (both branches), so the postcondition quality is the recorded
    fit_residual, not the working precision: a fixed-degree polynomial
    tracks an analytic curve over a unit-size window only to its truncation
    error.  The bottom equilibrium itself maps to (0,0,-1) exactly.
    """
    from .flow import EventSpec, integrate
    from .linalg import solve as _solve
    from .manifolds import (
        BRANCH_AWAY,
        _axis_seed,
        default_delta,
        find_equilibria,
        manifold_1d,
    )

    if south is None:
        _, south = find_equilibria(sys)
    if south.eigen.lam_real >= 0:
        raise ConditionFailure("straightening expects the bottom point")
    x_eq, y_eq, z_eq = south.point
    shift = z_eq + 1

    # stable orbit, branch through the globe (backward clock ends at z = 0)
    toward = manifold_1d(sys, south, validate=False, delta=delta)
    traj_up = toward.trajectory
    n_up = max(2 * n_samples // 3, 8)
    pts = [p for _, p in traj_up.sample(n_up)]

    # branch below the bottom point, down to z_floor
    if delta is None:
        delta = default_delta(current_digits())
    seed = _axis_seed(sys.field, south, BRANCH_AWAY, mpf(delta), True)
    lam = abs(south.eigen.lam_real)
    budget = (3 * abs(gmpy2.log(mpf(delta))) + 30) / lam
    traj_dn = integrate(
        sys.field,
        seed,
        budget,
        backward=True,
        stop_event=EventSpec(("z", mpf(z_floor)), direction="down"),
        escape_radius=mpf(20),
    )
    if traj_dn.status != "event":
        raise NumericalFailure(
            f"below-branch integration ended with status {traj_dn.status!r} "
            f"before reaching z = {z_floor}"
        )
    pts += [p for _, p in traj_dn.sample(max(n_samples - n_up, 4))]

    ws = [p[2] - shift for p in pts]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    shear_x, shear_y, fit_res = _fit_shear(ws, xs, ys, x_eq, y_eq, degree)

    # tilt: kill the planar gradient of the vertical equation at the point
    alpha, beta = mpf(0), mpf(0)
    target = (0, 0, -1)
    for _ in range(8):
        pushed = _pushforward(sys.field, shift, shear_x, shear_y, (alpha, beta))
        jac = pushed.jacobian(target)
        g = (jac[2][0], jac[2][1])
        if max(abs(g[0]), abs(g[1])) <= mpf(10) ** (-(current_digits() - 8)):
            break
        h = mpf(10) ** (-(current_digits() // 2))
        cols = []
        for da, db in ((h, 0), (0, h)):
            p2 = _pushforward(
                sys.field, shift, shear_x, shear_y, (alpha + da, beta + db)
            )
            j2 = p2.jacobian(target)
            cols.append(((j2[2][0] - g[0]) / h, (j2[2][1] - g[1]) / h))
        mat = [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]]
        step = _solve(mat, [g[0], g[1]])
        alpha, beta = alpha - step[0], beta - step[1]

    pushed = _pushforward(sys.field, shift, shear_x, shear_y, (alpha, beta))
    eq_res = max(abs(c) for c in pushed.eval(target))
    h1, h2, rem = _h_split(pushed, sys.a, sys.b, sys.epsilon, sys.sigma)
    if rem != 0:
        h2[(0, 0, 0)] = h2.get((0, 0, 0), mpf(0)) + rem

    data = StraightenData(
        shift=shift,
        shear_x=shear_x,
        shear_y=shear_y,
        tilt=(alpha, beta),
        fit_residual=fit_res,
        orbit_samples=len(pts),
        eq_residual=eq_res,
    )
    skel = _scaled_skeleton(sys.a, sys.b, sys.epsilon, sys.sigma)
    rem_field = PolyField.from_dicts(
        _p3_add(dict(pushed.fx), _p3_scale(dict(skel.fx), -1)),
        _p3_add(dict(pushed.fy), _p3_scale(dict(skel.fy), -1)),
        _p3_add(dict(pushed.fz), _p3_scale(dict(skel.fz), -1)),
    )
    return ScaledSystem(
        a=sys.a,
        b=sys.b,
        epsilon=sys.epsilon,
        sigma=sys.sigma,
        field=pushed,
        remainder=rem_field,
        digits=current_digits(),
        nf=sys.nf,
        straighten=data,
        h_split=(h1, h2),
    )
