"""Second-crossing geometry, homoclinic location, and regime verification.

The one-dimensional unstable branch of the top equilibrium descends through
the interior of the globe, passes the bottom point at a distance set by the
one-dimensional gap, swings around its axis while the planar directions
expand, and climbs back along the two-dimensional unstable surface to the
section z = 0.  The second crossing Q0, its accumulated winding, and its
radial offsets against the section curves drive everything here: the
passage scaling checks, the bisection for parameters with a homoclinic
connection to the top point, the H1-H5 verification of the chaotic regime,
and the pointwise boundary diagnostics of the trapping region.

Radial quantities use the symplectic radius rho = (x^2 + y^2)/2 throughout,
matching the section-curve convention.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

import gmpy2

from .errors import ConditionFailure, NumericalFailure
from .flow import EventSpec, PolyField, integrate, track_angle
from .manifolds import (
    CURVE_STABLE,
    CURVE_UNSTABLE,
    find_equilibria,
    manifold_2d_section,
    shilnikov_eigenvalue_check,
)
from .normalform import NormalFormResult, ScaledSystem, blow_up, straighten_south
from .precision import (
    current_digits,
    digits_for_transit,
    mpf,
    to_decimal,
    working_precision,
)
from .splitting import _sigma_of, collect_s1, collect_s2, fit_s1, fit_s2, measure_s1

TRANSIT_MARGIN_TIME = 30
PROFILE_SCAN = 512


def _fmt(x, d: int = 6) -> str:
    return to_decimal(x, d)


def _pi():
    return gmpy2.const_pi()


# --------------------------------------------------------------------------
# second crossing


@dataclass(frozen=True)
class SecondCrossing:
    """Return passage of the top point's descending branch.

    q0 and Q0 are the first and second section points (z = 0), tau the
    scaled time between them, theta0 the clockwise winding accumulated
    around the straightened bottom axis (positive by convention), dist_cu
    the radial distance from Q0 to the curve Cu, signed_offset the radial
    offset of Q0 relative to Cs at Q0's angle (positive outside).
    offset_budget combines the section-curve error estimates.
    """

    epsilon: object
    sigma: object
    q0: tuple
    Q0: tuple
    tau: object
    theta0: object
    dist_cu: object
    signed_offset: object
    theta_q: object
    rho_q: object
    s1_value: object
    min_radius: object
    offset_budget: object
    curve_u: object
    curve_s: object
    digits: int
    trajectory: object = None

    def as_dict(self, digits: int | None = None) -> dict:
        d = digits if digits is not None else self.digits
        out = {
            "epsilon": to_decimal(self.epsilon, d),
            "sigma": to_decimal(self.sigma, d),
            "q0": [to_decimal(c, d) for c in self.q0],
            "Q0": [to_decimal(c, d) for c in self.Q0],
            "tau": to_decimal(self.tau, d),
            "theta0": None if self.theta0 is None else to_decimal(self.theta0, d),
            "dist_cu": to_decimal(self.dist_cu, d),
            "signed_offset": to_decimal(self.signed_offset, d),
            "theta_q": to_decimal(self.theta_q, d),
            "rho_q": to_decimal(self.rho_q, d),
            "s1_value": to_decimal(self.s1_value, d),
            "min_radius": None
            if self.min_radius is None
            else to_decimal(self.min_radius, d),
            "offset_budget": to_decimal(self.offset_budget, d),
            "digits": self.digits,
        }
        return out


def default_transit_budget(a, epsilon):
    """Scaled-time allowance for the full southern passage.

    The descent and the climb each take about (pi/(2 eps)) divided by the
    local contraction/expansion rate; 12/a covers both with a factor ~4
    to spare, plus a flat margin for the O(1) segments.
    """
    a = mpf(a)
    eps = mpf(epsilon)
    return (12 / a) / eps + TRANSIT_MARGIN_TIME


def second_crossing(
    sys: ScaledSystem,
    *,
    curves=None,
    theta_grid: int = 32,
    delta=None,
    track: bool = True,
    straighten_data=None,
    validate: bool = False,
    check_precision: bool = True,
    time_budget=None,
    keep_trajectory: bool = False,
) -> SecondCrossing:
    """Continue the top point's descending branch to its second z = 0 hit.

    Requires a strictly positive one-dimensional gap (an exact connection
    falls into the bottom point and never returns).  The winding angle is
    measured in the straightened frame; pass `straighten_data` to reuse a
    precomputed change, or set track=False to skip the angle work (the
    bisection driver does, only the offset matters there).  `curves` may
    supply precomputed (Cu, Cs) section curves.
    """
    digits = max(sys.digits, current_digits())
    with working_precision(digits):
        eps = mpf(sys.epsilon)
        if check_precision:
            need = digits_for_transit(float(eps), float(sys.a))
            if digits < need:
                raise ConditionFailure(
                    f"transit at epsilon={_fmt(eps)} needs {need} digits "
                    f"(passage amplification), have {digits}"
                )
        tol = mpf(10) ** (-(digits - 6))

        north, south = find_equilibria(sys)
        gap = measure_s1(sys, north=north, south=south, delta=delta, validate=validate)
        if not gap.significant:
            raise ConditionFailure(
                f"one-dimensional gap {_fmt(gap.value, 4)} is inside its error "
                f"budget {_fmt(gap.error_budget, 4)}: exact connection to the "
                "bottom point, no second crossing exists"
            )
        q0 = gap.point_u

        budget = (
            mpf(time_budget)
            if time_budget is not None
            else default_transit_budget(sys.a, eps)
        )
        traj = integrate(
            sys.field,
            q0,
            budget,
            tol=tol,
            stop_event=EventSpec(surface=("z", 0), direction="up"),
            escape_radius=20,
        )
        if traj.status != "event" or traj.event is None:
            raise ConditionFailure(
                f"no second z = 0 crossing within scaled time {_fmt(budget, 4)} "
                f"(orbit status '{traj.status}'): consistent with a trapping "
                "region at this parameter, the manifolds are too far split "
                "for the return passage"
            )
        Q0 = traj.event.state
        tau = traj.event.t
        if tau <= 0:
            raise NumericalFailure("second crossing at nonpositive transit time")
        if abs(q0[2]) > 100 * tol or abs(Q0[2]) > 100 * tol:
            raise NumericalFailure(
                f"section points off the plane: z(q0)={_fmt(q0[2], 4)}, "
                f"z(Q0)={_fmt(Q0[2], 4)}"
            )

        theta0 = None
        min_radius = None
        if track:
            data = straighten_data
            transform = None
            if data is None and sys.straighten is not None:
                # the system is already expressed in straightened coordinates
                data = sys.straighten
            elif data is None:
                data = straighten_south(sys, south=south, delta=delta).straighten
                transform = data.from_original
            else:
                transform = data.from_original
            if data is sys.straighten:
                transform = None
            try:
                at = track_angle(
                    traj,
                    t_stop=tau,
                    radius_floor=mpf(10) ** (-(digits - 8)),
                    transform=transform,
                )
            except NumericalFailure as exc:
                raise ConditionFailure(
                    f"axis approach below the angle-tracking radius at "
                    f"epsilon={_fmt(eps)}: {exc}; raise the working precision"
                ) from exc
            theta0 = -at.total_change
            min_radius = at.min_radius
            if theta0 <= 0:
                raise NumericalFailure(
                    f"winding {_fmt(at.total_change, 4)} is not clockwise; "
                    "the passage did not round the bottom axis"
                )

        if curves is not None:
            cu, cs = curves
            if cu.which != CURVE_UNSTABLE or cs.which != CURVE_STABLE:
                raise ConditionFailure("curves must be passed as (Cu, Cs)")
        else:
            cu = manifold_2d_section(
                sys, south, theta_grid, validate=validate
            )
            cs = manifold_2d_section(
                sys, north, theta_grid, validate=validate
            )
        xq, yq, _ = Q0
        theta_q = gmpy2.atan2(yq, xq)
        rho_q = (xq * xq + yq * yq) / 2
        dist_cu = abs(rho_q - cu.r_at(theta_q))
        signed_offset = rho_q - cs.r_at(theta_q)
        offset_budget = cu.est_error + cs.est_error + 100 * tol

        return SecondCrossing(
            epsilon=eps,
            sigma=mpf(sys.sigma),
            q0=q0,
            Q0=Q0,
            tau=tau,
            theta0=theta0,
            dist_cu=dist_cu,
            signed_offset=signed_offset,
            theta_q=theta_q,
            rho_q=rho_q,
            s1_value=gap.value,
            min_radius=min_radius,
            offset_budget=offset_budget,
            curve_u=cu,
            curve_s=cs,
            digits=digits,
            trajectory=traj if keep_trajectory else None,
        )


# --------------------------------------------------------------------------
# homoclinic bisection


@dataclass(frozen=True)
class HomoclinicResult:
    """Root of the signed offset in sigma, with the orbit found there."""

    epsilon: object
    a: object
    sigma_s: object
    offset: object
    tolerance: object
    evaluations: tuple
    crossing: SecondCrossing | None
    verdict: bool | None
    lam: object
    rho_planar: object
    continuity_ok: bool
    orbit: tuple | None
    digits: int

    def as_dict(self, digits: int | None = None) -> dict:
        d = digits if digits is not None else self.digits
        return {
            "epsilon": to_decimal(self.epsilon, d),
            "a": to_decimal(self.a, d),
            "sigma_s": to_decimal(self.sigma_s, d),
            "offset": to_decimal(self.offset, d),
            "tolerance": to_decimal(self.tolerance, d),
            "evaluations": [
                [to_decimal(s, d), to_decimal(f, d)] for s, f in self.evaluations
            ],
            "verdict": self.verdict,
            "lam": None if self.lam is None else to_decimal(self.lam, d),
            "rho_planar": None
            if self.rho_planar is None
            else to_decimal(self.rho_planar, d),
            "continuity_ok": self.continuity_ok,
            "digits": self.digits,
            "crossing": None if self.crossing is None else self.crossing.as_dict(d),
            "orbit": None
            if self.orbit is None
            else [
                [to_decimal(t, d)] + [to_decimal(c, d) for c in p]
                for t, p in self.orbit
            ],
        }


def _continuity_check(evals, tol):
    """Adjacent offsets must move no faster than the steepest local slope."""
    pts = sorted(evals, key=lambda p: p[0])
    if len(pts) < 3:
        return True
    slopes = []
    for (s0, f0), (s1, f1) in zip(pts, pts[1:]):
        if s1 != s0:
            slopes.append(abs((f1 - f0) / (s1 - s0)))
    if not slopes:
        return True
    cap = 4 * max(slopes)
    for (s0, f0), (s1, f1) in zip(pts, pts[1:]):
        if abs(f1 - f0) > cap * abs(s1 - s0) + 4 * tol:
            return False
    return True


def _root_hybrid(fn, lo, hi, f_lo, f_hi, tol_of, max_iter, progress=None):
    """Secant-accelerated bisection on a sign-changing bracket.

    fn returns (offset, record); tol_of maps the latest record to the
    acceptance tolerance, so the target can tighten as measurements come
    in sharper.  Returns (sigma, offset, record, evals).
    """
    evals = []
    best = None
    a, b = lo, hi
    fa, fb = f_lo, f_hi
    side = 0
    for k in range(max_iter):
        width = abs(b - a)
        # Illinois-weighted false position, clamped off the endpoints
        denom = fb - fa
        if denom == 0:
            mid = (a + b) / 2
        else:
            mid = b - fb * (b - a) / denom
            off = width / 16
            mid = min(max(mid, min(a, b) + off), max(a, b) - off)
        fm, rec = fn(mid)
        evals.append((mid, fm))
        tol = tol_of(rec)
        if best is None or abs(fm) < abs(best[1]):
            best = (mid, fm, rec)
        if progress is not None:
            progress(k, mid, fm, tol)
        if abs(fm) <= tol:
            return mid, fm, rec, evals
        if (fm > 0) == (fb > 0):
            b, fb = mid, fm
            if side == +1:
                fa /= 2
            side = +1
        else:
            a, fa = mid, fm
            if side == -1:
                fb /= 2
            side = -1
        slope = abs((f_hi - f_lo) / (hi - lo)) if hi != lo else mpf(1)
        if abs(b - a) * max(slope, mpf("1e-30")) <= tol:
            return best[0], best[1], best[2], evals
    raise NumericalFailure(
        f"offset root not located in {max_iter} evaluations; "
        f"best |offset| {_fmt(best[1], 4)}"
    )


def homoclinic_bisect(
    nf: NormalFormResult,
    epsilon,
    sigma_lo,
    sigma_hi,
    *,
    offset_fn=None,
    tol=None,
    theta_grid: int = 16,
    margin: int = 4,
    max_iter: int = 48,
    check_precision: bool = True,
    keep_orbit: bool = True,
    orbit_samples: int = 400,
    progress=None,
) -> HomoclinicResult:
    """Locate sigma with Q0 on the curve Cs between two bracketing values.

    The endpoints must give signed offsets of opposite signs (Q0 outside
    Cs at one end, inside at the other).  `offset_fn`, when given, replaces
    the measured offset entirely so the solver can be exercised on synthetic
    roots.  The returned result carries the full second-crossing record at
    sigma_s and the expansivity verdict at the top point.
    """
    lo, hi = mpf(sigma_lo), mpf(sigma_hi)
    if lo > hi:
        lo, hi = hi, lo

    if offset_fn is not None:
        digits = current_digits()
        user_tol = (
            mpf(tol) if tol is not None else mpf(10) ** (-(digits - 10))
        )
        f_lo, f_hi = mpf(offset_fn(lo)), mpf(offset_fn(hi))
        for sig_end, f_end in ((lo, f_lo), (hi, f_hi)):
            if f_end == 0:
                return HomoclinicResult(
                    epsilon=mpf(epsilon), a=mpf(nf.a), sigma_s=sig_end,
                    offset=f_end, tolerance=user_tol,
                    evaluations=((sig_end, f_end),), crossing=None,
                    verdict=None, lam=None, rho_planar=None,
                    continuity_ok=True, orbit=None, digits=digits,
                )
        if (f_lo > 0) == (f_hi > 0):
            raise ConditionFailure(
                f"no sign change across [{_fmt(lo)}, {_fmt(hi)}]: offsets "
                f"{_fmt(f_lo, 4)} and {_fmt(f_hi, 4)}"
            )
        sig, off, _, evals = _root_hybrid(
            lambda s: (mpf(offset_fn(s)), None),
            lo, hi, f_lo, f_hi, lambda rec: user_tol, max_iter, progress,
        )
        evals = ((lo, f_lo), (hi, f_hi)) + tuple(evals)
        return HomoclinicResult(
            epsilon=mpf(epsilon), a=mpf(nf.a), sigma_s=sig, offset=off,
            tolerance=user_tol, evaluations=evals, crossing=None, verdict=None,
            lam=None, rho_planar=None,
            continuity_ok=_continuity_check(evals, user_tol), orbit=None,
            digits=digits,
        )

    eps = mpf(epsilon)
    digits = digits_for_transit(float(eps), float(nf.a)) + margin
    digits = max(digits, current_digits())
    with working_precision(digits):
        eps = mpf(epsilon)
        lo, hi = mpf(sigma_lo), mpf(sigma_hi)
        if lo > hi:
            lo, hi = hi, lo
        user_tol = None if tol is None else mpf(tol)

        def probe(sig):
            try:
                sc = second_crossing(
                    blow_up(nf, eps, sig),
                    theta_grid=theta_grid,
                    track=False,
                    validate=False,
                    check_precision=check_precision,
                )
            except (ConditionFailure, NumericalFailure) as exc:
                raise NumericalFailure(
                    f"second crossing failed inside the bracket at "
                    f"sigma={_fmt(sig, 10)}: {exc}"
                ) from exc
            return sc.signed_offset, sc

        def tol_of(rec):
            dyn = 4 * rec.offset_budget
            if user_tol is not None:
                dyn = max(dyn, user_tol)
            return dyn

        f_lo, rec_lo = probe(lo)
        f_hi, rec_hi = probe(hi)
        if (f_lo > 0) == (f_hi > 0):
            raise ConditionFailure(
                f"no sign change across sigma in [{_fmt(lo, 10)}, "
                f"{_fmt(hi, 10)}]: offsets {_fmt(f_lo, 4)} and {_fmt(f_hi, 4)}; "
                "endpoints do not straddle the connection"
            )
        sig, off, rec, evals = _root_hybrid(
            probe, lo, hi, f_lo, f_hi, tol_of, max_iter, progress
        )
        evals = [(lo, f_lo), (hi, f_hi)] + evals
        tol_final = tol_of(rec)

        # full record at the root, with winding and the orbit dump
        sys_s = blow_up(nf, eps, sig)
        final = second_crossing(
            sys_s,
            theta_grid=theta_grid,
            track=True,
            validate=False,
            check_precision=check_precision,
            keep_trajectory=True,
        )
        north, _ = find_equilibria(sys_s)
        verdict = shilnikov_eigenvalue_check(north) and 0 < mpf(nf.a) < 2
        orbit = None
        if keep_orbit and final.trajectory is not None:
            orbit = tuple(
                (t, p[0], p[1], p[2])
                for t, p in final.trajectory.sample(orbit_samples)
            )
        if not keep_orbit:
            final = replace(final, trajectory=None)
        return HomoclinicResult(
            epsilon=eps,
            a=mpf(nf.a),
            sigma_s=sig,
            offset=off,
            tolerance=tol_final,
            evaluations=tuple(evals),
            crossing=final,
            verdict=verdict,
            lam=north.eigen.lam_real,
            rho_planar=north.eigen.rho,
            continuity_ok=_continuity_check(evals, tol_final),
            orbit=orbit,
            digits=digits,
        )


# --------------------------------------------------------------------------
# hypothesis verification


@dataclass(frozen=True)
class HypothesisEntry:
    name: str
    passed: bool
    constants: dict
    detail: str

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "constants": dict(self.constants),
            "detail": self.detail,
        }


@dataclass(frozen=True)
class HypothesisReport:
    """H1-H5 verification record over an epsilon grid."""

    a: object
    entries: tuple
    digits: int

    def entry(self, name: str) -> HypothesisEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    @property
    def verdict(self) -> bool:
        a = mpf(self.a)
        return all(e.passed for e in self.entries) and 0 < a < 2

    def as_dict(self, digits: int | None = None) -> dict:
        d = digits if digits is not None else self.digits
        return {
            "a": to_decimal(self.a, d),
            "verdict": self.verdict,
            "a_in_range": bool(0 < mpf(self.a) < 2),
            "entries": [e.as_dict() for e in self.entries],
        }


def oscillation_max(sample, scan: int = PROFILE_SCAN):
    """max over theta of |profile - mean| for one two-dimensional sample."""
    two_pi = 2 * _pi()
    mean = sample.mean
    best = mpf(0)
    for k in range(scan):
        v = abs(sample.profile_at(two_pi * k / scan) - mean)
        if v > best:
            best = v
    return best


def principal_profile_zero(sample):
    """Zero of the oscillatory part nearest above 0, from the first harmonic.

    The oscillation is dominated by 2 Re(d1 e^{i theta}); its zeros sit at
    pi/2 - arg(d1) modulo pi.  Returns the representative in [0, pi).
    """
    d1 = sample.first_harmonic
    if d1 == 0:
        raise ConditionFailure("no first harmonic; oscillation zero undefined")
    pi = _pi()
    th = pi / 2 - gmpy2.atan2(mpf(d1.imag), mpf(d1.real))
    while th >= pi:
        th -= pi
    while th < 0:
        th += pi
    return th


def verify_hypotheses(
    nf: NormalFormResult,
    sigma_rule,
    eps_grid,
    *,
    s1_samples=None,
    s1_fit=None,
    s2_samples=None,
    s2_fit=None,
    crossings=None,
    c0=0,
    theta_grid: int = 48,
    validate: bool = True,
    band_cap=100,
    progress=None,
) -> HypothesisReport:
    """Check the five smallness/winding hypotheses on measured data.

    sigma_rule fixes sigma per epsilon (number, callable, or a fitted
    parameter curve).  Measurements and fits are taken from the keyword
    arguments when supplied, and collected fresh otherwise; crossings
    (for H5) are computed on demand only, they carry the expensive passage
    integrations.  Constants are fitted, not proven: lower-bound constants
    take 0.9x the worst measured ratio, upper bounds 1.1x the best.
    """
    a = mpf(nf.a)
    if s1_samples is None:
        s1_samples = collect_s1(
            nf, eps_grid, sigma=sigma_rule, validate=validate, progress=progress
        )
    if s1_fit is None:
        s1_fit = fit_s1(s1_samples, a=a, c0=c0)
    if s2_samples is None:
        s2_samples = collect_s2(
            nf, eps_grid, sigma=sigma_rule, theta_grid=theta_grid,
            validate=validate, progress=progress,
        )
    if s2_fit is None:
        s2_fit = fit_s2(s2_samples, a=a)
    digits = max(s.digits for s in s1_samples)
    band_cap = mpf(band_cap)

    entries = []

    # H1: the one-dimensional gap dominates a fitted exponential envelope
    gamma1 = -s1_fit.rate
    n1 = s1_fit.power
    ratios = []
    for s in s1_samples:
        if not s.significant:
            continue
        eps = mpf(s.epsilon)
        env = eps ** n1 * gmpy2.exp(-gamma1 / eps)
        ratios.append(s.value / env)
    c1 = mpf("0.9") * min(ratios) if ratios else mpf(0)
    band1 = max(ratios) / min(ratios) if ratios else mpf("inf")
    h1_pass = bool(
        ratios
        and len(ratios) == len(s1_samples)
        and c1 > 0
        and band1 <= band_cap
    )
    entries.append(HypothesisEntry(
        name="H1",
        passed=h1_pass,
        constants={
            "C1": to_decimal(c1, digits),
            "N1": to_decimal(n1, digits),
            "gamma1": to_decimal(gamma1, digits),
            "band": to_decimal(band1, 6),
        },
        detail=f"{len(ratios)}/{len(s1_samples)} significant samples, "
               f"normalized band {to_decimal(band1, 4)}",
    ))

    # H2: the oscillatory part of the two-dimensional gap is genuinely there
    gamma2 = -s2_fit.rate if not s2_fit.degenerate else mpf(0)
    n2 = s2_fit.power if not s2_fit.degenerate else mpf(0)
    m_eps = []
    for s in s2_samples:
        if not s.harmonic_significant:
            continue
        eps = mpf(s.epsilon)
        env = eps ** n2 * gmpy2.exp(-gamma2 / eps)
        m_eps.append((eps, oscillation_max(s), env))
    ratios2 = [m / env for _, m, env in m_eps]
    c2 = mpf("0.9") * min(ratios2) if ratios2 else mpf(0)
    band2 = max(ratios2) / min(ratios2) if ratios2 else mpf("inf")
    h2_pass = bool(
        not s2_fit.degenerate
        and ratios2
        and len(ratios2) == len(s2_samples)
        and c2 > 0
        and band2 <= band_cap
    )
    entries.append(HypothesisEntry(
        name="H2",
        passed=h2_pass,
        constants={
            "C2": to_decimal(c2, digits),
            "N2": to_decimal(n2, digits),
            "gamma2": to_decimal(gamma2, digits),
            "band": to_decimal(band2, 6),
        },
        detail=f"{len(ratios2)}/{len(s2_samples)} significant harmonics",
    ))

    # H3: the mean part stays pinched between 0 and the same envelope
    means = [(mpf(s.epsilon), s.mean, s.est_error, s.mean_significant)
             for s in s2_samples]
    all_insignificant = all(not sig for _, _, _, sig in means)
    if all_insignificant:
        # mean identically zero within resolution; any constant works
        entries.append(HypothesisEntry(
            name="H3",
            passed=True,
            constants={"C2_tilde": "0", "zero_mean": "true"},
            detail="mean part below significance at every epsilon",
        ))
        c2t = mpf(0)
    else:
        neg_slack = min(m + 3 * err for _, m, err, _ in means)
        ratios3 = []
        for eps, m, err, sig in means:
            if not sig:
                continue
            env = eps ** n2 * gmpy2.exp(-gamma2 / eps)
            ratios3.append(m / env)
        c2t = mpf("1.1") * max(ratios3) if ratios3 else mpf(0)
        h3_pass = bool(neg_slack >= 0 and ratios3 and min(ratios3) > 0)
        entries.append(HypothesisEntry(
            name="H3",
            passed=h3_pass,
            constants={
                "C2_tilde": to_decimal(c2t, digits),
                "min_mean_plus_slack": to_decimal(neg_slack, 6),
            },
            detail=f"{len(ratios3)} significant means, nonnegative within "
                   "3x error budget" if h3_pass else "mean part escapes "
                   "the [0, envelope] pinch",
        ))

    # H4: the literal rate-ratio inequality
    ratio = gamma2 / gamma1 if gamma1 != 0 else mpf("inf")
    h4_pass = bool(gamma1 > 0 and gamma2 > 0 and ratio < 2 / a)
    entries.append(HypothesisEntry(
        name="H4",
        passed=h4_pass,
        constants={
            "gamma2_over_gamma1": to_decimal(ratio, digits),
            "two_over_a": to_decimal(2 / a, digits),
        },
        detail=f"{to_decimal(ratio, 6)} < {to_decimal(2 / a, 6)}"
               if h4_pass else "ratio check failed",
    ))

    # H5: winding runs away from the oscillation zeros like 1/eps^2
    if crossings is None:
        crossings = []
        for eps in eps_grid:
            sig = _sigma_of(sigma_rule, mpf(eps))
            need = digits_for_transit(float(eps), float(a)) + 4
            with working_precision(need):
                sys = blow_up(nf, eps, sig)
                crossings.append(second_crossing(
                    sys, theta_grid=theta_grid // 2, validate=False
                ))
            if progress is not None:
                progress(f"crossing eps={to_decimal(eps, 6)} done")
    by_eps = {}
    for s in s2_samples:
        by_eps[to_decimal(mpf(s.epsilon), 12)] = s
    diffs = []
    for sc in crossings:
        key = to_decimal(mpf(sc.epsilon), 12)
        if key not in by_eps or sc.theta0 is None:
            continue
        sample = by_eps[key]
        if not sample.harmonic_significant:
            continue
        th_star = principal_profile_zero(sample)
        diffs.append((mpf(sc.epsilon), sc.theta0 - th_star))
    diffs.sort(key=lambda p: p[0], reverse=True)
    l0 = s2_fit.l0 if s2_fit.l0 is not None else mpf(0)
    if len(diffs) >= 3:
        increasing = all(
            d1 > d0 for (_, d0), (_, d1) in zip(diffs, diffs[1:])
        )
        d_fit = min(
            (diff + l0 * gmpy2.log(eps) / a) * eps * eps for eps, diff in diffs
        )
        h5_pass = bool(increasing and d_fit > 0)
        detail = (
            f"theta0 - theta0* over {len(diffs)} points, "
            f"{'increasing' if increasing else 'not increasing'}, "
            f"envelope constant {to_decimal(d_fit, 6)}"
        )
    else:
        increasing = False
        d_fit = mpf(0)
        h5_pass = False
        detail = f"only {len(diffs)} usable winding points, need 3"
    entries.append(HypothesisEntry(
        name="H5",
        passed=h5_pass,
        constants={
            "d": to_decimal(d_fit, digits),
            "L0": to_decimal(l0, digits),
            "points": str(len(diffs)),
        },
        detail=detail,
    ))

    return HypothesisReport(a=a, entries=tuple(entries), digits=digits)


# --------------------------------------------------------------------------
# boundary and growth diagnostics


@dataclass(frozen=True)
class GeometryDiagnostics:
    """Pointwise boundary fluxes and fitted growth constants."""

    epsilon: object
    sigma: object
    radius: object
    nu1: object
    grid: tuple
    cyl_min_flux: object
    cyl_expected: object
    cyl_witness: tuple
    ell_min_margin: object
    ell_expected: object
    ell_witness: tuple
    h_growth_k: object
    h_orbits: int
    gronwall_c: object
    gronwall_lipschitz: object
    gronwall_ok: bool
    tau_records: tuple
    d0_fit: object
    digits: int

    def as_dict(self, digits: int | None = None) -> dict:
        d = digits if digits is not None else self.digits
        return {
            "epsilon": to_decimal(self.epsilon, d),
            "sigma": to_decimal(self.sigma, d),
            "radius": to_decimal(self.radius, d),
            "nu1": to_decimal(self.nu1, d),
            "grid": list(self.grid),
            "cyl_min_flux": to_decimal(self.cyl_min_flux, d),
            "cyl_expected": to_decimal(self.cyl_expected, d),
            "cyl_witness": [to_decimal(c, d) for c in self.cyl_witness],
            "ell_min_margin": to_decimal(self.ell_min_margin, d),
            "ell_expected": to_decimal(self.ell_expected, d),
            "ell_witness": [to_decimal(c, d) for c in self.ell_witness],
            "h_growth_k": to_decimal(self.h_growth_k, d),
            "h_orbits": self.h_orbits,
            "gronwall_c": to_decimal(self.gronwall_c, d),
            "gronwall_lipschitz": to_decimal(self.gronwall_lipschitz, d),
            "gronwall_ok": self.gronwall_ok,
            "tau_records": [
                {k: to_decimal(v, d) for k, v in rec.items()}
                for rec in self.tau_records
            ],
            "d0_fit": None if self.d0_fit is None else to_decimal(self.d0_fit, d),
            "digits": self.digits,
        }


def first_integral_value(p, a, b):
    """H = rho_e^{1/a} * (-1 + z^2 + (b/(1+a)) rho_e), rho_e = x^2 + y^2."""
    x, y, z = (mpf(c) for c in p)
    a, b = mpf(a), mpf(b)
    r2 = x * x + y * y
    w = -1 + z * z + b / (1 + a) * r2
    if r2 == 0:
        return mpf(0)
    return gmpy2.exp(gmpy2.log(r2) / a) * w


def _jacobian_inf_norm(field: PolyField, p):
    jac = field.jacobian(p)
    return max(sum(abs(v) for v in row) for row in jac)


def _random_interior_point(rng, lo_z="-0.75", hi_z="-0.15"):
    two_pi = 2 * _pi()
    r = mpf("0.35") + mpf(str(rng.random())) * mpf("0.5")
    th = two_pi * mpf(str(rng.random()))
    z = mpf(lo_z) + mpf(str(rng.random())) * (mpf(hi_z) - mpf(lo_z))
    return (r * gmpy2.cos(th), r * gmpy2.sin(th), z)


def geometry_diagnostics(
    sys: ScaledSystem,
    *,
    radius="1",
    nu1="0.1",
    grid=(64, 64),
    n_orbits: int = 10,
    pair_offset=None,
    rng_seed: int = 7,
    t_span="2",
    samples_per_orbit: int = 24,
    crossings=(),
    raise_on_violation: bool = True,
) -> GeometryDiagnostics:
    """Boundary fluxes, growth constants, and transit-time comparisons.

    Pass the straightened system so the side boundaries enclose the actual
    bottom axis.  The cylinder check wants the planar flow outward on
    {x^2+y^2 = R^2, z in [-1, -eps |log eps|]}; the inflated-globe check
    wants the level W = nu1 of W = -1 + z^2 + (b/(1+a))(x^2+y^2) entered,
    not exited, on the same z range.  Growth constants K (first-integral
    drift per unit eps-time) and C (orbit-pair separation rate) are fitted
    as the worst measured slope, then reported with the bounds they imply
    for the transit times in `crossings`.
    """
    digits = max(sys.digits, current_digits())
    with working_precision(digits):
        eps = mpf(sys.epsilon)
        a, b = mpf(sys.a), mpf(sys.b)
        R = mpf(radius)
        nu = mpf(nu1)
        loge = abs(gmpy2.log(eps))
        z_top = -eps * loge
        nz, nth = grid
        two_pi = 2 * _pi()
        tol = mpf(10) ** (-(digits - 6))

        cyl_min = None
        cyl_wit = None
        for j in range(nz):
            z = -1 + (z_top + 1) * j / (nz - 1)
            for i in range(nth):
                th = two_pi * i / nth
                pt = (R * gmpy2.cos(th), R * gmpy2.sin(th), z)
                v = sys.field.eval(pt)
                flux = pt[0] * v[0] + pt[1] * v[1]
                if cyl_min is None or flux < cyl_min:
                    cyl_min, cyl_wit = flux, pt
        cyl_expected = a * eps * loge * R * R
        if cyl_min <= 0 and raise_on_violation:
            raise ConditionFailure(
                f"cylinder side boundary not outward at "
                f"({_fmt(cyl_wit[0])}, {_fmt(cyl_wit[1])}, {_fmt(cyl_wit[2])}): "
                f"flux {_fmt(cyl_min, 4)}; epsilon not small enough for the "
                "asymptotic regime"
            )

        ell_min = None
        ell_wit = None
        scale = 2 * b / (1 + a)
        for j in range(nz):
            z = -1 + (z_top + 1) * j / (nz - 1)
            r2 = (1 + a) * (nu + 1 - z * z) / b
            r = gmpy2.sqrt(r2)
            for i in range(nth):
                th = two_pi * i / nth
                pt = (r * gmpy2.cos(th), r * gmpy2.sin(th), z)
                v = sys.field.eval(pt)
                wdot = 2 * z * v[2] + scale * (pt[0] * v[0] + pt[1] * v[1])
                margin = -wdot
                if ell_min is None or margin < ell_min:
                    ell_min, ell_wit = margin, pt
        ell_expected = 2 * nu * eps * loge
        if ell_min <= 0 and raise_on_violation:
            raise ConditionFailure(
                f"inflated globe W = {_fmt(nu)} exited at "
                f"({_fmt(ell_wit[0])}, {_fmt(ell_wit[1])}, {_fmt(ell_wit[2])}): "
                f"inward margin {_fmt(ell_min, 4)}; epsilon not small enough "
                "for the asymptotic regime"
            )

        rng = random.Random(rng_seed)
        t_span = mpf(t_span)
        m = samples_per_orbit

        k_fit = mpf(0)
        used_orbits = 0
        for _ in range(n_orbits):
            p0 = _random_interior_point(rng)
            traj = integrate(sys.field, p0, t_span, tol=tol, escape_radius=20)
            vals = []
            ok = True
            for k in range(m + 1):
                t = traj.t_end * k / m
                h = first_integral_value(traj.state(t), a, b)
                if h == 0:
                    ok = False
                    break
                vals.append((t, gmpy2.log(abs(h))))
            if not ok or len(vals) < 2:
                continue
            used_orbits += 1
            for (t0, l0_), (t1, l1_) in zip(vals, vals[1:]):
                slope = abs((l1_ - l0_) / (t1 - t0)) / eps
                if slope > k_fit:
                    k_fit = slope

        c_fit = mpf(0)
        lips = mpf(0)
        gron_ok = True
        d0 = pair_offset
        if d0 is None:
            d0 = mpf("1e-8")
        else:
            d0 = mpf(d0)
        for _ in range(n_orbits):
            p0 = _random_interior_point(rng)
            dx = tuple(mpf(str(rng.random())) - mpf("0.5") for _ in range(3))
            nrm = gmpy2.sqrt(sum(c * c for c in dx))
            p1 = tuple(p0[i] + d0 * dx[i] / nrm for i in range(3))
            t1_ = integrate(sys.field, p0, t_span, tol=tol, escape_radius=20)
            t2_ = integrate(sys.field, p1, t_span, tol=tol, escape_radius=20)
            span = min(t1_.t_end, t2_.t_end)
            seps = []
            for k in range(1, m + 1):
                t = span * k / m
                q1, q2 = t1_.state(t), t2_.state(t)
                sep = gmpy2.sqrt(sum((q1[i] - q2[i]) ** 2 for i in range(3)))
                seps.append((t, sep))
                lips = max(lips, _jacobian_inf_norm(sys.field, q1))
            for t, sep in seps:
                if sep > 0:
                    c_here = gmpy2.log(sep / d0) / t
                    if c_here > c_fit:
                        c_fit = c_here
            for t, sep in seps:
                if sep > d0 * gmpy2.exp(c_fit * t) * (1 + mpf("1e-9")):
                    gron_ok = False
        if c_fit > lips * mpf("1.05"):
            # Gronwall with the sampled Lipschitz bound must dominate
            gron_ok = False

        tau_records = []
        d0_fit = None
        if crossings:
            d0_fit = mpf("1.1") * max(
                mpf(sc.tau) * mpf(sc.epsilon) for sc in crossings
            )
            for sc in crossings:
                e = mpf(sc.epsilon)
                lower = _pi() / (4 * c_fit * e) if c_fit > 0 else mpf(0)
                upper = d0_fit / e
                tau_records.append({
                    "epsilon": e,
                    "tau": mpf(sc.tau),
                    "lower": lower,
                    "upper": upper,
                    "ok": mpf(1) if lower <= sc.tau <= upper else mpf(0),
                })

        return GeometryDiagnostics(
            epsilon=eps,
            sigma=mpf(sys.sigma),
            radius=R,
            nu1=nu,
            grid=(nz, nth),
            cyl_min_flux=cyl_min,
            cyl_expected=cyl_expected,
            cyl_witness=cyl_wit,
            ell_min_margin=ell_min,
            ell_expected=ell_expected,
            ell_witness=ell_wit,
            h_growth_k=k_fit,
            h_orbits=used_orbits,
            gronwall_c=c_fit,
            gronwall_lipschitz=lips,
            gronwall_ok=gron_ok,
            tau_records=tuple(tau_records),
            d0_fit=d0_fit,
            digits=digits,
        )
