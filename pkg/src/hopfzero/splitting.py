"""Exponentially small splitting distances and their asymptotic fits.

Two measurements live here.  The one-dimensional distance is the gap at
z = 0 between the axis branches leaving the two saddle-focus points; the
two-dimensional profile is the difference of the symplectic-radius section
curves of the invariant surfaces, resolved in the section angle.  Both decay
like exp(-const/epsilon), so every sample fixes its own working precision
from the precision rules before integrating.

Fitting conventions.  The distance laws have the shape

    value(eps) = eps^P * exp(R/eps) * (C + corr/|log eps|)

with (P, R) known: (a-1, -pi/2) for the one-dimensional gap and
(-2-2/a, -pi/(2a)) for the first harmonic of the profile.  The fit runs
twice: a free-rate regression of log(value) on {1, log eps, 1/eps,
1/|log eps|} used only to confirm the rate (the 1/|log eps| column matters:
without it the slowly varying envelope leaks into the power estimate), and
an affine regression of value / (eps^P exp(R/eps)) against 1/|log eps| that
produces the limit constant C and the correction coefficient.  Samples
whose magnitude is below 10^3 times their propagated error estimate are
excluded from both regressions and flagged.

The mean of the profile is not exponentially small: away from the curve
Gamma_0 it behaves like sigma*I + eps*J, affine in sigma at fixed eps.
`gamma_curve` root-solves that mean (rescaled to the invariant the affine
law is stated for) in sigma, node by node over an epsilon grid, which is a
precondition for fitting the first harmonic at all.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import gmpy2

from .errors import ConditionFailure, NumericalFailure
from .jets import MODE_GENERAL
from .linalg import norm2, solve_least_squares
from .manifolds import find_equilibria, manifold_1d, manifold_2d_section
from .normalform import NormalFormResult, ScaledSystem, blow_up, compute_c0
from .precision import (
    clamp_digits,
    current_digits,
    digits_for_one_dim,
    digits_for_two_dim,
    mpf,
    to_decimal,
    working_precision,
)

DEFAULT_EPS_WINDOW = ("0.04", "0.2")
GRID_RATIO_POWER = 4              # geometric grids use ratio 2^(1/4)
SIGNIFICANCE_FACTOR = 1000        # sample kept iff value >= factor * error
MIN_FIT_SAMPLES = 6
MIN_EPS_SPAN = 3                  # max(eps)/min(eps) for a fit window
RATE_GUARD = "0.10"               # relative deviation allowed on the rate

KIND_ONE_DIM = "one_dim"
KIND_TWO_DIM = "two_dim"


def _fmt(x):
    return to_decimal(mpf(x), min(current_digits(), 17))


def default_eps_grid(lo=None, hi=None):
    """Geometric grid with ratio 2^(1/4) covering [lo, hi], descending."""
    lo = mpf(lo if lo is not None else DEFAULT_EPS_WINDOW[0])
    hi = mpf(hi if hi is not None else DEFAULT_EPS_WINDOW[1])
    if not (0 < lo < hi):
        raise ConditionFailure("need 0 < lo < hi for the epsilon window")
    ratio = mpf(2) ** (mpf(1) / GRID_RATIO_POWER)
    grid = []
    e = hi
    while e >= lo * (1 - mpf("1e-12")):
        grid.append(+e)
        e = e / ratio
    return tuple(grid)


def envelope_one_dim(a, epsilon, c0=0):
    """Reference magnitude eps^(a-1) exp(-pi/(2 eps)) exp(-pi c0/2)."""
    a, eps, c0 = mpf(a), mpf(epsilon), mpf(c0)
    pi = gmpy2.const_pi()
    return eps ** (a - 1) * gmpy2.exp(-pi / (2 * eps)) * gmpy2.exp(-pi * c0 / 2)


def envelope_two_dim(a, epsilon):
    """Reference magnitude eps^(-2-2/a) exp(-pi/(2 a eps))."""
    a, eps = mpf(a), mpf(epsilon)
    pi = gmpy2.const_pi()
    return eps ** (-2 - 2 / a) * gmpy2.exp(-pi / (2 * a * eps))


# ---------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class S1Sample:
    """One-dimensional gap at one (epsilon, sigma)."""

    epsilon: object
    sigma: object
    value: object            # Euclidean distance in the z = 0 plane
    error_budget: object
    point_u: tuple           # section point of the branch leaving the top
    point_s: tuple           # section point of the branch entering the bottom
    digits: int

    @property
    def significant(self) -> bool:
        return self.value > 0 and self.value >= SIGNIFICANCE_FACTOR * self.error_budget

    def as_dict(self, digits: int | None = None) -> dict:
        d = digits if digits is not None else self.digits
        return {
            "epsilon": to_decimal(self.epsilon, d),
            "sigma": to_decimal(self.sigma, d),
            "value": to_decimal(self.value, d),
            "error_budget": to_decimal(self.error_budget, d),
            "significant": self.significant,
            "point_u": [to_decimal(c, d) for c in self.point_u],
            "point_s": [to_decimal(c, d) for c in self.point_s],
            "digits": self.digits,
        }


@dataclass(frozen=True)
class S2Sample:
    """Angular profile of the two-dimensional gap at one (epsilon, sigma).

    `coeffs` are the Fourier coefficients of r_u(theta) - r_s(theta) in the
    same convention as SectionCurve: profile = d_0 + sum 2 Re(d_k e^{ik th}).
    """

    epsilon: object
    sigma: object
    coeffs: tuple
    est_error: object
    digits: int
    curve_u: object = None
    curve_s: object = None

    @property
    def mean(self):
        c0 = self.coeffs[0]
        return mpf(c0.real if isinstance(c0, gmpy2.mpc) else c0)

    @property
    def first_harmonic(self):
        if len(self.coeffs) < 2:
            return gmpy2.mpc(0)
        c = self.coeffs[1]
        return c if isinstance(c, gmpy2.mpc) else gmpy2.mpc(c)

    @property
    def harmonic_amplitude(self):
        return 2 * abs(self.first_harmonic)

    @property
    def mean_significant(self) -> bool:
        m = abs(self.mean)
        return m > 0 and m >= SIGNIFICANCE_FACTOR * self.est_error

    @property
    def harmonic_significant(self) -> bool:
        amp = self.harmonic_amplitude
        return amp > 0 and amp >= SIGNIFICANCE_FACTOR * self.est_error

    def profile_at(self, theta):
        th = mpf(theta)
        acc = self.mean
        for k in range(1, len(self.coeffs)):
            ck = self.coeffs[k]
            acc += 2 * (ck.real * gmpy2.cos(k * th) - ck.imag * gmpy2.sin(k * th))
        return acc

    def profile_derivative_at(self, theta):
        th = mpf(theta)
        acc = mpf(0)
        for k in range(1, len(self.coeffs)):
            ck = self.coeffs[k]
            acc += -2 * k * (ck.real * gmpy2.sin(k * th) + ck.imag * gmpy2.cos(k * th))
        return acc

    def as_dict(self, digits: int | None = None) -> dict:
        d = digits if digits is not None else self.digits
        out = {
            "epsilon": to_decimal(self.epsilon, d),
            "sigma": to_decimal(self.sigma, d),
            "mean": to_decimal(self.mean, d),
            "first_harmonic": [
                to_decimal(mpf(self.first_harmonic.real), d),
                to_decimal(mpf(self.first_harmonic.imag), d),
            ],
            "harmonic_amplitude": to_decimal(self.harmonic_amplitude, d),
            "est_error": to_decimal(self.est_error, d),
            "mean_significant": self.mean_significant,
            "harmonic_significant": self.harmonic_significant,
            "digits": self.digits,
        }
        if self.curve_u is not None:
            out["curve_u"] = self.curve_u.as_dict(d)
        if self.curve_s is not None:
            out["curve_s"] = self.curve_s.as_dict(d)
        return out


# ---------------------------------------------------------------------------
# measurements


def measure_s1(
    sys: ScaledSystem,
    *,
    north=None,
    south=None,
    delta=None,
    validate: bool = True,
) -> S1Sample:
    """Euclidean gap at z = 0 between the two one-dimensional branches.

    The branch leaving the top point flows down to the section; the branch
    entering the bottom point is reached backward in time.  Working
    precision must satisfy the one-dimensional rule for sys.epsilon, since
    the gap is of order exp(-pi/(2 eps)).
    """
    need = digits_for_one_dim(sys.epsilon)
    if current_digits() < need:
        raise NumericalFailure(
            f"one-dim gap at epsilon = {_fmt(sys.epsilon)} needs >= {need} "
            f"working digits (rule), currently {current_digits()}"
        )
    if north is None or south is None:
        north, south = find_equilibria(sys)
    cross_u = manifold_1d(sys, north, delta=delta, validate=validate)
    cross_s = manifold_1d(sys, south, delta=delta, validate=validate)
    pu, ps = cross_u.section_point, cross_s.section_point
    value = norm2([pu[i] - ps[i] for i in range(3)])
    tol = mpf(10) ** (-(current_digits() - 6))
    budget = cross_u.drift + cross_s.drift + 10 * tol
    return S1Sample(
        epsilon=+sys.epsilon,
        sigma=+sys.sigma,
        value=value,
        error_budget=budget,
        point_u=tuple(pu),
        point_s=tuple(ps),
        digits=current_digits(),
    )


def profile_coeffs(curve_u, curve_s) -> tuple:
    """Fourier coefficients of r_u - r_s, padded to the longer curve."""
    nu, ns = len(curve_u.coeffs), len(curve_s.coeffs)
    out = []
    for k in range(max(nu, ns)):
        cu = curve_u.coeffs[k] if k < nu else gmpy2.mpc(0)
        cs = curve_s.coeffs[k] if k < ns else gmpy2.mpc(0)
        d = cu - cs
        out.append(mpf(d.real) if k == 0 and isinstance(d, gmpy2.mpc) else d)
    return tuple(out)


def measure_s2(
    sys: ScaledSystem,
    theta_grid: int = 64,
    *,
    curves=None,
    fourier_order: int | None = None,
    threads: int = 1,
    validate: bool = True,
) -> S2Sample:
    """Angular profile of the two-dimensional gap on the section z = 0.

    Measures both section curves (unless given) and subtracts their Fourier
    models.  The mean of the profile is generally O(sigma + eps); only the
    oscillating part is exponentially small, so the significance flags are
    tracked separately for the mean and the first harmonic.
    """
    need = digits_for_two_dim(sys.epsilon, sys.a)
    if current_digits() < need:
        raise NumericalFailure(
            f"two-dim gap at epsilon = {_fmt(sys.epsilon)} needs >= {need} "
            f"working digits (rule), currently {current_digits()}"
        )
    if curves is None:
        north, south = find_equilibria(sys)
        curve_u = manifold_2d_section(
            sys, south, theta_grid, fourier_order=fourier_order,
            threads=threads, validate=validate,
        )
        curve_s = manifold_2d_section(
            sys, north, theta_grid, fourier_order=fourier_order,
            threads=threads, validate=validate,
        )
    else:
        curve_u, curve_s = curves
        if curve_u.which != "Cu" or curve_s.which != "Cs":
            raise ConditionFailure("curves must be passed as (Cu, Cs)")
    return S2Sample(
        epsilon=+sys.epsilon,
        sigma=+sys.sigma,
        coeffs=profile_coeffs(curve_u, curve_s),
        est_error=curve_u.est_error + curve_s.est_error,
        digits=current_digits(),
        curve_u=curve_u,
        curve_s=curve_s,
    )


def _sigma_of(sigma, eps):
    if sigma is None:
        return mpf(0)
    if callable(sigma):
        return mpf(sigma(eps))
    if hasattr(sigma, "sigma_at"):
        return mpf(sigma.sigma_at(eps))
    return mpf(sigma)


def collect_s1(
    nf: NormalFormResult,
    eps_grid,
    *,
    sigma=0,
    margin: int = 8,
    delta=None,
    validate: bool = True,
    progress=None,
) -> list:
    """One-dimensional samples over an epsilon grid, each at its own precision.

    `sigma` may be a number, a callable eps -> sigma, or a GammaCurve.
    Samples come back sorted by increasing epsilon.
    """
    samples = []
    for eps in sorted((mpf(e) for e in eps_grid), reverse=True):
        digits = clamp_digits(digits_for_one_dim(eps) + margin)
        with working_precision(digits):
            sig = _sigma_of(sigma, eps)
            sys = blow_up(nf, eps, sig)
            sample = measure_s1(sys, delta=delta, validate=validate)
        samples.append(sample)
        if progress is not None:
            progress(sample)
    samples.reverse()
    return samples


def collect_s2(
    nf: NormalFormResult,
    eps_grid,
    *,
    sigma=0,
    theta_grid: int = 64,
    margin: int = 6,
    fourier_order: int | None = None,
    threads: int = 1,
    validate: bool = True,
    progress=None,
) -> list:
    """Two-dimensional profiles over an epsilon grid (see collect_s1)."""
    samples = []
    for eps in sorted((mpf(e) for e in eps_grid), reverse=True):
        digits = clamp_digits(digits_for_two_dim(eps, nf.a) + margin)
        with working_precision(digits):
            sig = _sigma_of(sigma, eps)
            sys = blow_up(nf, eps, sig)
            sample = measure_s2(
                sys, theta_grid, fourier_order=fourier_order,
                threads=threads, validate=validate,
            )
        samples.append(sample)
        if progress is not None:
            progress(sample)
    samples.reverse()
    return samples


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class SplittingReport:
    """Fit record for one splitting law over an epsilon window.

    For the one-dim law rate/power come straight from the free-rate
    regression.  For the two-dim law the free regression cannot separate
    the exponents from the slowly varying envelope on a desk-size window
    (the envelope converges like 1/|log eps|), so rate/power are the
    adjacent-pair cross estimates instead and the free regression values
    are kept in free_rate/free_power as diagnostics.  stokes and corr come
    from the constrained envelope regression (stokes is the limiting
    constant, the modulus sqrt(c1*^2 + c2*^2) in the two-dim case).  Phase
    fields and the mean-term diagnostics only apply to the two-dim law; I
    and J are filled in from a GammaCurve when one was solved.
    """

    kind: str
    rate: object
    power: object
    stokes: object
    corr: object
    residual_max: object
    rate_rel_error: object
    used: tuple
    rejected: tuple
    degenerate: bool = False
    c1star: object = None
    c2star: object = None
    phase_drift: object = None
    phase_intercept: object = None
    phase_residual: object = None
    mean_term: object = None
    I: object = None
    J: object = None
    free_rate: object = None
    free_power: object = None

    @property
    def window(self):
        eps = [s.epsilon for s in self.used]
        return (min(eps), max(eps)) if eps else (None, None)

    def as_dict(self, digits: int = 17) -> dict:
        num = lambda v: None if v is None else to_decimal(mpf(v), digits)
        out = {
            "kind": self.kind,
            "degenerate": self.degenerate,
            "rate": num(self.rate),
            "power": num(self.power),
            "stokes": num(self.stokes),
            "corr": num(self.corr),
            "residual_max": num(self.residual_max),
            "rate_rel_error": num(self.rate_rel_error),
            "samples_used": len(self.used),
            "samples_rejected": len(self.rejected),
            "window": [num(w) for w in self.window],
        }
        for name in (
            "c1star", "c2star", "phase_drift", "phase_intercept",
            "phase_residual", "mean_term", "I", "J", "free_rate",
            "free_power",
        ):
            v = getattr(self, name)
            if v is not None:
                out[name] = num(v)
        return out

    def with_gamma(self, curve: "GammaCurve") -> "SplittingReport":
        return replace(self, I=curve.I, J=curve.J)


def _free_rate_fit(eps_list, log_values):
    """Regression of log(value) on {1, log eps, 1/eps, 1/|log eps|}.

    Returns (const, power, rate, corr_coeff).  The fourth column absorbs
    the slowly varying envelope correction; without it the envelope leaks
    into the power estimate by a few tenths over realistic windows.
    """
    amat = []
    for e in eps_list:
        le = gmpy2.log(e)
        amat.append([mpf(1), le, 1 / e, 1 / abs(le)])
    sol = solve_least_squares(amat, list(log_values))
    return tuple(sol)


def _affine_fit(xs, ys):
    """Least-squares line intercept + slope*x; returns (a0, a1, max |res|)."""
    amat = [[mpf(1), x] for x in xs]
    a0, a1 = solve_least_squares(amat, list(ys))
    res = max(abs(y - (a0 + a1 * x)) for x, y in zip(xs, ys))
    return a0, a1, res


def _pairwise_exponents(eps, logs, *, rate_fixed, power_fixed, tail=3):
    """Adjacent-pair cross estimates of the exponential rate and the power.

    Differencing log values between neighbouring grid points cancels the
    constant part of the slowly varying envelope, so each pair gives a
    local exponent whose envelope bias is one order (in 1/|log eps|)
    smaller than what a joint regression over the same window leaks.  The
    rate estimate removes the model power term, the power estimate removes
    the model rate term, and both are averaged over the `tail` pairs at
    the small-epsilon end where the bias has died down.  eps ascending.
    """
    pairs = []
    for k in range(len(eps) - 1):
        dl = gmpy2.log(eps[k]) - gmpy2.log(eps[k + 1])
        di = 1 / eps[k] - 1 / eps[k + 1]
        dv = logs[k] - logs[k + 1]
        pairs.append((dl, di, dv))
    take = pairs[: max(1, min(tail, len(pairs)))]
    rates = [(dv - power_fixed * dl) / di for dl, di, dv in take]
    powers = [(dv - rate_fixed * di) / dl for dl, di, dv in take]
    return sum(rates) / len(rates), sum(powers) / len(powers)


def _check_fit_window(survivors, total_kind: str):
    if len(survivors) < MIN_FIT_SAMPLES:
        raise ConditionFailure(
            f"{total_kind} fit needs >= {MIN_FIT_SAMPLES} significant "
            f"samples, have {len(survivors)}"
        )
    eps = [s.epsilon for s in survivors]
    if max(eps) < MIN_EPS_SPAN * min(eps):
        raise ConditionFailure(
            f"{total_kind} fit window spans factor "
            f"{_fmt(max(eps) / min(eps))} < {MIN_EPS_SPAN} in epsilon"
        )


def envelope_fit_s1(samples, *, a, c0):
    """Envelope-only affine fit; returns (cstar, corr, max residual).

    Unlike fit_s1 this skips the free-rate confirmation and the window
    preconditions, so it can rank sub-windows (stability checks) that are
    too short for the full law fit.  Needs >= 3 significant samples.
    """
    a, c0 = mpf(a), mpf(c0)
    used = [s for s in samples if s.value > 0 and s.significant]
    if len(used) < 3:
        raise ConditionFailure(
            f"envelope fit needs >= 3 significant samples, have {len(used)}"
        )
    pi = gmpy2.const_pi()
    shift = gmpy2.exp(pi * c0 / 2)
    eps = [s.epsilon for s in used]
    ys = [s.value * e ** (1 - a) * gmpy2.exp(pi / (2 * e)) * shift
          for s, e in zip(used, eps)]
    xs = [1 / abs(gmpy2.log(e)) for e in eps]
    return _affine_fit(xs, ys)


def envelope_fit_s2(samples, *, a):
    """Envelope-only affine fit of the harmonic modulus (see envelope_fit_s1)."""
    a = mpf(a)
    used = [s for s in samples if s.harmonic_significant]
    if len(used) < 3:
        raise ConditionFailure(
            f"envelope fit needs >= 3 significant samples, have {len(used)}"
        )
    pi = gmpy2.const_pi()
    eps = [s.epsilon for s in used]
    ys = [s.harmonic_amplitude * e ** (2 + 2 / a) * gmpy2.exp(pi / (2 * a * e))
          for s, e in zip(used, eps)]
    xs = [1 / abs(gmpy2.log(e)) for e in eps]
    return _affine_fit(xs, ys)


def fit_s1(samples, *, a, c0) -> SplittingReport:
    """Fit the one-dimensional gap law over an epsilon grid.

    Model: log S1 = (a-1) log eps - pi/(2 eps) - pi c0/2
                    + log(C + corr/|log eps|).
    The free-rate regression confirms the exp(-pi/(2 eps)) rate (error if
    off by more than 10%); the envelope regression of
    S1 * eps^(1-a) * exp(pi/(2 eps)) * exp(pi c0/2) against 1/|log eps|
    yields C (the limit constant) and corr.
    """
    a, c0 = mpf(a), mpf(c0)
    samples = sorted(samples, key=lambda s: s.epsilon)
    if not samples:
        raise ConditionFailure("no samples")
    used = [s for s in samples if s.value > 0 and s.significant]
    rejected = [s for s in samples if not (s.value > 0 and s.significant)]
    if not used:
        raise ConditionFailure(
            "all samples are zero or below significance; no exponential "
            "regime to fit"
        )
    _check_fit_window(used, KIND_ONE_DIM)

    eps = [s.epsilon for s in used]
    logs = [gmpy2.log(s.value) for s in used]
    _, power, rate, _ = _free_rate_fit(eps, logs)

    pi = gmpy2.const_pi()
    rate_rel = abs(-rate - pi / 2) / (pi / 2)
    if rate_rel > mpf(RATE_GUARD):
        raise ConditionFailure(
            f"fitted rate {_fmt(-rate)} deviates {_fmt(rate_rel * 100)}% "
            "from pi/2; wrong regime or epsilon window"
        )

    shift = gmpy2.exp(pi * c0 / 2)
    ys = [s.value * e ** (1 - a) * gmpy2.exp(pi / (2 * e)) * shift
          for s, e in zip(used, eps)]
    xs = [1 / abs(gmpy2.log(e)) for e in eps]
    cstar, corr, res = _affine_fit(xs, ys)

    return SplittingReport(
        kind=KIND_ONE_DIM,
        rate=rate,
        power=power,
        stokes=cstar,
        corr=corr,
        residual_max=res,
        rate_rel_error=rate_rel,
        used=tuple(used),
        rejected=tuple(rejected),
    )


def _unwrap(phases):
    two_pi = 2 * gmpy2.const_pi()
    out = [phases[0]]
    for p in phases[1:]:
        q = p
        while q - out[-1] > two_pi / 2:
            q -= two_pi
        while q - out[-1] < -two_pi / 2:
            q += two_pi
        out.append(q)
    return out


def fit_s2(samples, *, a, phase_tol="0.2") -> SplittingReport:
    """Fit the first-harmonic law of the two-dimensional profile.

    Modulus model: 2|d1| = eps^(-2-2/a) exp(-pi/(2a eps)) (C + corr/|log eps|)
    with C = sqrt(c1*^2 + c2*^2).  Phase model: the profile's first harmonic
    is c1* cos(theta - L0/a log eps) + c2* sin(theta - L0/a log eps) times
    the envelope, so arg(d1) unwraps to an affine function of log eps with
    slope -L0/a.

    Exponents: the free four-basis regression only serves as a regime guard
    here, because on any affordable window its envelope column is nearly
    collinear with the power column and the estimates land far from the
    truth even on synthetic data.  The reported rate and power are the
    adjacent-pair cross estimates (see _pairwise_exponents), which converge
    as the window's small end falls; the free values are kept in
    free_rate/free_power.  Samples rejected by the significance rule are
    flagged; if every sample is insignificant the report comes back
    degenerate instead of raising (there is simply no harmonic to fit).
    """
    a = mpf(a)
    samples = sorted(samples, key=lambda s: s.epsilon)
    if not samples:
        raise ConditionFailure("no samples")
    used = [s for s in samples if s.harmonic_significant]
    rejected = [s for s in samples if not s.harmonic_significant]
    mean_term = max(abs(s.mean) for s in samples)
    if not used:
        return SplittingReport(
            kind=KIND_TWO_DIM,
            rate=None, power=None, stokes=None, corr=None,
            residual_max=None, rate_rel_error=None,
            used=(), rejected=tuple(rejected),
            degenerate=True, mean_term=mean_term,
        )
    _check_fit_window(used, KIND_TWO_DIM)

    eps = [s.epsilon for s in used]
    amps = [s.harmonic_amplitude for s in used]
    logs = [gmpy2.log(v) for v in amps]
    _, free_power, free_rate, _ = _free_rate_fit(eps, logs)

    pi = gmpy2.const_pi()
    target = pi / (2 * a)
    guard_rel = abs(-free_rate - target) / target
    if guard_rel > mpf(RATE_GUARD):
        raise ConditionFailure(
            f"fitted harmonic rate {_fmt(-free_rate)} deviates "
            f"{_fmt(guard_rel * 100)}% from pi/(2a); wrong regime or window"
        )

    rate, power = _pairwise_exponents(
        eps, logs, rate_fixed=-target, power_fixed=-(2 + 2 / a))
    rate_rel = abs(-rate - target) / target

    ys = [v * e ** (2 + 2 / a) * gmpy2.exp(pi / (2 * a * e))
          for v, e in zip(amps, eps)]
    xs = [1 / abs(gmpy2.log(e)) for e in eps]
    modulus, corr, res = _affine_fit(xs, ys)

    # phase drift: arg(d1) = -(L0/a) log eps + phi0 modulo 2 pi
    raw = [gmpy2.atan2(mpf(s.first_harmonic.imag), mpf(s.first_harmonic.real))
           for s in used]
    phases = _unwrap(raw)
    les = [gmpy2.log(e) for e in eps]
    phi0, slope, ph_res = _affine_fit(les, phases)
    if ph_res > mpf(phase_tol):
        raise ConditionFailure(
            f"phase drift is not affine in log eps: max residual "
            f"{_fmt(ph_res)} > {phase_tol}"
        )
    l0 = -a * slope
    c1star = modulus * gmpy2.cos(phi0)
    c2star = -modulus * gmpy2.sin(phi0)

    return SplittingReport(
        kind=KIND_TWO_DIM,
        rate=rate,
        power=power,
        stokes=modulus,
        corr=corr,
        residual_max=res,
        rate_rel_error=rate_rel,
        used=tuple(used),
        rejected=tuple(rejected),
        c1star=c1star,
        c2star=c2star,
        phase_drift=l0,
        phase_intercept=phi0,
        phase_residual=ph_res,
        mean_term=mean_term,
        free_rate=free_rate,
        free_power=free_power,
    )


# ---------------------------------------------------------------------------
# synthetic sample generators (fit oracles, CLI self-checks)


def synthetic_s1_samples(eps_grid, *, a, c0, cstar, corr=0, sigma=0) -> list:
    """Exact samples of the one-dimensional law (for validating fit_s1)."""
    a, c0, cstar, corr = mpf(a), mpf(c0), mpf(cstar), mpf(corr)
    out = []
    for eps in sorted(mpf(e) for e in eps_grid):
        envelope = cstar + corr / abs(gmpy2.log(eps))
        v = envelope_one_dim(a, eps, c0) * envelope
        out.append(S1Sample(
            epsilon=eps, sigma=mpf(sigma), value=v,
            error_budget=mpf(0), point_u=(v, mpf(0), mpf(0)),
            point_s=(mpf(0), mpf(0), mpf(0)), digits=current_digits(),
        ))
    return out


def synthetic_s2_samples(
    eps_grid, *, a, c1star, c2star, l0, corr=0, mean=0, sigma=0
) -> list:
    """Exact samples of the two-dimensional first-harmonic law."""
    a = mpf(a)
    c1, c2, l0, corr = mpf(c1star), mpf(c2star), mpf(l0), mpf(corr)
    out = []
    for eps in sorted(mpf(e) for e in eps_grid):
        env = envelope_two_dim(a, eps)
        modulus = gmpy2.sqrt(c1 * c1 + c2 * c2)
        scale = env * (modulus + corr / abs(gmpy2.log(eps)))
        phase = gmpy2.atan2(-c2, c1) - (l0 / a) * gmpy2.log(eps)
        d1 = (scale / 2) * gmpy2.mpc(gmpy2.cos(phase), gmpy2.sin(phase)) \
            if modulus > 0 else gmpy2.mpc(0)
        out.append(S2Sample(
            epsilon=eps, sigma=mpf(sigma),
            coeffs=(mpf(mean), d1),
            est_error=mpf(0), digits=current_digits(),
        ))
    return out


# ---------------------------------------------------------------------------
# the Gamma curves: root-solving the mean term in sigma


@dataclass(frozen=True)
class GammaNode:
    """One solved point of a Gamma curve."""

    epsilon: object
    sigma: object
    target: object
    proxy_residual: object    # |proxy(sigma) - target| at acceptance
    tolerance: object
    slope: object             # d proxy / d sigma near the root (estimates I)
    evaluations: int

    def as_dict(self, digits: int = 17) -> dict:
        num = lambda v: to_decimal(mpf(v), digits)
        return {
            "epsilon": num(self.epsilon),
            "sigma": num(self.sigma),
            "target": num(self.target),
            "proxy_residual": num(self.proxy_residual),
            "tolerance": num(self.tolerance),
            "slope": num(self.slope),
            "evaluations": self.evaluations,
        }


@dataclass(frozen=True)
class GammaCurve:
    """sigma*(eps) curve on which the profile mean equals the rho-target.

    Nodes are solved independently per epsilon; I is the averaged measured
    slope of the mean in sigma, J comes from the affine fit
    sigma*(eps) ~ intercept - (J/I) eps.
    """

    rho: tuple | None
    nodes: tuple
    I: object
    J: object
    intercept: object
    fit_residual: object

    def sigma_at(self, eps):
        eps = mpf(eps)
        nodes = self.nodes
        if len(nodes) == 1:
            return +nodes[0].sigma
        if eps <= nodes[0].epsilon:
            lo, hi = nodes[0], nodes[1]
        elif eps >= nodes[-1].epsilon:
            lo, hi = nodes[-2], nodes[-1]
        else:
            lo = max((n for n in nodes if n.epsilon <= eps),
                     key=lambda n: n.epsilon)
            hi = min((n for n in nodes if n.epsilon >= eps),
                     key=lambda n: n.epsilon)
            if lo.epsilon == hi.epsilon:
                return +lo.sigma
        t = (eps - lo.epsilon) / (hi.epsilon - lo.epsilon)
        return lo.sigma + t * (hi.sigma - lo.sigma)

    @property
    def sigma_error(self):
        """Worst-case sigma uncertainty across nodes (tolerance / slope)."""
        return max(n.tolerance / abs(n.slope) for n in self.nodes)

    def as_dict(self, digits: int = 17) -> dict:
        num = lambda v: to_decimal(mpf(v), digits)
        return {
            "rho": None if self.rho is None else [num(c) for c in self.rho],
            "nodes": [n.as_dict(digits) for n in self.nodes],
            "I": num(self.I),
            "J": num(self.J),
            "intercept": num(self.intercept),
            "fit_residual": num(self.fit_residual),
            "sigma_error": num(self.sigma_error),
        }


def rho_target(rho, a, eps):
    """Target mean value c1 * eps^c2 * exp(-c3 pi/(2 a eps)); None -> 0."""
    if rho is None:
        return mpf(0)
    c1, c2, c3 = (mpf(c) for c in rho)
    pi = gmpy2.const_pi()
    return c1 * mpf(eps) ** c2 * gmpy2.exp(-c3 * pi / (2 * mpf(a) * mpf(eps)))


def _measured_proxy_factory(nf, theta_grid, fourier_order, threads, validate):
    scale = gmpy2.sqrt((nf.a + 1) / nf.b)

    def proxy(eps, sig):
        sys = blow_up(nf, eps, sig)
        sample = measure_s2(
            sys, theta_grid, fourier_order=fourier_order,
            threads=threads, validate=validate,
        )
        return sample.mean * scale, sample.est_error * scale

    return proxy


def gamma_curve(
    nf: NormalFormResult,
    eps_grid,
    rho=None,
    *,
    theta_grid: int = 48,
    margin: int = 6,
    fourier_order: int | None = None,
    threads: int = 1,
    validate: bool = False,
    proxy_fn=None,
    sigma0=None,
    max_iter: int = 24,
    progress=None,
) -> GammaCurve:
    """Solve the mean-term root sigma*(eps) over an epsilon grid.

    The solved quantity is the profile mean rescaled by sqrt((a+1)/b) (the
    invariant the affine law sigma*I + eps*J is stated for), minus the
    rho-target.  Secant iteration with bracket fallback, constrained to
    |sigma| <= sigma0*eps.  `proxy_fn(eps, sigma) -> (value, error)` swaps
    in a synthetic mean for oracle tests.

    rho is None (the zero target, curve Gamma_0) or a tuple (c1, c2, c3)
    encoding the target c1 eps^c2 exp(-c3 pi/(2 a eps)).
    """
    if nf.mode != MODE_GENERAL:
        raise ConditionFailure(
            "gamma curves need the general mode (two free parameters)"
        )
    if proxy_fn is None:
        proxy_fn = _measured_proxy_factory(
            nf, theta_grid, fourier_order, threads, validate
        )
    a = mpf(nf.a)
    s0 = mpf(sigma0) if sigma0 is not None else a / 2
    nodes = []
    slope_prev = None
    for eps in sorted((mpf(e) for e in eps_grid), reverse=True):
        digits = clamp_digits(digits_for_two_dim(eps, a) + margin)
        with working_precision(digits):
            target = rho_target(rho, a, eps)
            cap = mpf("0.999") * s0 * eps

            evals = {}

            def f(sig):
                if sig not in evals:
                    value, err = proxy_fn(eps, sig)
                    evals[sig] = (value - target, err)
                return evals[sig]

            v0, e0 = f(mpf(0))
            tol = 4 * e0 + abs(target) * mpf("1e-9") + mpf(10) ** (-digits + 8)
            x_prev, f_prev = mpf(0), v0
            if abs(v0) <= tol:
                x_cur, f_cur = x_prev, f_prev
                slope = slope_prev if slope_prev is not None else mpf(1)
            else:
                if slope_prev is not None and abs(slope_prev) > 0:
                    step = -v0 / slope_prev
                    x_cur = max(-cap, min(cap, step))
                else:
                    x_cur = -gmpy2.sign(v0) * cap / 4
                f_cur, e_cur = f(x_cur)
                tol = max(tol, 4 * e_cur)
                bracket = None
                if gmpy2.sign(f_cur) != gmpy2.sign(f_prev):
                    bracket = (x_prev, x_cur) if x_prev < x_cur else (x_cur, x_prev)
                it = 0
                while abs(f_cur) > tol:
                    it += 1
                    if it > max_iter:
                        raise NumericalFailure(
                            f"mean-term root at epsilon = {_fmt(eps)} did "
                            f"not converge in {max_iter} iterations "
                            f"(|residual| = {_fmt(abs(f_cur))}, tol = {_fmt(tol)})"
                        )
                    if f_cur == f_prev:
                        raise NumericalFailure(
                            f"mean term is flat in sigma at epsilon = "
                            f"{_fmt(eps)}; cannot root-solve"
                        )
                    x_new = x_cur - f_cur * (x_cur - x_prev) / (f_cur - f_prev)
                    if bracket is not None:
                        lo, hi = bracket
                        if not (lo < x_new < hi):
                            x_new = (lo + hi) / 2
                    elif abs(x_new) > cap:
                        # secant points outside the window: check the far
                        # edge for a sign change before giving up
                        edge = cap if x_new > 0 else -cap
                        f_edge, e_edge = f(edge)
                        tol = max(tol, 4 * e_edge)
                        if gmpy2.sign(f_edge) == gmpy2.sign(f_cur):
                            raise ConditionFailure(
                                f"mean-term root not bracketed inside "
                                f"|sigma| <= {_fmt(s0)}*eps at epsilon = "
                                f"{_fmt(eps)}"
                            )
                        x_new = edge
                    f_new, e_new = f(x_new)
                    tol = max(tol, 4 * e_new)
                    if gmpy2.sign(f_new) != gmpy2.sign(f_cur):
                        lo, hi = (x_cur, x_new) if x_cur < x_new else (x_new, x_cur)
                        bracket = (lo, hi)
                    elif bracket is not None:
                        lo, hi = bracket
                        if lo < x_new < hi:
                            flo, _ = f(lo)
                            if gmpy2.sign(f_new) == gmpy2.sign(flo):
                                bracket = (x_new, hi)
                            else:
                                bracket = (lo, x_new)
                    x_prev, f_prev = x_cur, f_cur
                    x_cur, f_cur = x_new, f_new
                if x_cur != x_prev:
                    slope = (f_cur - f_prev) / (x_cur - x_prev)
                else:
                    slope = slope_prev if slope_prev is not None else mpf(1)
            slope_prev = slope
            node = GammaNode(
                epsilon=+eps,
                sigma=+x_cur,
                target=+target,
                proxy_residual=abs(f_cur),
                tolerance=+tol,
                slope=+slope,
                evaluations=len(evals),
            )
        nodes.append(node)
        if progress is not None:
            progress(node)
    nodes.reverse()

    i_avg = sum(n.slope for n in nodes) / len(nodes)
    if len(nodes) >= 2:
        intercept, beta, res = _affine_fit(
            [n.epsilon for n in nodes], [n.sigma for n in nodes]
        )
    else:
        intercept, beta, res = mpf(0), nodes[0].sigma / nodes[0].epsilon, mpf(0)
    j_fit = -beta * i_avg
    return GammaCurve(
        rho=None if rho is None else tuple(mpf(c) for c in rho),
        nodes=tuple(nodes),
        I=i_avg,
        J=j_fit,
        intercept=intercept,
        fit_residual=res,
    )


# ---------------------------------------------------------------------------
# zeros of the profile


@dataclass(frozen=True)
class AngleRoot:
    """A zero of the angular profile, with its transversality data."""

    theta: object
    derivative: object

    @property
    def transverse(self) -> bool:
        return self.derivative != 0

    def as_dict(self, digits: int = 17) -> dict:
        return {
            "theta": to_decimal(mpf(self.theta), digits),
            "derivative": to_decimal(mpf(self.derivative), digits),
            "transverse": self.transverse,
        }


def heteroclinic_angles(profile, *, scan: int = 512, tol=None) -> tuple:
    """All zeros of the angular profile on [0, 2 pi), bisected to tol.

    `profile` is an S2Sample (or anything with profile_at /
    profile_derivative_at).  Raises when the profile never changes sign:
    the two surfaces do not intersect at this parameter, which is the
    expected outcome off the heteroclinic wedge.
    """
    if tol is None:
        tol = mpf(10) ** (-(current_digits() - 10))
    two_pi = 2 * gmpy2.const_pi()
    n = max(scan, 64)
    thetas = [two_pi * k / n for k in range(n + 1)]
    values = [profile.profile_at(th) for th in thetas]
    if all(v == 0 for v in values):
        raise ConditionFailure("profile is identically zero; no isolated angles")
    roots = []
    for k in range(n):
        va, vb = values[k], values[k + 1]
        if va == 0:
            roots.append(thetas[k])
            continue
        if gmpy2.sign(va) * gmpy2.sign(vb) < 0:
            lo, hi, flo = thetas[k], thetas[k + 1], va
            while hi - lo > tol:
                mid = (lo + hi) / 2
                fm = profile.profile_at(mid)
                if fm == 0:
                    lo = hi = mid
                    break
                if gmpy2.sign(fm) == gmpy2.sign(flo):
                    lo, flo = mid, fm
                else:
                    hi = mid
            roots.append((lo + hi) / 2)
    if not roots:
        raise ConditionFailure(
            "profile has no sign change: the two-dimensional manifolds do "
            "not intersect at this parameter"
        )
    return tuple(
        AngleRoot(theta=r, derivative=profile.profile_derivative_at(r))
        for r in roots
    )
