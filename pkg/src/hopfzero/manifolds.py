"""Equilibria of the blown-up system and their invariant manifolds.

The scaled field has two equilibria near (0, 0, +-1), both of saddle-focus
type while |sigma| < a: a real eigenvalue close to +-2 along the axis and a
complex pair with real part sigma -+ a in the rotation plane.  The north
point carries the 1D unstable branch and the 2D stable surface; the south
point is its time mirror.

Manifold pieces are grown the pedestrian way, which at high working
precision is also the accurate way:

  * 1D branches: seed at distance delta along the unit real eigenvector,
    optionally corrected by the quadratic manifold term, then integrate to
    the first z = 0 crossing.  A delta-halving rerun bounds the seeding
    error actually reaching the section.
  * 2D sections: seed a circle of radius delta in the invariant plane
    (again with a quadratic graph correction), flow every seed to z = 0,
    and least-squares fit a Fourier series for the symplectic radius
    r = (x^2 + y^2)/2 over the flow-determined crossing angles.

Both constructions benefit from the transverse contraction toward the
manifold: seeding errors shrink by a factor ~ delta^(2/a) on the way to the
section, so even modest delta values leave the section data limited by the
integration tolerance, not by the seeds.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import gmpy2

from .errors import ConditionFailure, NumericalFailure
from .flow import EventSpec, PolyField, Trajectory, integrate
from .linalg import SaddleFocusEigen, eig3_saddle_focus, mat_inverse, norm2, solve
from .normalform import ScaledSystem
from .precision import current_digits, mpf, to_decimal, working_precision

# Blow-up radius past which the asymptotic statements stop being useful;
# find_equilibria refuses larger epsilon unless the caller overrides.
EPSILON_MAX = "0.5"

BRANCH_TOWARD = "toward_globe"
BRANCH_AWAY = "away"

CURVE_UNSTABLE = "Cu"
CURVE_STABLE = "Cs"


@dataclass(frozen=True)
class Equilibrium:
    """Saddle-focus equilibrium with its eigen-structure.

    `side` is "north" (z near +1, 1D unstable / 2D stable) or "south"
    (z near -1, 1D stable / 2D unstable).  `residual` is the field norm at
    the refined point.
    """

    point: tuple
    eigen: SaddleFocusEigen
    side: str
    residual: object

    @property
    def lam(self):
        """Real eigenvalue (axis direction)."""
        return self.eigen.lam_real

    @property
    def rho_planar(self):
        """Magnitude of the real part of the complex pair."""
        return abs(self.eigen.rho)

    @property
    def omega(self):
        return self.eigen.omega

    def unstable_is_axis(self) -> bool:
        return self.eigen.lam_real > 0

    def as_dict(self, digits: int | None = None) -> dict:
        d = digits if digits is not None else current_digits()
        return {
            "side": self.side,
            "point": [to_decimal(c, d) for c in self.point],
            "lambda": to_decimal(self.eigen.lam_real, d),
            "pair_real": to_decimal(self.eigen.rho, d),
            "pair_imag": to_decimal(self.eigen.omega, d),
            "residual": to_decimal(self.residual, d),
        }


def _newton_equilibrium(field: PolyField, seed, tol, max_iter: int = 60):
    p = tuple(mpf(c) for c in seed)
    for _ in range(max_iter):
        f = field.eval(p)
        res = norm2(f)
        jac = [list(row) for row in field.jacobian(p)]
        step = solve(jac, list(f))
        p = tuple(p[i] - step[i] for i in range(3))
        if norm2(step) < tol and res < tol:
            return p, norm2(field.eval(p))
        drift = norm2([p[i] - mpf(seed[i]) for i in range(3)])
        if drift > mpf("0.5"):
            raise NumericalFailure(
                f"equilibrium search left the seed basin (moved {to_decimal(drift, 6)})"
            )
    raise NumericalFailure("equilibrium Newton iteration did not converge")


def find_equilibria(sys: ScaledSystem, *, eps_max=None) -> tuple:
    """Refine and classify the two saddle-focus points near (0, 0, +-1).

    Requires |sigma| < a so the planar rotation keeps a definite stability
    on each side; returns (north, south).
    """
    digits = max(sys.digits, current_digits())
    with working_precision(digits):
        a, sigma, eps = mpf(sys.a), mpf(sys.sigma), mpf(sys.epsilon)
        if abs(sigma) >= a:
            raise ConditionFailure(
                f"|sigma| = {to_decimal(abs(sigma), 6)} must stay below a = "
                f"{to_decimal(a, 6)} for the saddle-focus pattern"
            )
        cap = mpf(eps_max if eps_max is not None else EPSILON_MAX)
        if not (0 < eps <= cap):
            raise ConditionFailure(
                f"epsilon = {to_decimal(eps, 6)} outside (0, {to_decimal(cap, 4)}]"
            )
        tol = mpf(10) ** (-(digits - 6))
        out = {}
        for side, z0 in (("north", 1), ("south", -1)):
            p, res = _newton_equilibrium(sys.field, (0, 0, z0), tol)
            eig = eig3_saddle_focus([list(r) for r in sys.field.jacobian(p)])
            lam, re_pair = eig.lam_real, eig.rho
            want_lam_positive = side == "north"
            if (lam > 0) != want_lam_positive or (re_pair > 0) == want_lam_positive:
                raise ConditionFailure(
                    f"{side} point eigenvalue pattern is not the expected "
                    f"saddle-focus: lambda = {to_decimal(lam, 6)}, planar real "
                    f"part = {to_decimal(re_pair, 6)}"
                )
            out[side] = Equilibrium(point=p, eigen=eig, side=side, residual=res)
        return out["north"], out["south"]


def shilnikov_eigenvalue_check(eq: Equilibrium) -> bool:
    """Strict expansivity test |lambda| > |Re(pair)|.

    For the north point this is the literal condition lambda > rho; the
    south point is checked in reversed time, which swaps expansion and
    contraction and leads to the same comparison of magnitudes.  Equality
    fails (strict inequality convention).
    """
    lam = eq.eigen.lam_real
    re_pair = eq.eigen.rho
    if lam == 0 or re_pair == 0:
        return False
    if (lam > 0) == (re_pair > 0):
        # Same-sign real parts: not the focus pattern these orbits need.
        return False
    return abs(lam) > abs(re_pair)


# --------------------------------------------------------------------------
# seeding


def _quadratic_axis_term(field: PolyField, eq: Equilibrium):
    """Second-order coefficient w2 of the 1D manifold parameterization.

    With x(s) = p + s v + s^2 w2 and linear parameter dynamics s' = lam*s,
    invariance at order s^2 gives (J - 2 lam) w2 = -B(v, v)/2 where B is the
    Hessian bilinear form of the field at p.
    """
    p, v = eq.point, eq.eigen.axis
    lam = eq.eigen.lam_real
    jac = field.jacobian(p)
    rhs = []
    for comp in range(3):
        h = field.hessian(p, comp)
        acc = mpf(0)
        for i in range(3):
            for j in range(3):
                acc += v[i] * h[i][j] * v[j]
        rhs.append(-acc / 2)
    m = [[jac[r][c] - (2 * lam if r == c else 0) for c in range(3)] for r in range(3)]
    return solve(m, rhs)


def _axis_seed(field: PolyField, eq: Equilibrium, branch: str, delta, quadratic: bool):
    v = list(eq.eigen.axis)
    vz = v[2]
    if abs(vz) < mpf("0.2"):
        raise NumericalFailure("axis eigenvector nearly tangent to z = 0; cannot orient branches")
    # toward_globe: the branch whose z moves from the equilibrium toward 0.
    zq = eq.point[2]
    want_sign = -1 if zq > 0 else 1
    sign = 1 if (vz > 0) == (want_sign > 0) else -1
    if branch == BRANCH_AWAY:
        sign = -sign
    elif branch != BRANCH_TOWARD:
        raise ValueError(f"unknown branch {branch!r}")
    v = [sign * c for c in v]
    seed = [eq.point[i] + delta * v[i] for i in range(3)]
    if quadratic:
        w2 = _quadratic_axis_term(field, eq)
        d2 = delta * delta
        seed = [seed[i] + d2 * w2[i] for i in range(3)]
    return tuple(seed)


def _plane_frame(field: PolyField, eq: Equilibrium):
    """Eigenbasis data for the invariant plane: (u, v, basis_inverse, A).

    A is the 2x2 restriction of the Jacobian to span(u, v) in that basis.
    """
    u, v, w = eq.eigen.plane_u, eq.eigen.plane_v, eq.eigen.axis
    basis = [[u[r], v[r], w[r]] for r in range(3)]
    binv = mat_inverse(basis)
    jac = field.jacobian(eq.point)
    ju = [sum(jac[r][c] * u[c] for c in range(3)) for r in range(3)]
    jv = [sum(jac[r][c] * v[c] for c in range(3)) for r in range(3)]
    cu = [sum(binv[r][c] * ju[c] for c in range(3)) for r in range(3)]
    cv = [sum(binv[r][c] * jv[c] for c in range(3)) for r in range(3)]
    amat = [[cu[0], cv[0]], [cu[1], cv[1]]]
    leak = max(abs(cu[2]), abs(cv[2]))
    if leak > mpf(10) ** (-(current_digits() // 2)):
        raise NumericalFailure(
            f"invariant plane basis leaks into the axis (|leak| = {to_decimal(leak, 4)})"
        )
    return u, v, binv, amat


def _quadratic_plane_graph(field: PolyField, eq: Equilibrium, frame):
    """Coefficients (h20, h11, h02) of the quadratic graph eta = h(xi).

    The 2D manifold near the equilibrium is the graph of eta over plane
    coordinates xi = (xi1, xi2) in the eigenbasis.  Matching quadratic
    terms of the invariance equation Dh * (A xi) - lam * h = Q(xi) gives a
    3x3 linear system; its operator spectrum is {2 mu - lam, mu + conj(mu)
    - lam, 2 conj(mu) - lam} whose real parts never vanish in the
    saddle-focus pattern, so the solve is safe.
    """
    u, v, binv, amat = frame
    lam = eq.eigen.lam_real
    p = eq.point
    q_coeffs = []
    row3 = binv[2]
    for quad in ("uu", "uv", "vv"):
        acc = mpf(0)
        for comp in range(3):
            h = field.hessian(p, comp)
            if quad == "uu":
                val = sum(u[i] * h[i][j] * u[j] for i in range(3) for j in range(3)) / 2
            elif quad == "vv":
                val = sum(v[i] * h[i][j] * v[j] for i in range(3) for j in range(3)) / 2
            else:
                val = sum(u[i] * h[i][j] * v[j] for i in range(3) for j in range(3))
            acc += row3[comp] * val
        q_coeffs.append(acc)
    a11, a12 = amat[0]
    a21, a22 = amat[1]
    m = [
        [2 * a11 - lam, a21, mpf(0)],
        [2 * a12, a11 + a22 - lam, 2 * a21],
        [mpf(0), a12, 2 * a22 - lam],
    ]
    return solve(m, q_coeffs)


def _circle_seeds(field: PolyField, eq: Equilibrium, n: int, delta, quadratic: bool):
    frame = _plane_frame(field, eq)
    u, v, _, _ = frame
    hq = _quadratic_plane_graph(field, eq, frame) if quadratic else (mpf(0),) * 3
    w = eq.eigen.axis
    p = eq.point
    two_pi = 2 * gmpy2.const_pi()
    seeds = []
    d2 = delta * delta
    for j in range(n):
        th = two_pi * j / n
        c, s = gmpy2.cos(th), gmpy2.sin(th)
        eta = d2 * (hq[0] * c * c + hq[1] * c * s + hq[2] * s * s)
        seeds.append(
            tuple(
                p[i] + delta * (c * u[i] + s * v[i]) + eta * w[i]
                for i in range(3)
            )
        )
    return seeds


def default_delta(digits: int | None = None):
    """Seed offset 10^(-digits/4): far inside the linear range, far above
    the rounding floor."""
    d = digits if digits is not None else current_digits()
    return mpf(10) ** -(mpf(d) / 4)


# --------------------------------------------------------------------------
# 1D branches


@dataclass(frozen=True)
class BranchCrossing:
    """1D manifold branch flowed to its first z = 0 crossing.

    `trajectory` runs on the internal clock (backward branches store the
    negated field), `crossing.state` is the section point, `drift` the
    crossing displacement observed under delta halving.
    """

    eq_side: str
    branch: str
    forward: bool
    delta: object
    seed: tuple
    trajectory: Trajectory
    crossing: object
    drift: object

    @property
    def section_point(self) -> tuple:
        return self.crossing.state

    def planar_point(self) -> tuple:
        return (self.crossing.state[0], self.crossing.state[1])

    def as_dict(self, digits: int | None = None) -> dict:
        d = digits if digits is not None else current_digits()
        return {
            "eq_side": self.eq_side,
            "branch": self.branch,
            "forward": self.forward,
            "delta": to_decimal(self.delta, d),
            "seed": [to_decimal(c, d) for c in self.seed],
            "section_point": [to_decimal(c, d) for c in self.section_point],
            "crossing_time": to_decimal(self.crossing.t, d),
            "drift": to_decimal(self.drift, d),
        }


def _flow_to_section(field, seed, *, forward, direction, t_budget, tol, eq_points=()):
    spec = EventSpec(surface=("z", 0), direction=direction, occurrence=1)
    return integrate(
        field,
        seed,
        t_budget,
        tol=tol,
        backward=not forward,
        stop_event=spec,
        eq_points=eq_points,
        escape_radius=20,
    )


def manifold_1d(
    sys: ScaledSystem,
    eq: Equilibrium,
    branch: str = BRANCH_TOWARD,
    delta=None,
    *,
    quadratic: bool = True,
    validate: bool = True,
    drift_budget=None,
    t_budget=None,
) -> BranchCrossing:
    """Grow one branch of the 1D manifold to its first z = 0 crossing.

    The branch of the unstable axis (north) integrates forward, the stable
    axis (south) backward.  `validate` reruns at delta/2 and requires the
    crossing to move by less than `drift_budget` (default 1000x the
    integration tolerance).
    """
    digits = max(sys.digits, current_digits())
    with working_precision(digits):
        if delta is None:
            delta = default_delta(digits)
        else:
            delta = mpf(delta)
        tol = mpf(10) ** (-(digits - 6))
        if drift_budget is None:
            drift_budget = tol * 1000
        else:
            drift_budget = mpf(drift_budget)
        forward = eq.unstable_is_axis()
        lam_abs = abs(eq.eigen.lam_real)
        if t_budget is None:
            # escape time ~ log(1/delta)/lam plus O(1) transit to the section
            t_budget = 3 * abs(gmpy2.log(delta)) / lam_abs + 30
        # Internal-clock crossing direction: the integration always runs
        # from the equilibrium toward the section, so north branches
        # descend through z = 0 and south branches ascend, whichever way
        # physical time points.
        zq = eq.point[2]
        direction = ("down" if zq > 0 else "up") if branch == BRANCH_TOWARD else "any"

        def run(d):
            seed = _axis_seed(sys.field, eq, branch, d, quadratic)
            traj = _flow_to_section(
                sys.field,
                seed,
                forward=forward,
                direction=direction,
                t_budget=t_budget,
                tol=tol,
            )
            if traj.status != "event" or traj.event is None:
                raise ConditionFailure(
                    f"{eq.side} {branch} branch ended with status "
                    f"'{traj.status}' before crossing z = 0 (wrong branch, or "
                    f"budget {to_decimal(t_budget, 4)} too small)"
                )
            return seed, traj

        seed, traj = run(delta)
        drift = mpf(0)
        if validate:
            _, traj_half = run(delta / 2)
            drift = norm2(
                [traj.event.state[i] - traj_half.event.state[i] for i in range(3)]
            )
            if drift > drift_budget:
                raise NumericalFailure(
                    f"crossing moved {to_decimal(drift, 4)} under delta "
                    f"halving, budget {to_decimal(drift_budget, 4)}; seeding "
                    "outside the validated linear range"
                )
        return BranchCrossing(
            eq_side=eq.side,
            branch=branch,
            forward=forward,
            delta=delta,
            seed=seed,
            trajectory=traj,
            crossing=traj.event,
            drift=drift,
        )


# --------------------------------------------------------------------------
# 2D section curves


@dataclass(frozen=True)
class SectionCurve:
    """Fourier model of the symplectic radius of a manifold section.

    r(theta) = sum_k c_k e^{i k theta} with c_{-k} = conj(c_k); `coeffs`
    stores (c_0, c_1, ..., c_K).  `which` is "Cu" (south unstable, forward)
    or "Cs" (north stable, backward).  est_error combines the fit residual,
    the Fourier tail, and the delta-halving drift.
    """

    which: str
    epsilon: object
    sigma: object
    coeffs: tuple
    est_error: object
    fit_residual: object
    tail: object
    drift: object
    delta: object
    theta_samples: tuple
    radius_samples: tuple

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def r_at(self, theta):
        th = mpf(theta)
        acc = self.coeffs[0].real if isinstance(self.coeffs[0], gmpy2.mpc) else self.coeffs[0]
        acc = mpf(acc)
        for k in range(1, len(self.coeffs)):
            ck = self.coeffs[k]
            acc += 2 * (ck.real * gmpy2.cos(k * th) - ck.imag * gmpy2.sin(k * th))
        return acc

    @property
    def mean(self):
        c0 = self.coeffs[0]
        return mpf(c0.real if isinstance(c0, gmpy2.mpc) else c0)

    @property
    def first_harmonic(self):
        return self.coeffs[1] if len(self.coeffs) > 1 else gmpy2.mpc(0)

    def min_radius(self, n: int = 256):
        two_pi = 2 * gmpy2.const_pi()
        return min(self.r_at(two_pi * k / n) for k in range(n))

    def as_dict(self, digits: int | None = None) -> dict:
        d = digits if digits is not None else current_digits()
        return {
            "which": self.which,
            "epsilon": to_decimal(self.epsilon, d),
            "sigma": to_decimal(self.sigma, d),
            "order": self.order,
            "coefficients": [
                [to_decimal(mpf(c.real), d), to_decimal(mpf(c.imag), d)]
                if isinstance(c, gmpy2.mpc)
                else [to_decimal(c, d), "0"]
                for c in self.coeffs
            ],
            "est_error": to_decimal(self.est_error, d),
            "fit_residual": to_decimal(self.fit_residual, d),
            "tail": to_decimal(self.tail, d),
            "drift": to_decimal(self.drift, d),
            "delta": to_decimal(self.delta, d),
        }


def _fourier_fit(thetas, values, order: int):
    """Real trigonometric least squares on non-uniform angles.

    Returns complex coefficients (c_0, ..., c_K) with r(theta) =
    c_0 + sum 2 Re(c_k e^{i k theta}).
    """
    m = len(thetas)
    cols = 2 * order + 1
    amat = []
    for th in thetas:
        row = [mpf(1)]
        for k in range(1, order + 1):
            row.append(gmpy2.cos(k * th))
        for k in range(1, order + 1):
            row.append(gmpy2.sin(k * th))
        amat.append(row)
    sol = solve(
        _normal_matrix(amat, cols), _normal_rhs(amat, values, cols)
    )
    c0 = gmpy2.mpc(sol[0], 0)
    coeffs = [c0]
    for k in range(1, order + 1):
        ak, bk = sol[k], sol[order + k]
        coeffs.append(gmpy2.mpc(ak / 2, -bk / 2))
    resid = mpf(0)
    for i in range(m):
        fit = sol[0]
        for k in range(1, order + 1):
            fit += sol[k] * amat[i][k] + sol[order + k] * amat[i][order + k]
        resid = max(resid, abs(values[i] - fit))
    return coeffs, resid


def _normal_matrix(amat, cols):
    n = len(amat)
    out = [[mpf(0)] * cols for _ in range(cols)]
    for r in range(n):
        row = amat[r]
        for i in range(cols):
            ri = row[i]
            if ri == 0:
                continue
            oi = out[i]
            for j in range(i, cols):
                oi[j] += ri * row[j]
    for i in range(cols):
        for j in range(i):
            out[i][j] = out[j][i]
    return out


def _normal_rhs(amat, values, cols):
    out = [mpf(0)] * cols
    for r in range(len(amat)):
        row = amat[r]
        v = values[r]
        for i in range(cols):
            out[i] += row[i] * v
    return out


def _curve_kind(eq: Equilibrium) -> tuple:
    """(which, forward) for the 2D surface attached to this equilibrium."""
    if eq.eigen.rho > 0:
        return CURVE_UNSTABLE, True
    return CURVE_STABLE, False


def _section_samples(sys, eq, seeds, *, forward, direction, t_budget, tol, threads):
    digits = current_digits()

    def job(seed):
        with working_precision(digits):
            traj = _flow_to_section(
                sys.field,
                seed,
                forward=forward,
                direction=direction,
                t_budget=t_budget,
                tol=tol,
            )
            if traj.status != "event" or traj.event is None:
                raise NumericalFailure(
                    f"2D manifold seed {tuple(to_decimal(c, 6) for c in seed)} "
                    f"ended '{traj.status}' without reaching z = 0"
                )
            x, y, _ = traj.event.state
            theta = gmpy2.atan2(y, x)
            return theta, (x * x + y * y) / 2, traj.event.slope

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, seeds))
    else:
        results = [job(s) for s in seeds]
    return results


def manifold_2d_section(
    sys: ScaledSystem,
    eq: Equilibrium,
    theta_grid_size: int = 64,
    delta=None,
    *,
    fourier_order: int | None = None,
    quadratic: bool = True,
    validate: bool = True,
    target_error=None,
    threads: int = 1,
    t_budget=None,
) -> SectionCurve:
    """Flow the local 2D manifold to z = 0 and fit its section curve.

    South/unstable runs forward and produces Cu, north/stable runs backward
    and produces Cs.  Fourier order defaults to the largest K with 4(2K+1)
    <= theta_grid_size, capped at 32, and doubles (within that cap) while
    the coefficient tail still dominates the fit residual.
    """
    digits = max(sys.digits, current_digits())
    with working_precision(digits):
        if theta_grid_size < 12:
            raise ConditionFailure("theta_grid_size must be at least 12")
        delta = default_delta(digits) if delta is None else mpf(delta)
        tol = mpf(10) ** (-(digits - 6))
        which, forward = _curve_kind(eq)
        rho = eq.rho_planar
        if t_budget is None:
            t_budget = 3 * abs(gmpy2.log(delta)) / rho + 30
        # Physical crossings run upward through the globe (dz/dt = a + ...
        # at the equator); on the internal clock backward runs see "down".
        direction = "up" if forward else "down"

        seeds = _circle_seeds(sys.field, eq, theta_grid_size, delta, quadratic)
        samples = _section_samples(
            sys, eq, seeds,
            forward=forward, direction=direction,
            t_budget=t_budget, tol=tol, threads=threads,
        )
        thetas = [s[0] for s in samples]
        radii = [s[1] for s in samples]

        max_order = max(1, min(32, (theta_grid_size // 4 - 1) // 2))
        order = max_order if fourier_order is None else min(fourier_order, max_order)
        coeffs, resid = _fourier_fit(thetas, radii, order)
        while True:
            tail = max(abs(coeffs[-1]), abs(coeffs[-2])) if order >= 2 else abs(coeffs[-1])
            if tail <= max(resid, tol) or order >= max_order:
                break
            order = min(2 * order, max_order)
            coeffs, resid = _fourier_fit(thetas, radii, order)

        drift = mpf(0)
        if validate:
            n_check = max(8, theta_grid_size // 8)
            stride = max(1, theta_grid_size // n_check)
            check_seeds = _circle_seeds(sys.field, eq, theta_grid_size, delta / 2, quadratic)
            check_seeds = check_seeds[::stride]
            check = _section_samples(
                sys, eq, check_seeds,
                forward=forward, direction=direction,
                t_budget=t_budget + 10, tol=tol, threads=threads,
            )
            curve_eval = _make_eval(coeffs)
            for th, rr, _ in check:
                drift = max(drift, abs(rr - curve_eval(th)))

        est_error = resid + tail + drift
        if target_error is not None and est_error > mpf(target_error):
            raise NumericalFailure(
                f"section curve error {to_decimal(est_error, 4)} above target "
                f"{to_decimal(mpf(target_error), 4)}"
            )
        curve = SectionCurve(
            which=which,
            epsilon=mpf(sys.epsilon),
            sigma=mpf(sys.sigma),
            coeffs=tuple(coeffs),
            est_error=est_error,
            fit_residual=resid,
            tail=tail,
            drift=drift,
            delta=delta,
            theta_samples=tuple(thetas),
            radius_samples=tuple(radii),
        )
        if curve.min_radius() <= 0:
            raise NumericalFailure("section curve radius is not strictly positive")
        return curve


def _make_eval(coeffs):
    def ev(theta):
        acc = mpf(coeffs[0].real)
        for k in range(1, len(coeffs)):
            ck = coeffs[k]
            acc += 2 * (ck.real * gmpy2.cos(k * theta) - ck.imag * gmpy2.sin(k * theta))
        return acc

    return ev


# --------------------------------------------------------------------------
# diagnostics used by property tests and the verification pipeline


def graph_deviation(
    sys: ScaledSystem,
    eq: Equilibrium,
    *,
    n_orbits: int = 8,
    delta=None,
    z_window=None,
    samples_per_orbit: int = 160,
) -> dict:
    """Bound the relative graph correction of the 2D manifold over z.

    On the unperturbed globe the symplectic radius over z is r0(z) =
    (a+1)(1-z^2)/(2b).  For each sampled manifold point the normalized
    deviation psi = (r/r0 - 1)/(eps (1-z^2)) is recorded; the returned
    max |psi| is the fitted bound of the graph property.
    """
    digits = max(sys.digits, current_digits())
    with working_precision(digits):
        a, b, eps = mpf(sys.a), mpf(sys.b), mpf(sys.epsilon)
        delta = default_delta(digits) if delta is None else mpf(delta)
        tol = mpf(10) ** (-(digits - 6))
        which, forward = _curve_kind(eq)
        if z_window is None:
            # Cu lives below the section, Cs above it.
            z_window = ("-0.9", "-0.05") if forward else ("0.05", "0.9")
        z_lo, z_hi = sorted((mpf(z_window[0]), mpf(z_window[1])))
        t_budget = 3 * abs(gmpy2.log(delta)) / eq.rho_planar + 30
        direction = "up" if forward else "down"
        seeds = _circle_seeds(sys.field, eq, n_orbits, delta, True)
        worst = mpf(0)
        count = 0
        for seed in seeds:
            traj = _flow_to_section(
                sys.field, seed,
                forward=forward, direction=direction,
                t_budget=t_budget, tol=tol,
            )
            if traj.status != "event":
                raise NumericalFailure("graph-deviation orbit missed the section")
            for _, st in traj.sample(samples_per_orbit):
                x, y, zz = st
                if not (z_lo <= zz <= z_hi):
                    continue
                r = (x * x + y * y) / 2
                r0 = (a + 1) * (1 - zz * zz) / (2 * b)
                psi = (r / r0 - 1) / (eps * (1 - zz * zz))
                worst = max(worst, abs(psi))
                count += 1
        if count == 0:
            raise NumericalFailure("graph-deviation window captured no samples")
        return {"which": which, "max_psi": worst, "samples": count}


def backward_invariance_check(
    sys: ScaledSystem,
    eq: Equilibrium,
    curve: SectionCurve,
    *,
    n_points: int = 4,
    capture_radius="0.02",
    cone_ratio="0.35",
) -> dict:
    """Flow curve points against the manifold direction back to the
    equilibrium and verify they re-enter through the linear cone of the
    invariant plane."""
    digits = max(sys.digits, current_digits())
    with working_precision(digits):
        cap = mpf(capture_radius)
        cone = mpf(cone_ratio)
        tol = mpf(10) ** (-(digits - 6))
        which, forward = _curve_kind(eq)
        two_pi = 2 * gmpy2.const_pi()
        worst_ratio = mpf(0)
        for j in range(n_points):
            th = two_pi * j / n_points
            r = curve.r_at(th)
            rad = gmpy2.sqrt(2 * r)
            p0 = (rad * gmpy2.cos(th), rad * gmpy2.sin(th), mpf(0))
            traj = integrate(
                sys.field,
                p0,
                mpf(1000),
                tol=tol,
                backward=forward,  # reverse of the curve's flow direction
                eq_points=(eq.point,),
                eq_tol=cap,
                escape_radius=20,
            )
            if traj.status != "equilibrium":
                raise NumericalFailure(
                    f"curve point {j} did not return to {eq.side} "
                    f"(status '{traj.status}')"
                )
            end = traj.end_state()
            rel = [end[i] - eq.point[i] for i in range(3)]
            axis = eq.eigen.axis
            axial = abs(sum(rel[i] * axis[i] for i in range(3)))
            planar = gmpy2.sqrt(max(norm2(rel) ** 2 - axial**2, mpf(0)))
            if planar == 0:
                raise NumericalFailure("degenerate re-entry geometry")
            worst_ratio = max(worst_ratio, axial / planar)
        ok = worst_ratio <= cone
        return {"which": which, "max_axial_ratio": worst_ratio, "within_cone": ok}
