"""Variable-order Taylor integration for trivariate polynomial fields.

The integrator computes Taylor coefficients of the solution order by order
through a compiled product chain: every monomial of degree >= 2 is obtained
from a previously built series times one coordinate series, so each monomial
costs one Cauchy-product coefficient per order.  Steps are kept well inside
the convergence radius estimated from the last two coefficient norms, and
every accepted step stores its polynomial, giving dense output that events
and angle tracking evaluate directly.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import gmpy2

from .errors import NumericalFailure
from .precision import current_digits, mpf

Index3 = tuple[int, int, int]
Point3 = tuple

STATUS_COMPLETE = "complete"
STATUS_EVENT = "event"
STATUS_EQUILIBRIUM = "equilibrium"
STATUS_ESCAPE = "escape"

_ZERO_INDEX = (0, 0, 0)
_UNIT_INDICES = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def _fmt(x) -> str:
    return f"{gmpy2.mpfr(x):.6g}"


@dataclass(frozen=True)
class PolyField:
    """Polynomial vector field in three variables with exact coefficients."""

    fx: tuple
    fy: tuple
    fz: tuple

    @staticmethod
    def from_dicts(dx: dict, dy: dict, dz: dict) -> "PolyField":
        def pack(d):
            items = []
            for idx, c in sorted(d.items()):
                c = mpf(c)
                if c != 0:
                    items.append(((int(idx[0]), int(idx[1]), int(idx[2])), c))
            return tuple(items)

        return PolyField(pack(dx), pack(dy), pack(dz))

    @property
    def components(self):
        return (self.fx, self.fy, self.fz)

    def degree(self) -> int:
        deg = 0
        for comp in self.components:
            for idx, _ in comp:
                deg = max(deg, idx[0] + idx[1] + idx[2])
        return deg

    def negated(self) -> "PolyField":
        def neg(comp):
            return tuple((idx, -c) for idx, c in comp)

        return PolyField(neg(self.fx), neg(self.fy), neg(self.fz))

    def eval(self, p: Point3):
        x, y, z = p
        pows = _power_table(p, self.degree())
        out = []
        for comp in self.components:
            acc = mpf(0)
            for (i, j, k), c in comp:
                acc += c * pows[0][i] * pows[1][j] * pows[2][k]
            out.append(acc)
        return tuple(out)

    def jacobian(self, p: Point3):
        pows = _power_table(p, max(self.degree() - 1, 0) + 1)
        rows = []
        for comp in self.components:
            row = [mpf(0), mpf(0), mpf(0)]
            for (i, j, k), c in comp:
                e = (i, j, k)
                for v in range(3):
                    if e[v] == 0:
                        continue
                    d = list(e)
                    d[v] -= 1
                    row[v] += c * e[v] * pows[0][d[0]] * pows[1][d[1]] * pows[2][d[2]]
            rows.append(tuple(row))
        return tuple(rows)

    def hessian(self, p: Point3, component: int):
        """Symmetric 3x3 matrix of second partials of one component."""
        comp = self.components[component]
        pows = _power_table(p, self.degree())
        h = [[mpf(0)] * 3 for _ in range(3)]
        for (i, j, k), c in comp:
            e = (i, j, k)
            for u in range(3):
                for v in range(u, 3):
                    d = list(e)
                    d[u] -= 1
                    factor = e[u]
                    if d[v] <= -1:
                        continue
                    factor *= d[v]
                    d[v] -= 1
                    if factor == 0 or min(d) < 0:
                        continue
                    term = c * factor * pows[0][d[0]] * pows[1][d[1]] * pows[2][d[2]]
                    h[u][v] += term
        for u in range(3):
            for v in range(u):
                h[u][v] = h[v][u]
        return tuple(tuple(row) for row in h)

    def divergence_at(self, p: Point3):
        jac = self.jacobian(p)
        return jac[0][0] + jac[1][1] + jac[2][2]


def _power_table(p: Point3, deg: int):
    tables = []
    for v in p:
        row = [mpf(1)]
        vv = gmpy2.mpfr(v)
        for _ in range(max(deg, 1)):
            row.append(row[-1] * vv)
        tables.append(row)
    return tables


class _RecurrencePlan:
    """Product chain turning field monomials into per-order recurrences."""

    __slots__ = ("chain", "linear", "const", "high", "degree")

    def __init__(self, fld: PolyField):
        needed = set()
        for comp in fld.components:
            for idx, _ in comp:
                if idx[0] + idx[1] + idx[2] >= 2:
                    needed.add(idx)
        chain = []
        seen = set(_UNIT_INDICES)
        stack = sorted(needed, key=lambda e: (e[0] + e[1] + e[2], e))
        for idx in stack:
            self._extend_chain(idx, seen, chain)
        self.chain = tuple(chain)
        self.degree = fld.degree()

        self.const = []
        self.linear = []
        self.high = []
        for comp in fld.components:
            cst = mpf(0)
            lin = [mpf(0), mpf(0), mpf(0)]
            hi = []
            for idx, c in comp:
                d = idx[0] + idx[1] + idx[2]
                if d == 0:
                    cst += c
                elif d == 1:
                    lin[idx.index(1)] += c
                else:
                    hi.append((idx, c))
            self.const.append(cst)
            self.linear.append(tuple(lin))
            self.high.append(tuple(hi))

    @staticmethod
    def _split(idx: Index3) -> tuple[Index3, int]:
        for v in range(3):
            if idx[v] > 0:
                prev = list(idx)
                prev[v] -= 1
                return tuple(prev), v
        raise ValueError("degree-0 index in product chain")

    def _extend_chain(self, idx: Index3, seen: set, chain: list):
        if idx in seen:
            return
        prev, var = self._split(idx)
        if prev not in seen and prev[0] + prev[1] + prev[2] >= 2:
            self._extend_chain(prev, seen, chain)
        chain.append((idx, prev, var))
        seen.add(idx)


def _conv(u: list, v: list, n: int):
    if n == 0:
        return u[0] * v[0]
    return sum(map(gmpy2.mul, u[: n + 1], v[n::-1]), mpf(0))


def _taylor_coeffs(plan: _RecurrencePlan, state: Point3, order: int):
    series = [[gmpy2.mpfr(state[0])], [gmpy2.mpfr(state[1])], [gmpy2.mpfr(state[2])]]
    prods: dict[Index3, list] = {
        _UNIT_INDICES[0]: series[0],
        _UNIT_INDICES[1]: series[1],
        _UNIT_INDICES[2]: series[2],
    }
    for idx, _, _ in plan.chain:
        prods[idx] = []
    chain = plan.chain
    zero = mpf(0)
    for n in range(order):
        for idx, prev, var in chain:
            # degree-1 prev entries alias the state series directly
            u = prods[prev] if prev in prods else series[prev.index(1)]
            prods[idx].append(_conv(u, series[var], n))
        inv = gmpy2.mpfr(1) / (n + 1)
        for c in range(3):
            val = plan.const[c] if n == 0 else zero
            lin = plan.linear[c]
            for v in range(3):
                if lin[v]:
                    val += lin[v] * series[v][n]
            for idx, coeff in plan.high[c]:
                val += coeff * prods[idx][n]
            series[c].append(val * inv)
    return series


def _step_size(series, order: int, tol, scale, h_max):
    best = None
    for k in (order - 1, order):
        m = max(abs(series[c][k]) for c in range(3))
        if m == 0:
            continue
        r = gmpy2.exp(gmpy2.log(tol * scale / m) / k)
        best = r if best is None else min(best, r)
    if best is None:
        best = mpf(h_max)
    h = mpf("0.85") * best
    if h > h_max:
        h = mpf(h_max)
    return h


def _horner(coeffs: list, ds):
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * ds + c
    return acc


@dataclass(frozen=True)
class TaylorStep:
    t0: object
    h: object
    coeffs: tuple

    def state_at(self, dt) -> Point3:
        return tuple(_horner(self.coeffs[c], dt) for c in range(3))


@dataclass(frozen=True)
class EventSpec:
    """Zero crossing of a scalar surface function along the computed orbit.

    surface      callable state -> value, or ("z", value) for the fast plane
                 form, or ("r2", value) for x^2 + y^2 = value.
    direction    "up" (value increasing along the orbit), "down", or "any".
    occurrence   1-based index of the crossing to report.
    dwell        crossings at orbit time below this are ignored, so an orbit
                 launched on the surface does not trigger immediately.
    """

    surface: object
    direction: str = "any"
    occurrence: int = 1
    dwell: float = 1e-6

    def fn(self) -> Callable:
        s = self.surface
        if callable(s):
            return s
        kind, value = s
        val = mpf(value)
        if kind == "z":
            return lambda p: p[2] - val
        if kind == "r2":
            return lambda p: p[0] * p[0] + p[1] * p[1] - val
        raise ValueError(f"unknown surface spec {s!r}")


@dataclass(frozen=True)
class CrossingRecord:
    t: object
    state: Point3
    slope: object
    occurrence: int


@dataclass
class Trajectory:
    """Dense-output orbit on an internal clock t in [0, t_end].

    For backward=True the field was negated, so physical time is -t.
    """

    fld: PolyField
    backward: bool
    tol: object
    steps: list = field(default_factory=list)
    nodes: list = field(default_factory=list)
    status: str = STATUS_COMPLETE
    event: CrossingRecord | None = None

    @property
    def t_end(self):
        return self.nodes[-1]

    def end_state(self) -> Point3:
        last = self.steps[-1]
        return last.state_at(self.nodes[-1] - last.t0)

    def state(self, t) -> Point3:
        t = mpf(t)
        if not self.steps:
            raise NumericalFailure("empty trajectory")
        if t < 0 or t > self.nodes[-1] * (1 + mpf("1e-12")):
            raise NumericalFailure(
                f"time {_fmt(t)} outside trajectory span [0, {_fmt(self.nodes[-1])}]"
            )
        i = bisect.bisect_right(self.nodes, t) - 1
        i = min(max(i, 0), len(self.steps) - 1)
        st = self.steps[i]
        return st.state_at(t - st.t0)

    def sample(self, n: int) -> list:
        tend = self.nodes[-1]
        return [(tend * k / n, self.state(tend * k / n)) for k in range(n + 1)]


def integrate(
    fld: PolyField,
    x0: Point3,
    t_final,
    *,
    tol=None,
    order: int | None = None,
    backward: bool = False,
    stop_event: EventSpec | None = None,
    eq_points: Sequence[Point3] = (),
    eq_tol=None,
    escape_radius=None,
    max_steps: int = 500_000,
    h_max=None,
) -> Trajectory:
    """Integrate the field from x0 over internal time [0, t_final]."""

    digits = current_digits()
    if tol is None:
        tol = mpf(10) ** (-(digits - 6))
    else:
        tol = mpf(tol)
    if order is None:
        order = max(14, int(1.2 * digits) + 6)
    if h_max is None:
        h_max = mpf(1)
    else:
        h_max = mpf(h_max)
    if eq_tol is None:
        eq_tol = mpf("1e-10")
    else:
        eq_tol = mpf(eq_tol)
    if escape_radius is None:
        escape_radius = mpf(20)
    else:
        escape_radius = mpf(escape_radius)

    work = fld.negated() if backward else fld
    plan = _RecurrencePlan(work)
    t_final = mpf(t_final)
    traj = Trajectory(fld=fld, backward=backward, tol=tol)
    traj.nodes.append(mpf(0))

    state = tuple(gmpy2.mpfr(v) for v in x0)
    t = mpf(0)
    hits = 0
    gfn = stop_event.fn() if stop_event is not None else None
    h_floor = tol ** 2  # far below any meaningful step; collapse means failure

    for _ in range(max_steps):
        if t_final - t <= h_floor:
            traj.status = STATUS_COMPLETE
            break
        scale = max(mpf(1), max(abs(v) for v in state))
        series = _taylor_coeffs(plan, state, order)
        h = _step_size(series, order, tol, scale, h_max)
        if h <= h_floor:
            raise NumericalFailure(
                f"step size collapsed to {_fmt(h)} at t={_fmt(t)}"
            )
        if t + h > t_final:
            h = t_final - t
        step = TaylorStep(t0=t, h=h, coeffs=tuple(list(s) for s in series))
        traj.steps.append(step)
        t = t + h
        traj.nodes.append(t)
        state = step.state_at(h)

        if gfn is not None:
            rec = _scan_step(traj, step, h, gfn, stop_event, hits)
            if rec is not None:
                if rec.occurrence > hits:
                    hits = rec.occurrence
                if hits >= stop_event.occurrence:
                    traj.status = STATUS_EVENT
                    traj.event = rec
                    break
        if eq_points:
            for q in eq_points:
                if max(abs(state[i] - q[i]) for i in range(3)) <= eq_tol:
                    traj.status = STATUS_EQUILIBRIUM
                    break
            if traj.status == STATUS_EQUILIBRIUM:
                break
        if max(abs(v) for v in state) > escape_radius:
            traj.status = STATUS_ESCAPE
            break
    else:
        raise NumericalFailure(
            f"step budget {max_steps} exhausted at t={_fmt(t)} of {_fmt(t_final)}"
        )
    return traj


def _scan_step(traj, step, h, gfn, spec, already: int):
    """Look for the next matching crossing inside one accepted step."""
    n_sub = 12
    vals = []
    for k in range(n_sub + 1):
        dt = h * k / n_sub
        vals.append((dt, gfn(step.state_at(dt))))
    count = already
    for k in range(n_sub):
        (dta, ga), (dtb, gb) = vals[k], vals[k + 1]
        if ga * gb > 0:
            continue
        if gb == 0:
            # zero at the right endpoint is owned by the next subinterval
            continue
        rising = gb > ga
        if spec.direction == "up" and not rising:
            continue
        if spec.direction == "down" and rising:
            continue
        if ga == 0:
            if step.t0 + dta <= mpf(spec.dwell):
                continue
            t_star = dta
        else:
            t_star = _refine(step, gfn, dta, dtb, ga, gb, traj.tol)
        t_abs = step.t0 + t_star
        if t_abs <= mpf(spec.dwell):
            continue
        count += 1
        if count >= spec.occurrence:
            st = step.state_at(t_star)
            slope = _surface_slope(traj, step, gfn, t_star)
            return CrossingRecord(t=t_abs, state=st, slope=slope, occurrence=count)
    if count != already:
        return CrossingRecord(
            t=step.t0 + h, state=step.state_at(h), slope=mpf(0), occurrence=count
        )
    return None


def _refine(step, gfn, ta, tb, ga, gb, tol):
    """Bisection then secant polish of a bracketed surface crossing."""
    t_tol = tol * mpf("1e-3") * max(mpf(1), abs(step.t0) + abs(tb))
    for _ in range(64):
        tm = (ta + tb) / 2
        gm = gfn(step.state_at(tm))
        if gm == 0:
            return tm
        if (ga < 0) == (gm < 0):
            ta, ga = tm, gm
        else:
            tb, gb = tm, gm
        if tb - ta <= t_tol:
            return (ta + tb) / 2
    # secant polish within the bracket
    x0, f0, x1, f1 = ta, ga, tb, gb
    for _ in range(80):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if x2 < ta or x2 > tb:
            x2 = (ta + tb) / 2
        f2 = gfn(step.state_at(x2))
        x0, f0, x1, f1 = x1, f1, x2, f2
        if abs(x1 - x0) <= t_tol:
            break
    return x1


def _surface_slope(traj, step, gfn, t_star):
    dh = step.h * mpf("1e-8")
    lo = max(t_star - dh, mpf(0))
    hi = min(t_star + dh, step.h)
    if hi <= lo:
        return mpf(0)
    return (gfn(step.state_at(hi)) - gfn(step.state_at(lo))) / (hi - lo)


def find_crossing(
    traj: Trajectory, spec: EventSpec
) -> CrossingRecord | None:
    """Locate the requested crossing in a stored trajectory."""
    gfn = spec.fn()
    count = 0
    for step in traj.steps:
        rec = _scan_step(traj, step, step.h, gfn, spec, count)
        if rec is None:
            continue
        count = rec.occurrence
        if count >= spec.occurrence and rec.slope != 0:
            return rec
        # occurrence counter advanced but the target crossing is later
        if count >= spec.occurrence:
            return rec
    return None


@dataclass(frozen=True)
class AngleTrack:
    """Unwrapped planar angle statistics along an orbit."""

    theta_start: object
    theta_end: object
    total_change: object
    min_radius: object
    samples: int


def track_angle(
    traj: Trajectory, *, t_stop=None, radius_floor="1e-30", transform=None
) -> AngleTrack:
    """Unwrap atan2(y, x) along the orbit by adaptive subsampling.

    `transform`, when given, maps each sampled state to the coordinates in
    which the angle is meant (e.g. a frame whose z-axis is an invariant
    manifold); it must be cheap, it runs on every subsample.
    """
    floor = mpf(radius_floor)
    total = mpf(0)
    theta0 = None
    prev = None
    min_r = None
    n_used = 0
    t_stop = traj.t_end if t_stop is None else mpf(t_stop)
    for step in traj.steps:
        if step.t0 >= t_stop:
            break
        h_eff = min(step.h, t_stop - step.t0)
        n_sub = 8
        while True:
            ok = True
            seg_total = mpf(0)
            seg_prev = prev
            seg_min = min_r
            thetas = []
            for k in range(0, n_sub + 1):
                dt = h_eff * k / n_sub
                pt = step.state_at(dt)
                if transform is not None:
                    pt = transform(pt)
                x, y, _ = pt
                r = gmpy2.sqrt(x * x + y * y)
                if seg_min is None or r < seg_min:
                    seg_min = r
                if r < floor:
                    raise NumericalFailure(
                        f"orbit radius {_fmt(r)} below angle-tracking floor"
                    )
                th = gmpy2.atan2(y, x)
                thetas.append(th)
                if k == 0 and seg_prev is None:
                    seg_prev = th
                    continue
                ref = seg_prev if k == 0 else thetas[k - 1]
                pi = gmpy2.const_pi()
                d = th - ref
                while d > pi:
                    d -= 2 * pi
                while d < -pi:
                    d += 2 * pi
                if abs(d) > mpf("1.2"):
                    ok = False
                    break
                if k > 0 or seg_prev is not None:
                    seg_total += d
            if ok or n_sub >= 4096:
                if not ok:
                    raise NumericalFailure(
                        "angle tracking could not resolve rotation rate"
                    )
                total += seg_total
                prev = thetas[-1]
                min_r = seg_min
                n_used += n_sub
                if theta0 is None:
                    theta0 = thetas[0]
                break
            n_sub *= 2
    if theta0 is None:
        raise NumericalFailure("angle tracking on empty trajectory")
    return AngleTrack(
        theta_start=theta0,
        theta_end=prev,
        total_change=total,
        min_radius=min_r,
        samples=n_used,
    )
