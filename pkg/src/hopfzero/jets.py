"""Truncated multivariate jets for analytic vector fields near a Hopf-zero point.

A jet is a polynomial in the five symbols (x, y, z, mu, nu) truncated at a
total-degree cap: the three state variables followed by the two unfolding
parameters.  Multi-indices are exponent 5-tuples in that fixed order.
Coefficients are gmpy2 scalars at the active working precision (mpfr, or mpc
for internal complexified work); arithmetic never stores exact zeros.

An UnfoldingJet packages the three components of a parameterized vector field
  x' = px(x, y, z, mu, nu),  y' = py(...),  z' = pz(...)
together with the degree cap and a mode flag.  Volume-preserving mode demands
zero divergence through the cap and no nu-dependence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import gmpy2
from gmpy2 import mpfr

from .errors import ConditionFailure, JetParseError, NumericalFailure
from .precision import current_digits, mpf, structural_tol, to_decimal

MultiIndex = tuple[int, int, int, int, int]

NVARS = 5
VAR_NAMES = ("x", "y", "z", "mu", "nu")
COMPONENT_NAMES = ("x", "y", "z")
ZERO_INDEX: MultiIndex = (0, 0, 0, 0, 0)

DEFAULT_CAP = 6

MODE_GENERAL = "general"
MODE_VOLUME_PRESERVING = "volume_preserving"
_MODES = (MODE_GENERAL, MODE_VOLUME_PRESERVING)


def index_degree(idx: MultiIndex) -> int:
    return idx[0] + idx[1] + idx[2] + idx[3] + idx[4]


def _is_zero(c) -> bool:
    if isinstance(c, gmpy2.mpc):
        return c.real == 0 and c.imag == 0
    return c == 0


class MultiJet:
    """Sparse truncated polynomial in (x, y, z, mu, nu).

    Treated as immutable: every operation returns a new jet.  Terms map
    multi-indices to nonzero coefficients, all of total degree <= cap.
    """

    __slots__ = ("terms", "cap")

    def __init__(self, terms: Mapping[MultiIndex, object], cap: int, *, _trusted: bool = False):
        if cap < 0:
            raise ValueError("degree cap must be nonnegative")
        if _trusted:
            self.terms = dict(terms)
        else:
            clean: dict[MultiIndex, object] = {}
            for idx, c in terms.items():
                idx = tuple(int(e) for e in idx)  # type: ignore[assignment]
                if len(idx) != NVARS or any(e < 0 for e in idx):
                    raise ValueError(f"bad multi-index {idx}")
                if index_degree(idx) > cap:
                    continue
                if not isinstance(c, (mpfr, gmpy2.mpc)):
                    c = mpf(c)
                if not _is_zero(c):
                    clean[idx] = c
            self.terms = clean
        self.cap = cap

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(cap: int) -> "MultiJet":
        return MultiJet({}, cap, _trusted=True)

    @staticmethod
    def constant(c, cap: int) -> "MultiJet":
        return MultiJet({ZERO_INDEX: c}, cap)

    @staticmethod
    def variable(i: int, cap: int) -> "MultiJet":
        if not 0 <= i < NVARS:
            raise ValueError(f"variable index {i} out of range")
        idx = tuple(1 if j == i else 0 for j in range(NVARS))
        return MultiJet({idx: mpfr(1)}, cap)

    # -- inspection --------------------------------------------------------

    def coeff(self, idx: MultiIndex):
        return self.terms.get(tuple(idx), mpfr(0))

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((index_degree(i) for i in self.terms), default=0)

    def max_abs(self) -> mpfr:
        m = mpfr(0)
        for c in self.terms.values():
            a = abs(c)
            if a > m:
                m = mpfr(a) if not isinstance(a, mpfr) else a
        return m

    def graded_part(self, deg: int) -> "MultiJet":
        return MultiJet(
            {i: c for i, c in self.terms.items() if index_degree(i) == deg},
            self.cap,
            _trusted=True,
        )

    def truncate(self, cap: int) -> "MultiJet":
        return MultiJet(
            {i: c for i, c in self.terms.items() if index_degree(i) <= cap}, cap, _trusted=True
        )

    def depends_on(self, var: int) -> bool:
        return any(idx[var] > 0 for idx in self.terms)

    # -- ring operations ---------------------------------------------------

    def _require_same_cap(self, other: "MultiJet") -> None:
        if self.cap != other.cap:
            raise ValueError(f"degree caps differ: {self.cap} vs {other.cap}")

    def __add__(self, other: "MultiJet") -> "MultiJet":
        self._require_same_cap(other)
        out = dict(self.terms)
        for idx, c in other.terms.items():
            s = out.get(idx)
            if s is None:
                out[idx] = c
            else:
                s = s + c
                if _is_zero(s):
                    del out[idx]
                else:
                    out[idx] = s
        return MultiJet(out, self.cap, _trusted=True)

    def __sub__(self, other: "MultiJet") -> "MultiJet":
        return self + (-other)

    def __neg__(self) -> "MultiJet":
        return MultiJet({i: -c for i, c in self.terms.items()}, self.cap, _trusted=True)

    def scale(self, s) -> "MultiJet":
        if not isinstance(s, (mpfr, gmpy2.mpc)):
            s = mpf(s)
        if _is_zero(s):
            return MultiJet.zero(self.cap)
        return MultiJet({i: c * s for i, c in self.terms.items()}, self.cap, _trusted=True)

    def __mul__(self, other: "MultiJet") -> "MultiJet":
        self._require_same_cap(other)
        cap = self.cap
        # Cauchy product truncated at the cap; bucketing by total degree
        # prunes inadmissible pairs wholesale, which matters for dense jets.
        if len(other.terms) < len(self.terms):
            self, other = other, self
        buckets: dict[int, list] = {}
        for ib, cb in other.terms.items():
            buckets.setdefault(index_degree(ib), []).append((ib, cb))
        out: dict[MultiIndex, object] = {}
        get = out.get
        for ia, ca in self.terms.items():
            da = index_degree(ia)
            a0, a1, a2, a3, a4 = ia
            for db, items in buckets.items():
                if da + db > cap:
                    continue
                for ib, cb in items:
                    idx = (a0 + ib[0], a1 + ib[1], a2 + ib[2], a3 + ib[3], a4 + ib[4])
                    prod = ca * cb
                    s = get(idx)
                    out[idx] = prod if s is None else s + prod
        return MultiJet({i: c for i, c in out.items() if not _is_zero(c)}, cap, _trusted=True)

    def pow(self, n: int) -> "MultiJet":
        if n < 0:
            raise ValueError("negative power on a jet")
        result = MultiJet.constant(1, self.cap)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    # -- calculus ----------------------------------------------------------

    def partial(self, var: int) -> "MultiJet":
        out: dict[MultiIndex, object] = {}
        for idx, c in self.terms.items():
            e = idx[var]
            if e == 0:
                continue
            nidx = list(idx)
            nidx[var] = e - 1
            out[tuple(nidx)] = c * e
        return MultiJet(out, self.cap, _trusted=True)

    def evaluate(self, point: Sequence) -> object:
        pt = [p if isinstance(p, (mpfr, gmpy2.mpc)) else mpf(p) for p in point]
        if len(pt) != NVARS:
            raise ValueError(f"need {NVARS} coordinates, got {len(pt)}")
        total = mpfr(0)
        for idx, c in self.terms.items():
            term = c
            for v, e in enumerate(idx):
                for _ in range(e):
                    term = term * pt[v]
            total = total + term
        return total

    def substitute(self, args: Sequence["MultiJet"]) -> "MultiJet":
        """Exact polynomial composition, truncated at the cap of `args`."""
        if len(args) != NVARS:
            raise ValueError(f"need {NVARS} substitution jets")
        cap = args[0].cap
        for g in args:
            if g.cap != cap:
                raise ValueError("substitution jets must share one cap")
        # Monomial images are memoized by multi-index so terms sharing a
        # prefix reuse partial products; each image costs one jet multiply.
        memo: dict[MultiIndex, MultiJet] = {ZERO_INDEX: MultiJet.constant(1, cap)}

        def image(idx: MultiIndex) -> MultiJet:
            got = memo.get(idx)
            if got is not None:
                return got
            v = max(i for i in range(NVARS) if idx[i] > 0)
            prev = list(idx)
            prev[v] -= 1
            p = image(tuple(prev)) * args[v]
            memo[idx] = p
            return p

        out: dict[MultiIndex, object] = {}
        get = out.get
        for idx, c in self.terms.items():
            for midx, mc in image(idx).terms.items():
                prod = c * mc
                s = get(midx)
                out[midx] = prod if s is None else s + prod
        return MultiJet({i: v for i, v in out.items() if not _is_zero(v)}, cap, _trusted=True)

    # -- comparison --------------------------------------------------------

    def isclose(self, other: "MultiJet", tol=None) -> bool:
        return bool(jet_distance(self, other) <= (tol if tol is not None else structural_tol()))

    def map_coeffs(self, fn: Callable) -> "MultiJet":
        return MultiJet({i: fn(c) for i, c in self.terms.items()}, self.cap)

    def __repr__(self) -> str:  # debug aid only
        items = sorted(self.terms.items(), key=lambda kv: (index_degree(kv[0]), kv[0]))
        body = " + ".join(
            f"{to_decimal(c) if isinstance(c, mpfr) else c}*{_monomial_name(i)}" for i, c in items
        )
        return f"MultiJet(cap={self.cap}: {body or '0'})"


def _monomial_name(idx: MultiIndex) -> str:
    parts = []
    for name, e in zip(VAR_NAMES, idx):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts) if parts else "1"


def jet_distance(a: MultiJet, b: MultiJet) -> mpfr:
    """Max absolute coefficient difference, over the union of supports."""
    d = mpfr(0)
    for idx in set(a.terms) | set(b.terms):
        diff = abs(a.coeff(idx) - b.coeff(idx))
        if diff > d:
            d = mpfr(diff) if not isinstance(diff, mpfr) else diff
    return d


def jet_add(a: MultiJet, b: MultiJet) -> MultiJet:
    return a + b


def jet_mul(a: MultiJet, b: MultiJet) -> MultiJet:
    return a * b


def jet_inverse_scalar(u: MultiJet) -> MultiJet:
    """Multiplicative inverse of a scalar jet with nonzero constant term."""
    c0 = u.coeff(ZERO_INDEX)
    if _is_zero(c0):
        raise NumericalFailure("cannot invert a jet with zero constant term")
    w = u.scale(1 / c0) - MultiJet.constant(1, u.cap)  # w = u/c0 - 1, order >= 1
    inv = MultiJet.constant(1, u.cap)
    powk = MultiJet.constant(1, u.cap)
    for _ in range(u.cap):
        powk = powk * (-w)
        if powk.is_zero():
            break
        inv = inv + powk
    return inv.scale(1 / c0)


# ---------------------------------------------------------------------------
# Vector fields


@dataclass(frozen=True)
class UnfoldingJet:
    """Three-component parameterized vector field as truncated jets."""

    px: MultiJet
    py: MultiJet
    pz: MultiJet
    cap: int = DEFAULT_CAP
    mode: str = MODE_GENERAL
    remainder: Callable | None = None

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        for comp in (self.px, self.py, self.pz):
            if comp.cap != self.cap:
                raise ValueError("component caps must equal the field cap")
        if self.mode == MODE_VOLUME_PRESERVING:
            for name, comp in zip(COMPONENT_NAMES, self.components()):
                if comp.depends_on(4):
                    raise ConditionFailure(
                        f"volume-preserving unfolding must not depend on nu ({name}-component does)"
                    )
            div = jet_divergence(self)
            if div.max_abs() > structural_tol() * max(mpfr(1), self._coeff_scale()):
                raise ConditionFailure(
                    "volume-preserving mode requires zero divergence through the cap; "
                    f"max residual {to_decimal(div.max_abs())}"
                )
        if self.remainder is not None:
            _validate_remainder(self)

    def _coeff_scale(self) -> mpfr:
        return max(self.px.max_abs(), self.py.max_abs(), self.pz.max_abs())

    def components(self) -> tuple[MultiJet, MultiJet, MultiJet]:
        return (self.px, self.py, self.pz)

    def evaluate(self, point: Sequence) -> tuple:
        return tuple(c.evaluate(point) for c in self.components())

    def map(self, fn: Callable[[MultiJet], MultiJet], mode: str | None = None) -> "UnfoldingJet":
        return UnfoldingJet(
            px=fn(self.px),
            py=fn(self.py),
            pz=fn(self.pz),
            cap=self.cap,
            mode=mode if mode is not None else self.mode,
        )

    def isclose(self, other: "UnfoldingJet", tol=None) -> bool:
        return all(a.isclose(b, tol) for a, b in zip(self.components(), other.components()))


def _validate_remainder(uj: UnfoldingJet) -> None:
    """Finite-difference sanity check of an analytic-remainder callback.

    The callback must represent terms beyond the cap: it has to vanish at the
    origin and decay at least like radius^(cap) along probe rays of radius
    1e-3.  This is a smell test, not a proof.
    """
    rem = uj.remainder
    at0 = rem(0.0, 0.0, 0.0, 0.0, 0.0)
    if max(abs(float(v)) for v in at0) > 1e-18:
        raise ConditionFailure("analytic remainder must vanish at the origin")
    r = 1e-3
    probes = [
        (r, 0.0, 0.0, 0.0, 0.0),
        (0.0, r, 0.0, 0.0, 0.0),
        (0.0, 0.0, r, 0.0, 0.0),
        (r * 0.5, -r * 0.5, r * 0.5, r * 0.5, -r * 0.5),
    ]
    bound = r ** uj.cap
    for p in probes:
        vals = rem(*p)
        if max(abs(float(v)) for v in vals) > bound:
            raise ConditionFailure(
                "analytic remainder exceeds the order bound at radius 1e-3; "
                "it must contain only terms beyond the degree cap"
            )


def jet_divergence(uj: UnfoldingJet) -> MultiJet:
    """State-space divergence of the field, as a jet."""
    return uj.px.partial(0) + uj.py.partial(1) + uj.pz.partial(2)


# ---------------------------------------------------------------------------
# Variable changes and pushforward


@dataclass(frozen=True)
class JetMap:
    """Polynomial change of variables and parameters.

    `state` expresses the OLD state coordinates as jets in the NEW
    (x, y, z, mu, nu); `params` expresses the OLD parameters as jets in the
    NEW parameters only.  All maps fix the origin.
    """

    state: tuple[MultiJet, MultiJet, MultiJet]
    params: tuple[MultiJet, MultiJet]
    cap: int

    def __post_init__(self):
        for m in (*self.state, *self.params):
            if m.cap != self.cap:
                raise ValueError("map caps must agree")
            if not _is_zero(m.coeff(ZERO_INDEX)):
                raise ValueError("variable changes must fix the origin")
        for m in self.params:
            if any(idx[0] or idx[1] or idx[2] for idx in m.terms):
                raise ValueError("parameter maps must not depend on state variables")

    @staticmethod
    def identity(cap: int) -> "JetMap":
        return JetMap(
            state=tuple(MultiJet.variable(i, cap) for i in range(3)),
            params=(MultiJet.variable(3, cap), MultiJet.variable(4, cap)),
            cap=cap,
        )

    def full_tuple(self) -> tuple[MultiJet, ...]:
        return (*self.state, *self.params)

    def linear_state_matrix(self) -> list[list[mpfr]]:
        units = [
            (1, 0, 0, 0, 0),
            (0, 1, 0, 0, 0),
            (0, 0, 1, 0, 0),
        ]
        return [[mpfr(self.state[i].coeff(u)) for u in units] for i in range(3)]

    def apply_point(self, point: Sequence) -> tuple:
        """Map a NEW-coordinates point to OLD coordinates."""
        return tuple(m.evaluate(point) for m in self.full_tuple())

    def compose(self, inner: "JetMap") -> "JetMap":
        """Map realizing: old = self(mid), mid = inner(new)  ->  old(new)."""
        args = inner.full_tuple()
        return JetMap(
            state=tuple(m.substitute(args) for m in self.state),
            params=tuple(m.substitute(args) for m in self.params),
            cap=self.cap,
        )

    def inverse(self) -> "JetMap":
        """Truncated inverse map, by fixed-point iteration on the nonlinear part."""
        cap = self.cap
        maps = self.full_tuple()
        # 5x5 linear part; block triangular since params do not see state.
        units = [tuple(1 if j == i else 0 for j in range(NVARS)) for i in range(NVARS)]
        lin = [[mpfr(maps[i].coeff(units[j])) for j in range(NVARS)] for i in range(NVARS)]
        from .linalg import mat_inverse

        try:
            lin_inv = mat_inverse(lin)
        except NumericalFailure as exc:
            raise NumericalFailure(f"jet map has singular linear part: {exc}") from exc
        ident = [MultiJet.variable(i, cap) for i in range(NVARS)]
        nonlinear = [maps[i] - _linear_jet(lin[i], cap) for i in range(NVARS)]
        # psi_0 = L^-1 xi ; psi_{k+1} = L^-1 (xi - N(psi_k))
        psi = [_linear_jet(lin_inv[i], cap) for i in range(NVARS)]
        for _ in range(cap):
            n_at = [n.substitute(psi) for n in nonlinear]
            rhs = [ident[i] - n_at[i] for i in range(NVARS)]
            psi = [
                _linear_combination(lin_inv[i], rhs) for i in range(NVARS)
            ]
        return JetMap(state=tuple(psi[:3]), params=tuple(psi[3:]), cap=cap)


def _linear_jet(row: Sequence, cap: int) -> MultiJet:
    terms = {}
    for v, c in enumerate(row):
        if not _is_zero(c):
            idx = tuple(1 if j == v else 0 for j in range(NVARS))
            terms[idx] = c
    return MultiJet(terms, cap)


def _linear_combination(row: Sequence, jets: Sequence[MultiJet]) -> MultiJet:
    acc = MultiJet.zero(jets[0].cap)
    for c, j in zip(row, jets):
        if not _is_zero(c):
            acc = acc + j.scale(c)
    return acc


def jet_compose(field: UnfoldingJet, change: JetMap) -> UnfoldingJet:
    """Pushforward of `field` under the change of variables `change`.

    With old = phi(new), the new field is (D_state phi)^-1 (F o phi); the
    parameter map enters through substitution only.  Errors if the state
    linear part of phi is singular.
    """
    if change.cap != field.cap:
        raise ValueError("change cap must match field cap")
    cap = field.cap
    args = change.full_tuple()
    composed = [c.substitute(args) for c in field.components()]
    jac = [[change.state[i].partial(j) for j in range(3)] for i in range(3)]
    jac_inv = _invert_jet_matrix(jac, cap)
    new_components = []
    for i in range(3):
        acc = MultiJet.zero(cap)
        for j in range(3):
            acc = acc + jac_inv[i][j] * composed[j]
        new_components.append(acc)
    return UnfoldingJet(
        px=new_components[0],
        py=new_components[1],
        pz=new_components[2],
        cap=cap,
        mode=field.mode,
    )


def _invert_jet_matrix(jac: list[list[MultiJet]], cap: int) -> list[list[MultiJet]]:
    from .linalg import mat_inverse

    a0 = [[mpfr(jac[i][j].coeff(ZERO_INDEX)) for j in range(3)] for i in range(3)]
    try:
        a0_inv = mat_inverse(a0)
    except NumericalFailure as exc:
        raise NumericalFailure(
            f"variable change has singular state linear part: {exc}"
        ) from exc
    # J = A (I + A^-1 N) with N of order >= 1; invert the series.
    n = [
        [jac[i][j] - MultiJet.constant(a0[i][j], cap) for j in range(3)]
        for i in range(3)
    ]
    b = _numeric_times_jetmat(a0_inv, n)  # A^-1 N, order >= 1
    series = _jet_identity_matrix(cap)
    powk = _jet_identity_matrix(cap)
    for _ in range(cap):
        powk = _jetmat_mul(powk, b)
        powk = [[-e for e in row] for row in powk]  # accumulate (-A^-1 N)^k
        if all(e.is_zero() for row in powk for e in row):
            break
        series = _jetmat_add(series, powk)
    return _jetmat_times_numeric(series, a0_inv)


def _jet_identity_matrix(cap: int) -> list[list[MultiJet]]:
    return [
        [MultiJet.constant(1, cap) if i == j else MultiJet.zero(cap) for j in range(3)]
        for i in range(3)
    ]


def _jetmat_mul(a, b):
    cap = a[0][0].cap
    out = []
    for i in range(3):
        row = []
        for j in range(3):
            acc = MultiJet.zero(cap)
            for k in range(3):
                acc = acc + a[i][k] * b[k][j]
            row.append(acc)
        out.append(row)
    return out


def _jetmat_add(a, b):
    return [[a[i][j] + b[i][j] for j in range(3)] for i in range(3)]


def _numeric_times_jetmat(m, a):
    cap = a[0][0].cap
    out = []
    for i in range(3):
        row = []
        for j in range(3):
            acc = MultiJet.zero(cap)
            for k in range(3):
                acc = acc + a[k][j].scale(m[i][k])
            row.append(acc)
        out.append(row)
    return out


def _jetmat_times_numeric(a, m):
    cap = a[0][0].cap
    out = []
    for i in range(3):
        row = []
        for j in range(3):
            acc = MultiJet.zero(cap)
            for k in range(3):
                acc = acc + a[i][k].scale(m[k][j])
            row.append(acc)
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# Structural gates


def check_linear_part(uj: UnfoldingJet, tol=None):
    """Verify the state linear block at the origin is the Hopf-zero rotation.

    Returns the rotation rate alpha_star > 0 when the block matches
        [[0, alpha, 0], [-alpha, 0, 0], [0, 0, 0]]
    within tolerance; raises ConditionFailure otherwise.
    """
    if tol is None:
        tol = structural_tol()
    units = [
        (1, 0, 0, 0, 0),
        (0, 1, 0, 0, 0),
        (0, 0, 1, 0, 0),
    ]
    lin = [[mpfr(c.coeff(u)) for u in units] for c in uj.components()]
    alpha = lin[0][1]
    if alpha <= 0:
        raise ConditionFailure(
            f"linear part is not a positive rotation: d(px)/dy = {to_decimal(alpha)}"
        )
    target = [[mpfr(0), alpha, mpfr(0)], [-alpha, mpfr(0), mpfr(0)], [mpfr(0)] * 3]
    scale = max(mpfr(1), alpha)
    worst = mpfr(0)
    for i in range(3):
        for j in range(3):
            r = abs(lin[i][j] - target[i][j])
            if r > worst:
                worst = r
    if worst > tol * scale:
        raise ConditionFailure(
            f"linear part deviates from the Hopf-zero rotation by {to_decimal(worst)}"
            f" (tolerance {to_decimal(tol * scale)})"
        )
    return alpha


@dataclass(frozen=True)
class OpenConditionReport:
    hz_star: bool
    a_less_2: bool
    bracket_zz_rr: mpfr  # d2z pz * (d2x pz + d2y pz) at 0; must be > 0
    bracket_zz_xz: mpfr  # d2z pz * (dxz px + dyz py) at 0; must be < 0
    ratio_shear: mpfr    # |dxz px + dyz py| / (2 |d2z pz|); must be < 1

    def as_dict(self) -> dict:
        return {
            "hz_star": self.hz_star,
            "a_less_2": self.a_less_2,
            "bracket_zz_rr": to_decimal(self.bracket_zz_rr),
            "bracket_zz_xz": to_decimal(self.bracket_zz_xz),
            "ratio_shear": to_decimal(self.ratio_shear),
        }


def check_open_conditions(uj: UnfoldingJet) -> OpenConditionReport:
    """Open-condition gates on the singularity jet at mu = nu = 0.

    Second derivatives are read off the quadratic coefficients.  The two
    bracket witnesses must be positive resp. negative for the saddle-focus
    unfolding type; the shear ratio must sit strictly below 1 so the focal
    contraction stays below twice the vertical expansion (0 < a < 2 in
    normal-form terms).
    """
    d2z_pz = 2 * uj.pz.coeff((0, 0, 2, 0, 0))
    d2x_pz = 2 * uj.pz.coeff((2, 0, 0, 0, 0))
    d2y_pz = 2 * uj.pz.coeff((0, 2, 0, 0, 0))
    dxz_px = uj.px.coeff((1, 0, 1, 0, 0))
    dyz_py = uj.py.coeff((0, 1, 1, 0, 0))
    bracket_rr = d2z_pz * (d2x_pz + d2y_pz)
    bracket_xz = d2z_pz * (dxz_px + dyz_py)
    hz_star = bool(bracket_rr > 0) and bool(bracket_xz < 0)
    denom = 2 * abs(d2z_pz)
    ratio = abs(dxz_px + dyz_py) / denom if denom != 0 else mpfr("inf")
    return OpenConditionReport(
        hz_star=hz_star,
        a_less_2=bool(ratio < 1),
        bracket_zz_rr=bracket_rr,
        bracket_zz_xz=bracket_xz,
        ratio_shear=ratio,
    )


@dataclass(frozen=True)
class GenericUnfoldingReport:
    ok: bool
    witness: mpfr
    mode: str

    def as_dict(self) -> dict:
        return {"ok": self.ok, "witness": to_decimal(self.witness), "mode": self.mode}


def check_generic_unfolding(uj: UnfoldingJet, mode: str | None = None) -> GenericUnfoldingReport:
    """Transversality of the unfolding with respect to the parameters.

    General mode witness:  b01 * d(pz)/dmu - b02 * d(pz)/dnu at 0, where
    b01, b02 are the half-sums of the radial parameter couplings in the
    (x, y) equations.  Volume-preserving mode witness: d(pz)/dmu at 0.
    Nonzero witness means the parameter change of the reduction is regular.
    """
    mode = uj.mode if mode is None else mode
    dmu_pz = uj.pz.coeff((0, 0, 0, 1, 0))
    if mode == MODE_VOLUME_PRESERVING:
        witness = mpfr(dmu_pz)
        return GenericUnfoldingReport(ok=bool(witness != 0), witness=witness, mode=mode)
    dnu_pz = uj.pz.coeff((0, 0, 0, 0, 1))
    b01 = (uj.px.coeff((1, 0, 0, 0, 1)) + uj.py.coeff((0, 1, 0, 0, 1))) / 2
    b02 = (uj.px.coeff((1, 0, 0, 1, 0)) + uj.py.coeff((0, 1, 0, 1, 0))) / 2
    witness = b01 * dmu_pz - b02 * dnu_pz
    return GenericUnfoldingReport(ok=bool(witness != 0), witness=witness, mode=mode)


# ---------------------------------------------------------------------------
# Text file format
#
#   # comment
#   degree_cap 6
#   mode general
#   x 1 0 1 0 0 -1.25        <- component, five exponents, decimal coefficient
#
# Parsing preserves the coefficient literals so a load/save cycle reproduces
# them bit-exactly.


@dataclass
class JetFileEntry:
    component: str
    index: MultiIndex
    literal: str


@dataclass
class JetFile:
    cap: int
    mode: str
    entries: list[JetFileEntry] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"degree_cap {self.cap}", f"mode {self.mode}"]
        for e in self.entries:
            idx = " ".join(str(v) for v in e.index)
            lines.append(f"{e.component} {idx} {e.literal}")
        return "\n".join(lines) + "\n"

    def to_unfolding(self) -> UnfoldingJet:
        comps: dict[str, dict[MultiIndex, mpfr]] = {"x": {}, "y": {}, "z": {}}
        for e in self.entries:
            comps[e.component][e.index] = mpf(e.literal)
        return UnfoldingJet(
            px=MultiJet(comps["x"], self.cap),
            py=MultiJet(comps["y"], self.cap),
            pz=MultiJet(comps["z"], self.cap),
            cap=self.cap,
            mode=self.mode,
        )


def parse_jet_text(text: str) -> JetFile:
    cap: int | None = None
    mode = MODE_GENERAL
    entries: list[JetFileEntry] = []
    seen: set[tuple[str, MultiIndex]] = set()
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "degree_cap":
            if len(parts) != 2 or not parts[1].isdigit():
                raise JetParseError("degree_cap needs one integer argument", line=ln)
            cap = int(parts[1])
            continue
        if parts[0] == "mode":
            if len(parts) != 2 or parts[1] not in _MODES:
                raise JetParseError(
                    f"mode must be one of {', '.join(_MODES)}", line=ln
                )
            mode = parts[1]
            continue
        if parts[0] not in COMPONENT_NAMES:
            raise JetParseError(
                f"unknown component {parts[0]!r} (expected x, y, or z)", line=ln, column=1
            )
        if len(parts) != 7:
            raise JetParseError(
                f"term lines need component, {NVARS} exponents, coefficient "
                f"(got {len(parts)} fields)",
                line=ln,
            )
        if cap is None:
            raise JetParseError("degree_cap must appear before term lines", line=ln)
        try:
            index = tuple(int(p) for p in parts[1:6])
        except ValueError:
            raise JetParseError("exponents must be integers", line=ln) from None
        if any(e < 0 for e in index):
            raise JetParseError("exponents must be nonnegative", line=ln)
        if index_degree(index) > cap:
            raise JetParseError(
                f"term degree {index_degree(index)} exceeds degree_cap {cap}", line=ln
            )
        key = (parts[0], index)
        if key in seen:
            raise JetParseError(f"duplicate term {parts[0]} {index}", line=ln)
        seen.add(key)
        try:
            mpf(parts[6])
        except (ValueError, TypeError):
            raise JetParseError(
                f"bad coefficient literal {parts[6]!r}", line=ln, column=len(line) - len(parts[6]) + 1
            ) from None
        entries.append(JetFileEntry(component=parts[0], index=index, literal=parts[6]))
    if cap is None:
        raise JetParseError("missing degree_cap header")
    return JetFile(cap=cap, mode=mode, entries=entries)


def load_jet_file(path) -> JetFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise JetParseError(f"cannot read jet file {path}: {exc}") from exc
    return parse_jet_text(text)


def unfolding_to_jetfile(uj: UnfoldingJet, digits: int | None = None) -> JetFile:
    entries = []
    for name, comp in zip(COMPONENT_NAMES, uj.components()):
        for idx in sorted(comp.terms, key=lambda i: (index_degree(i), i)):
            entries.append(
                JetFileEntry(component=name, index=idx, literal=to_decimal(comp.terms[idx], digits))
            )
    return JetFile(cap=uj.cap, mode=uj.mode, entries=entries)


def save_jet_file(uj_or_file, path, digits: int | None = None) -> None:
    jf = uj_or_file if isinstance(uj_or_file, JetFile) else unfolding_to_jetfile(uj_or_file, digits)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(jf.to_text())
