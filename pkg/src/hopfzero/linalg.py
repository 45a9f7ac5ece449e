"""Dense linear algebra on gmpy2 scalars.

Everything here is small (n <= ~70): LU with partial pivoting, inverses,
normal-equation least squares, and the 3x3 eigen-split used to classify
saddle-focus equilibria.  Matrices are lists of lists of mpfr/mpc.
"""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2
from gmpy2 import mpfr

from .errors import ConditionFailure, NumericalFailure


def dot(a, b):
    return sum(map(gmpy2.mul, a, b), mpfr(0))


def norm2(v) -> mpfr:
    return gmpy2.sqrt(sum((abs(x) ** 2 for x in v), mpfr(0)))


def mat_vec(m, v):
    return [dot(row, v) for row in m]


def mat_mul(a, b):
    n, k, p = len(a), len(b), len(b[0])
    bt = [[b[r][c] for r in range(k)] for c in range(p)]
    return [[dot(a[i], bt[j]) for j in range(p)] for i in range(n)]


def lu_factor(a):
    """LU with partial pivoting; returns (lu, perm). Raises on singularity."""
    n = len(a)
    lu = [row[:] for row in a]
    perm = list(range(n))
    for col in range(n):
        piv, piv_val = col, abs(lu[col][col])
        for r in range(col + 1, n):
            v = abs(lu[r][col])
            if v > piv_val:
                piv, piv_val = r, v
        if piv_val == 0:
            raise NumericalFailure(f"singular matrix (pivot {col})")
        if piv != col:
            lu[col], lu[piv] = lu[piv], lu[col]
            perm[col], perm[piv] = perm[piv], perm[col]
        inv_p = 1 / lu[col][col]
        for r in range(col + 1, n):
            f = lu[r][col] * inv_p
            lu[r][col] = f
            if f != 0:
                row_r, row_c = lu[r], lu[col]
                for c in range(col + 1, n):
                    row_r[c] = row_r[c] - f * row_c[c]
    return lu, perm


def lu_solve(lu, perm, b):
    n = len(lu)
    x = [b[p] for p in perm]
    for i in range(1, n):
        row = lu[i]
        acc = x[i]
        for j in range(i):
            acc = acc - row[j] * x[j]
        x[i] = acc
    for i in range(n - 1, -1, -1):
        row = lu[i]
        acc = x[i]
        for j in range(i + 1, n):
            acc = acc - row[j] * x[j]
        x[i] = acc / row[i]
    return x


def solve(a, b):
    lu, perm = lu_factor(a)
    return lu_solve(lu, perm, b)


def mat_inverse(a):
    n = len(a)
    lu, perm = lu_factor(a)
    cols = []
    for j in range(n):
        e = [mpfr(1) if i == j else mpfr(0) for i in range(n)]
        cols.append(lu_solve(lu, perm, e))
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def solve_least_squares(a, b):
    """Minimize ||a x - b||_2 via normal equations (fine at high precision)."""
    m, n = len(a), len(a[0])
    at = [[a[r][c] for r in range(m)] for c in range(n)]
    ata = [[dot(at[i], at[j]) for j in range(n)] for i in range(n)]
    atb = [dot(at[i], b) for i in range(n)]
    return solve(ata, atb)


def cross(u, v):
    return [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ]


def _null_vector_3(m):
    """Unit null vector of a (numerically) rank-2 3x3 matrix."""
    candidates = [cross(m[0], m[1]), cross(m[0], m[2]), cross(m[1], m[2])]
    best, best_n = None, mpfr(0)
    for c in candidates:
        n = norm2(c)
        if n > best_n:
            best, best_n = c, n
    if best is None or best_n == 0:
        raise NumericalFailure("matrix rank below 2; eigenvector not isolated")
    return [c / best_n for c in best]


@dataclass(frozen=True)
class SaddleFocusEigen:
    """Eigen-structure of a 3x3 Jacobian with one real eigenvalue and a
    complex pair.  `plane_u`, `plane_v` span the invariant plane of the pair
    (orthonormalized); `axis` is the unit eigenvector of the real eigenvalue.
    """

    lam_real: mpfr
    rho: mpfr        # real part of the complex pair
    omega: mpfr      # |imaginary part| of the complex pair
    axis: list
    plane_u: list
    plane_v: list

    def eigenvalues(self) -> tuple:
        return (self.lam_real, gmpy2.mpc(self.rho, self.omega), gmpy2.mpc(self.rho, -self.omega))


def eig3_saddle_focus(j) -> SaddleFocusEigen:
    """Eigen-split of a real 3x3 matrix expected to have one real eigenvalue
    and one complex-conjugate pair.  Raises ConditionFailure when the
    spectrum is fully real (not a focus)."""
    tr = j[0][0] + j[1][1] + j[2][2]
    m = (
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
        + j[0][0] * j[2][2] - j[0][2] * j[2][0]
        + j[1][1] * j[2][2] - j[1][2] * j[2][1]
    )
    det = (
        j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
    )
    # monic cubic: lam^3 + c2 lam^2 + c1 lam + c0
    c2, c1, c0 = -tr, m, -det

    def poly(lam):
        return ((lam + c2) * lam + c1) * lam + c0

    def dpoly(lam):
        return (3 * lam + 2 * c2) * lam + c1

    bound = 1 + max(abs(c2), abs(c1), abs(c0))
    # Sample for a sign change to bracket a real root.
    samples = 201
    xs = [(-bound) + (2 * bound) * k / (samples - 1) for k in range(samples)]
    lo = hi = None
    prev_x, prev_f = xs[0], poly(xs[0])
    for xk in xs[1:]:
        fk = poly(xk)
        if prev_f == 0:
            lo = hi = prev_x
            break
        if (prev_f < 0) != (fk < 0):
            lo, hi = prev_x, xk
            break
        prev_x, prev_f = xk, fk
    if lo is None:
        raise NumericalFailure("no real eigenvalue bracket found")
    lam = (lo + hi) / 2
    if lo != hi:
        flo = poly(lo)
        for _ in range(80):
            lam = (lo + hi) / 2
            fm = poly(lam)
            d = dpoly(lam)
            if d != 0:
                step = lam - fm / d
                if lo < step < hi:
                    fs = poly(step)
                    if abs(fs) < abs(fm):
                        lam, fm = step, fs
            if fm == 0:
                break
            if (fm < 0) == (flo < 0):
                lo, flo = lam, fm
            else:
                hi = lam
            if hi - lo < abs(lam) * mpfr(2) ** (-gmpy2.get_context().precision + 4) + mpfr(2) ** (
                -gmpy2.get_context().precision
            ):
                break
    # Newton polish: the bracket loop can exit with lam at a plain midpoint,
    # orders of magnitude above the rounding floor.
    best, fbest = lam, abs(poly(lam))
    for _ in range(64):
        d = dpoly(lam)
        if d == 0:
            break
        step = poly(lam) / d
        lam = lam - step
        f = abs(poly(lam))
        if f < fbest:
            best, fbest = lam, f
        if abs(step) <= abs(lam) * mpfr(2) ** (-gmpy2.get_context().precision + 2):
            break
    lam = best
    # Deflate: lam^2 + b lam + c
    b = c2 + lam
    c = c1 + lam * b
    disc = b * b - 4 * c
    if disc >= 0:
        raise ConditionFailure(
            "spectrum is fully real; equilibrium is not of saddle-focus type"
        )
    rho = -b / 2
    omega = gmpy2.sqrt(-disc) / 2
    axis = _null_vector_3([[j[r][cc] - (lam if r == cc else 0) for cc in range(3)] for r in range(3)])
    # Complex eigenvector for rho + i omega; invariant plane from its parts.
    lam_c = gmpy2.mpc(rho, omega)
    mc = [[gmpy2.mpc(j[r][cc]) - (lam_c if r == cc else 0) for cc in range(3)] for r in range(3)]
    w = _null_vector_3(mc)
    u = [x.real for x in w]
    v = [x.imag for x in w]
    # Orthonormalize (u, v) inside the invariant plane.
    nu = norm2(u)
    if nu == 0:
        u, v = v, u
        nu = norm2(u)
    u = [x / nu for x in u]
    proj = dot(v, u)
    v = [v[k] - proj * u[k] for k in range(3)]
    nv = norm2(v)
    if nv == 0:
        raise NumericalFailure("invariant plane basis degenerate")
    v = [x / nv for x in v]
    return SaddleFocusEigen(lam_real=lam, rho=rho, omega=omega, axis=axis, plane_u=u, plane_v=v)
