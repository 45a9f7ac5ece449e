"""Working-precision arithmetic helpers on top of gmpy2.

All numerical kernels in this package run on gmpy2.mpfr scalars under an
explicit decimal-digit budget.  The active mpfr precision is thread-local
(gmpy2 contexts are per-thread), so concurrent workers cannot trample each
other as long as each wraps its work in `working_precision`.
"""

from __future__ import annotations

import math
import os
import threading
from contextlib import contextmanager

import gmpy2
from gmpy2 import mpfr

DEFAULT_DIGITS = 32
ENV_PRECISION = "HOPFZERO_PRECISION"

# Guard bits beyond the decimal request; keeps decimal round-trips stable.
_GUARD_BITS = 24
_LOG2_10 = math.log2(10.0)

_state = threading.local()


def default_digits() -> int:
    """Session default precision; overridable via the environment."""
    raw = os.environ.get(ENV_PRECISION)
    if raw is None:
        return DEFAULT_DIGITS
    try:
        digits = int(raw)
    except ValueError as exc:
        raise ValueError(f"{ENV_PRECISION} must be an integer, got {raw!r}") from exc
    if digits < 8:
        raise ValueError(f"{ENV_PRECISION} must be at least 8, got {digits}")
    return digits


def bits_for(digits: int) -> int:
    return int(math.ceil(digits * _LOG2_10)) + _GUARD_BITS


def current_digits() -> int:
    return getattr(_state, "digits", DEFAULT_DIGITS)


@contextmanager
def working_precision(digits: int | None):
    """Set the thread-local mpfr precision to `digits` decimal digits."""
    if digits is None:
        digits = default_digits()
    if digits < 4:
        raise ValueError(f"precision must be at least 4 digits, got {digits}")
    old_ctx = gmpy2.get_context()
    old_digits = current_digits()
    new_ctx = gmpy2.context(precision=bits_for(digits))
    gmpy2.set_context(new_ctx)
    _state.digits = digits
    try:
        yield digits
    finally:
        gmpy2.set_context(old_ctx)
        _state.digits = old_digits


def mpf(value) -> mpfr:
    """Parse a value to mpfr at the active precision.

    Floats are accepted but converted through repr so that a float literal
    like 0.1 means the decimal 0.1 at working precision, not the binary
    double closest to it.
    """
    if isinstance(value, mpfr):
        return +value
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise ValueError(f"non-finite scalar {value!r}")
        return mpfr(repr(value))
    if isinstance(value, int):
        return mpfr(value)
    if isinstance(value, str):
        return mpfr(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to mpfr")


def zero() -> mpfr:
    return mpfr(0)


def one() -> mpfr:
    return mpfr(1)


def pi() -> mpfr:
    return gmpy2.const_pi()


def to_decimal(x, digits: int | None = None) -> str:
    """Decimal string with enough digits to round-trip at working precision."""
    if digits is None:
        digits = current_digits()
    x = mpfr(x)
    if gmpy2.is_nan(x) or gmpy2.is_infinite(x):
        raise ValueError("non-finite value has no decimal form")
    return format(x, f".{digits + 2}g")


def structural_tol(digits: int | None = None) -> mpfr:
    """Relative tolerance for structural identities.

    1e-12 at the default 32 digits; the exponent scales linearly with the
    precision so higher-precision runs demand proportionally tighter matches.
    """
    if digits is None:
        digits = current_digits()
    return mpfr(10) ** -int(round(12 * digits / 32))


def digits_for_one_dim(eps: float, margin: int = 16) -> int:
    """Precision needed to resolve the one-dimensional splitting at eps."""
    return margin + int(math.ceil(math.pi / (2.0 * eps * math.log(10.0))))


def digits_for_two_dim(eps: float, a: float, margin: int = 16) -> int:
    """Precision needed to resolve the two-dimensional splitting at eps."""
    return margin + int(math.ceil(math.pi / (2.0 * a * eps * math.log(10.0))))


def digits_for_transit(eps: float, a: float, margin: int = 20) -> int:
    """Precision for runs continued through the southern passage.

    The return distance scales like exp(-pi/(a*eps)) while errors seeded near
    the first crossing are amplified by roughly exp(pi/(2*eps)) during the
    passage, so the local budget must cover both factors.
    """
    need = (1.0 + 2.0 / a) * math.pi / (2.0 * eps * math.log(10.0))
    return margin + int(math.ceil(need))


def clamp_digits(digits: int, lo: int = 16, hi: int = 400) -> int:
    return max(lo, min(hi, digits))
