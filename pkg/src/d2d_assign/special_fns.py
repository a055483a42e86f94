"""Special functions and quadrature used by the link statistics.

Thin, validated wrappers around ``scipy.special`` and ``scipy.integrate``
plus the scaled exponential integral the closed forms are written in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate as _integrate
from scipy import special

from d2d_assign.errors import DomainError, NumericError

# Above this argument exp(z) * E1(z) switches to its asymptotic expansion.
_SCALED_E1_ASYMPTOTIC = 600.0

# QAWF ignores relative tolerances and needs a positive absolute one.
_FOURIER_ABS_TOLERANCE = 1e-12


@dataclass(frozen=True, slots=True)
class SeriesControl:
    rel_tolerance: float = 1e-12
    max_terms: int = 2000

    def __post_init__(self) -> None:
        if self.rel_tolerance <= 0:
            raise DomainError("rel_tolerance must be positive")
        if self.max_terms < 1:
            raise DomainError("max_terms must be >= 1")


@dataclass(frozen=True, slots=True)
class QuadratureControl:
    abs_tolerance: float = 0.0
    rel_tolerance: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if self.abs_tolerance <= 0 and self.rel_tolerance <= 0:
            raise DomainError("at least one quadrature tolerance must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


# ---------------------------------------------------------------------------
# Exponential integrals
# ---------------------------------------------------------------------------

def exp_integral_ei(x: float) -> float:
    """Principal-value exponential integral Ei(x); Ei(x) = -E1(-x) for x < 0."""
    if x == 0:
        raise DomainError("Ei has a logarithmic singularity at 0")
    return float(special.expi(x))


def scaled_exp1(z: ArrayLike) -> NDArray[np.float64] | float:
    """``exp(z) * E1(z)`` for z > 0, finite for arbitrarily large z."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0):
        raise DomainError("scaled E1 requires a positive argument")
    small = np.minimum(z_arr, _SCALED_E1_ASYMPTOTIC)
    direct = np.exp(small) * special.exp1(small)
    inv = 1.0 / z_arr
    asymptotic = inv * (1.0 - inv * (1.0 - 2.0 * inv * (1.0 - 3.0 * inv * (1.0 - 4.0 * inv))))
    out = np.where(z_arr < _SCALED_E1_ASYMPTOTIC, direct, asymptotic)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Incomplete gamma functions
# ---------------------------------------------------------------------------

def lower_incomplete_gamma(s: float, x: float) -> float:
    """Unregularized lower incomplete gamma γ(s, x)."""
    if s <= 0 or x < 0:
        raise DomainError(f"lower incomplete gamma undefined for s={s}, x={x}")
    if x == 0:
        return 0.0
    return float(special.gammainc(s, x) * special.gamma(s))


def upper_incomplete_gamma(s: float, x: float) -> float:
    """Unregularized upper incomplete gamma Γ(s, x) for s > 0."""
    if s <= 0 or x < 0:
        raise DomainError(f"upper incomplete gamma undefined for s={s}, x={x}")
    return float(special.gammaincc(s, x) * special.gamma(s))


def upper_incomplete_gamma_nonpos(k: int, x: float) -> float:
    """Γ(-k, x) = ∫ₓ^∞ t^(-k-1) e^(-t) dt for integer k >= 0.

    Evaluated as x^(-k) E_(k+1)(x), which satisfies the upward recurrence
    Γ(-k, x) = [e^(-x) x^(-k) - Γ(-k+1, x)] / k without its cancellation
    for large x.
    """
    if k < 0 or int(k) != k:
        raise DomainError("k must be a non-negative integer")
    if x <= 0:
        raise DomainError("Γ(-k, x) requires x > 0")
    return float(x ** (-k) * special.expn(int(k) + 1, x))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    ctrl: QuadratureControl | None = None,
    points: Sequence[float] | None = None,
) -> float:
    """Adaptive quadrature of ``f`` over [a, b]; ``b`` may be +inf.

    Semi-infinite ranges use QUADPACK's mapping t = a + (1 - u)/u.
    Raises ``NumericError`` carrying the partial estimate when the
    reported error exceeds the requested tolerance.
    """
    ctrl = ctrl or QuadratureControl()
    if b == a:
        return 0.0
    if not math.isinf(b) and b < a:
        raise DomainError("integration range must satisfy a <= b")

    kwargs: dict = {
        "epsabs": ctrl.abs_tolerance,
        "epsrel": ctrl.rel_tolerance,
        "limit": ctrl.max_subdivisions,
        "full_output": 1,
    }
    if points is not None and not math.isinf(b):
        inner = [p for p in points if a < p < b]
        if inner:
            kwargs["points"] = inner

    out = _integrate.quad(f, a, b, **kwargs)
    value, abserr = float(out[0]), float(out[1])
    if len(out) > 3:
        allowed = max(ctrl.abs_tolerance, ctrl.rel_tolerance * abs(value))
        # QUADPACK is pessimistic on round-off; only a clearly missed
        # tolerance counts as failure.
        if abserr > 1e3 * allowed and abserr > 1e-14:
            raise NumericError(f"quadrature did not converge: {out[3]}", estimate=value)
    return value


def fourier_tail(
    f: Callable[[float], float],
    a: float,
    kind: str,
    omega: float = 1.0,
    ctrl: QuadratureControl | None = None,
) -> float:
    """∫_a^∞ f(t) cos(ωt) dt (``kind="cos"``) or the sine variant, by QUADPACK's QAWF.

    ``f`` should decay without oscillating; QAWF works cycle by cycle and
    only honours an absolute tolerance.
    """
    ctrl = ctrl or QuadratureControl()
    if kind not in ("cos", "sin"):
        raise DomainError("kind must be 'cos' or 'sin'")
    if omega <= 0:
        raise DomainError("omega must be positive")
    epsabs = ctrl.abs_tolerance if ctrl.abs_tolerance > 0 else _FOURIER_ABS_TOLERANCE
    out = _integrate.quad(f, a, math.inf, weight=kind, wvar=omega, epsabs=epsabs, full_output=1)
    value, abserr = float(out[0]), float(out[1])
    if len(out) > 3 and abserr > 1e3 * epsabs:
        raise NumericError(f"Fourier quadrature did not converge: {out[3]}", estimate=value)
    return value
