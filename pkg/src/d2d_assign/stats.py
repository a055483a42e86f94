"""Success probability and expected rate of a link sharing a channel.

The aggregate unknown interference Y = Σ λ_z β_z (β_z ~ Gamma(m_z, 1/m_z))
is represented as an exponential mixture (all Rayleigh, distinct scales),
an Erlang mixture (integer shapes, distinct rates) or a convergent gamma
series, a mixture of Gamma(ρ+n, θ) laws. When the series would need more
than its term budget the law falls back to the characteristic function.
Rates are in bits/s/Hz and already include the outage indicator: a
transmission below the SINR threshold contributes zero.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import structlog
from numpy.typing import ArrayLike, NDArray
from scipy import optimize, special
from scipy import stats as sps

from d2d_assign.config import NumericsConfig
from d2d_assign.errors import (
    DegenerateScalesError,
    DomainError,
    SeriesNotConvergedError,
    UnsupportedError,
)
from d2d_assign.model import FadingSpec
from d2d_assign.special_fns import (
    QuadratureControl,
    SeriesControl,
    fourier_tail,
    integrate,
    scaled_exp1,
)

log = structlog.get_logger(__name__)

LOG2E = 1.0 / math.log(2.0)

# Relative distance below which two mixture scales count as equal.
_DEGENERATE_SCALE_TOL = 1e-9

# Partial-fraction weights beyond this have lost too many digits to cancellation.
_MAX_MIXTURE_WEIGHT = 1e6

# Oscillation cycles integrated plainly before the Fourier tail takes over.
_GIL_PELAEZ_HEAD_CYCLES = 4

# CDF values whose Chernoff tail bound is below this are returned as 0 or 1.
_CDF_TAIL_BOUND = 1e-15

# Truncated-moment quadratures stop this far past the Gamma(k+1) mode.
_MOMENT_TAIL_CUT = 50.0

_MC_CHUNK = 262_144


@dataclass(frozen=True, slots=True)
class StatsControl:
    series: SeriesControl = field(default_factory=SeriesControl)
    quadrature: QuadratureControl = field(default_factory=QuadratureControl)

    @classmethod
    def from_config(cls, cfg: NumericsConfig) -> StatsControl:
        return cls(
            series=SeriesControl(cfg.series_rel_tolerance, cfg.series_max_terms),
            quadrature=QuadratureControl(
                cfg.quad_abs_tolerance, cfg.quad_rel_tolerance, cfg.quad_max_subdivisions,
            ),
        )


# ---------------------------------------------------------------------------
# Value objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Interferer:
    scale: float  # λ_{z,j}
    shape: float = 1.0  # m_{z,j}

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise DomainError("interferer scale must be positive")
        if self.shape < 0.5:
            raise DomainError("interferer shape must be >= 0.5")

    @property
    def rate(self) -> float:
        return self.shape / self.scale


@dataclass(frozen=True, slots=True)
class InterferenceContext:
    """Everything needed to score one link on one channel.

    ``nu`` is noise plus known interference; ``signal_beta`` is ``None``
    when the signal's small-scale gain is unknown, in which case
    ``signal_fading`` describes it.
    """

    nu: float
    signal_scale: float
    signal_beta: float | None = None
    signal_fading: FadingSpec = field(default_factory=FadingSpec.rayleigh)
    unknown_interferers: tuple[Interferer, ...] = ()
    sinr_min: float = 1.0

    def __post_init__(self) -> None:
        if self.nu <= 0:
            raise DomainError("nu must be positive")
        if self.signal_scale <= 0:
            raise DomainError("signal_scale must be positive")
        if self.signal_beta is not None and self.signal_beta <= 0:
            raise DomainError("signal_beta must be positive when known")
        if self.sinr_min <= 0:
            raise DomainError("sinr_min must be positive")
        object.__setattr__(
            self,
            "unknown_interferers",
            tuple(i if isinstance(i, Interferer) else Interferer(*i) for i in self.unknown_interferers),
        )

    @property
    def rate_max(self) -> float:
        """θ: the largest interferer rate m_z/λ_z."""
        if not self.unknown_interferers:
            raise DomainError("no unknown interferers")
        return max(i.rate for i in self.unknown_interferers)

    @property
    def total_shape(self) -> float:
        return sum(i.shape for i in self.unknown_interferers)

    @property
    def eta(self) -> float:
        """Largest interference that still meets the threshold (known β)."""
        if self.signal_beta is None:
            raise DomainError("eta requires a known signal gain")
        return max(0.0, self.signal_scale * self.signal_beta / self.sinr_min - self.nu)

    @property
    def integer_shapes(self) -> bool:
        return all(float(i.shape).is_integer() for i in self.unknown_interferers)


@dataclass(frozen=True, slots=True)
class LinkStats:
    success_prob: float
    expected_rate: float


@dataclass(frozen=True, slots=True)
class LinkStatsEstimate:
    success_prob: float
    expected_rate: float
    success_prob_se: float
    expected_rate_se: float
    samples: int


def _as_interferers(items: Iterable) -> tuple[Interferer, ...]:
    return tuple(i if isinstance(i, Interferer) else Interferer(*i) for i in items)


# ---------------------------------------------------------------------------
# Laws of the unknown interference
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True, eq=False)
class ExponentialMixture:
    """Sum of independent exponentials with distinct means ``scales``.

    pdf(y) = Σ_z c_z e^(-y/λ_z) / λ_z with c_z = Π_{k≠z} λ_z / (λ_z - λ_k).
    """

    scales: NDArray[np.float64]
    coefficients: NDArray[np.float64]

    @classmethod
    def from_scales(cls, scales: Sequence[float]) -> ExponentialMixture:
        lam = np.asarray(scales, dtype=float)
        if lam.ndim != 1 or lam.size == 0 or np.any(lam <= 0):
            raise DomainError("scales must be a non-empty list of positive values")
        diff = lam[:, None] - lam[None, :]
        np.fill_diagonal(diff, 1.0)
        close = np.abs(diff) <= _DEGENERATE_SCALE_TOL * np.maximum(lam[:, None], lam[None, :])
        np.fill_diagonal(close, False)
        if np.any(close):
            raise DegenerateScalesError("exponential mixture needs distinct scales")
        ratio = lam[:, None] / diff
        np.fill_diagonal(ratio, 1.0)
        return cls(lam, np.prod(ratio, axis=1))

    def pdf(self, y: ArrayLike) -> NDArray[np.float64] | float:
        y_arr = np.asarray(y, dtype=float)
        terms = self.coefficients / self.scales * np.exp(-y_arr[..., None] / self.scales)
        out = np.maximum(terms.sum(axis=-1), 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, y: float) -> float:
        if y <= 0:
            return 0.0
        tail = float(np.dot(self.coefficients, np.exp(-y / self.scales)))
        return min(1.0, max(0.0, 1.0 - tail))


@dataclass(frozen=True, slots=True, eq=False)
class ErlangMixture:
    """Sum of independent gammas with integer shapes and distinct rates.

    Partial fractions of the Laplace transform Π_z (1 + s/r_z)^(-m_z) give
    pdf(y) = Σ_z Σ_{k<=m_z} A_{z,k} Erlang(k, r_z)(y). Around the pole of
    z, with x = 1 + s/r_z, A_{z,k} is the coefficient of x^(m_z-k) in the
    product of the other factors, expanded through its log-derivative.
    """

    orders: NDArray[np.int64]  # k
    rates: NDArray[np.float64]  # r_z
    weights: NDArray[np.float64]  # A_{z,k}

    @classmethod
    def from_interferers(cls, interferers: Iterable) -> ErlangMixture:
        items = _as_interferers(interferers)
        if not items:
            raise DomainError("at least one interferer is required")
        if not all(float(i.shape).is_integer() for i in items):
            raise DomainError("Erlang mixture needs integer shapes")
        m = np.array([int(i.shape) for i in items])
        r = np.array([i.rate for i in items])
        gap = np.abs(r[:, None] - r[None, :])
        np.fill_diagonal(gap, np.inf)
        if np.any(gap <= _DEGENERATE_SCALE_TOL * np.maximum(r[:, None], r[None, :])):
            raise DegenerateScalesError("Erlang mixture needs distinct rates")

        orders: list[int] = []
        rates: list[float] = []
        weights: list[float] = []
        for z in range(r.size):
            others = np.arange(r.size) != z
            m_o, r_o = m[others], r[others]
            c = r[z] / (r_o - r[z])
            log_deriv = np.array([float(np.sum(m_o * (-c) ** (n + 1))) for n in range(m[z])])
            g = np.zeros(m[z])
            g[0] = float(np.prod((1.0 - r[z] / r_o) ** (-m_o)))
            for n in range(m[z] - 1):
                g[n + 1] = float(np.dot(log_deriv[:n + 1], g[n::-1])) / (n + 1)
            for k in range(1, m[z] + 1):
                orders.append(k)
                rates.append(float(r[z]))
                weights.append(float(g[m[z] - k]))

        w = np.array(weights)
        if np.max(np.abs(w)) > _MAX_MIXTURE_WEIGHT:
            raise DegenerateScalesError("Erlang mixture is ill-conditioned for these rates")
        return cls(np.array(orders), np.array(rates), w)

    def pdf(self, y: ArrayLike) -> NDArray[np.float64] | float:
        y_arr = np.asarray(y, dtype=float)
        dens = sps.gamma.pdf(y_arr[..., None], a=self.orders, scale=1.0 / self.rates)
        out = np.maximum(dens @ self.weights, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def cdf(self, y: float) -> float:
        if y <= 0:
            return 0.0
        value = float(special.gammainc(self.orders, self.rates * y) @ self.weights)
        return min(1.0, max(0.0, value))


@dataclass(frozen=True, slots=True, eq=False)
class GammaSeries:
    """Sum of independent gammas as Σ_n w_n Gamma(ρ+n, rate θ).

    The weights are the series coefficients scaled by Π(θ_z/θ)^(m_z) and sum
    to one, so the truncation error is the weight left out.
    """

    shape: float  # ρ
    rate: float  # θ
    weights: NDArray[np.float64]

    @classmethod
    def from_interferers(
        cls, interferers: Iterable, ctrl: SeriesControl | None = None,
    ) -> GammaSeries:
        ctrl = ctrl or SeriesControl()
        items = _as_interferers(interferers)
        if not items:
            raise DomainError("at least one interferer is required")
        m = np.array([i.shape for i in items])
        rates = np.array([i.rate for i in items])
        theta = float(rates.max())
        reduction = 1.0 - rates / theta
        w0 = math.exp(float(np.sum(m * np.log(rates / theta))))
        if w0 == 0.0:
            raise SeriesNotConvergedError("gamma series leading weight underflows", estimate=0.0)

        powers = np.arange(1, ctrl.max_terms + 1)
        g = np.concatenate(([0.0], (m[None, :] * reduction[None, :] ** powers[:, None]).sum(axis=1)))
        w = np.zeros(ctrl.max_terms)
        w[0] = w0
        total, n = w0, 1
        while 1.0 - total > ctrl.rel_tolerance:
            if n >= ctrl.max_terms:
                raise SeriesNotConvergedError(
                    f"gamma series did not converge in {ctrl.max_terms} terms",
                    estimate=1.0 - total,
                )
            w[n] = np.dot(g[1:n + 1], w[n - 1::-1][:n]) / n
            total += w[n]
            n += 1
        return cls(float(m.sum()), theta, w[:n].copy())

    @property
    def n_terms(self) -> int:
        return self.weights.size

    def pdf(self, y: ArrayLike) -> NDArray[np.float64] | float:
        y_arr = np.asarray(y, dtype=float)
        shapes = self.shape + np.arange(self.n_terms)
        dens = sps.gamma.pdf(y_arr[..., None], a=shapes, scale=1.0 / self.rate)
        out = dens @ self.weights
        return float(out) if np.ndim(out) == 0 else out

    def cdf(self, y: float) -> float:
        if y <= 0:
            return 0.0
        shapes = self.shape + np.arange(self.n_terms)
        return min(1.0, float(special.gammainc(shapes, self.rate * y) @ self.weights))


@dataclass(frozen=True, slots=True, eq=False)
class CharacteristicLaw:
    """Any gamma sum, through its characteristic function.

    F(y) = 1/2 - (1/π) ∫_0^∞ Im[e^(-ity) φ(t)] / t dt with
    φ(t) = Π_z (1 - i t λ_z/m_z)^(-m_z). Only the CDF is available, and
    each value costs a few quadratures, so values are cached per law.
    """

    scales: NDArray[np.float64]
    shapes: NDArray[np.float64]
    quadrature: QuadratureControl
    _cdf_cache: dict[float, float] = field(default_factory=dict, init=False, repr=False)

    @classmethod
    def from_interferers(
        cls, interferers: Iterable, ctrl: QuadratureControl | None = None,
    ) -> CharacteristicLaw:
        items = _as_interferers(interferers)
        if not items:
            raise DomainError("at least one interferer is required")
        ctrl = ctrl or QuadratureControl()
        # the Gil-Pelaez integral passes through zero at the median of Y
        ctrl = replace(ctrl, abs_tolerance=max(ctrl.abs_tolerance, 1e-12))
        return cls(
            np.array([i.scale for i in items]), np.array([i.shape for i in items]), ctrl,
        )

    def characteristic(self, t: float) -> complex:
        return complex(np.exp(-np.sum(self.shapes * np.log1p(-1j * t * self.scales / self.shapes))))

    def cdf(self, y: float) -> float:
        if y <= 0:
            return 0.0
        value = self._cdf_cache.get(y)
        if value is None:
            value = self._cdf_cache[y] = self._settled_tail(y)
            if math.isnan(value):
                value = self._cdf_cache[y] = self._gil_pelaez(y)
        return value

    def _log_mgf(self, s: float) -> float:
        """log E[e^(sY)], finite for s below the smallest rate."""
        return -float(np.sum(self.shapes * np.log1p(-s * self.scales / self.shapes)))

    def _settled_tail(self, y: float) -> float:
        """0 or 1 when a Chernoff bound puts y deep in a tail, NaN otherwise.

        Far out in either tail the Gil-Pelaez integrand stops decaying over
        many cycles, so those values are not inverted.
        """
        mean = float(self.scales.sum())
        if y > mean:
            s_max = float(np.min(self.shapes / self.scales))
            res = optimize.minimize_scalar(
                lambda s: self._log_mgf(s) - s * y, bounds=(0.0, s_max * (1.0 - 1e-9)), method="bounded",
            )
            return 1.0 if res.fun < math.log(_CDF_TAIL_BOUND) else math.nan
        if y < mean:
            res = optimize.minimize_scalar(
                lambda s: self._log_mgf(-s) + s * y,
                bounds=(0.0, float(self.shapes.sum()) / y), method="bounded",
            )
            return 0.0 if res.fun < math.log(_CDF_TAIL_BOUND) else math.nan
        return math.nan

    def _gil_pelaez(self, y: float) -> float:
        # t = u / y puts e^(-ity) at unit frequency
        head_end = 2.0 * math.pi * _GIL_PELAEZ_HEAD_CYCLES
        knees = [float(k) for k in y * self.shapes / self.scales]

        def head(u: float) -> float:
            return (cmath.exp(-1j * u) * self.characteristic(u / y)).imag / u

        body = integrate(head, 0.0, head_end, self.quadrature, points=knees)
        body += fourier_tail(
            lambda u: self.characteristic(u / y).imag / u, head_end, "cos", 1.0, self.quadrature,
        )
        body -= fourier_tail(
            lambda u: self.characteristic(u / y).real / u, head_end, "sin", 1.0, self.quadrature,
        )
        return min(1.0, max(0.0, 0.5 - body / math.pi))


InterferenceLaw = ExponentialMixture | ErlangMixture | GammaSeries | CharacteristicLaw


def gamma_sum_pdf(interferers: Iterable, y: ArrayLike, ctrl: SeriesControl | None = None):
    """Density of Σ λ_z β_z, β_z ~ Gamma(m_z, 1/m_z), by the gamma series."""
    if np.any(np.asarray(y) < 0):
        raise DomainError("y must be non-negative")
    return GammaSeries.from_interferers(interferers, ctrl).pdf(y)


def exp_mixture_pdf(scales: Sequence[float], y: ArrayLike):
    """Density of a sum of exponentials with distinct means."""
    if np.any(np.asarray(y) < 0):
        raise DomainError("y must be non-negative")
    return ExponentialMixture.from_scales(scales).pdf(y)


def interference_law(ctx: InterferenceContext, ctrl: StatsControl | None = None) -> InterferenceLaw:
    """Exact mixtures first, then the gamma series, then the characteristic function."""
    ctrl = ctrl or StatsControl()
    items = ctx.unknown_interferers
    try:
        if all(i.shape == 1.0 for i in items):
            return ExponentialMixture.from_scales([i.scale for i in items])
        if ctx.integer_shapes:
            return ErlangMixture.from_interferers(items)
    except DegenerateScalesError as exc:
        log.debug("stats.series_fallback", interferers=len(items), reason=str(exc))
    try:
        return GammaSeries.from_interferers(items, ctrl.series)
    except SeriesNotConvergedError as exc:
        log.debug(
            "stats.characteristic_fallback", interferers=len(items), remaining_weight=exc.estimate,
        )
        return CharacteristicLaw.from_interferers(items, ctrl.quadrature)


# ---------------------------------------------------------------------------
# Truncated moments
#
# Dimensionless forms with a = θt, b = θη:
#   F_k(a) = ∫_0^b u^k e^(-u) / (k! (a + u)) du
#   M_k    = E[ln(1 + S/(ν + Y)) 1{Y <= η}],  Y ~ Gamma(k+1, θ)
# ---------------------------------------------------------------------------

def _reciprocal_moment_zero(a: float, b: float) -> float:
    return float(scaled_exp1(a) - math.exp(-b) * scaled_exp1(a + b))


def _reciprocal_moment_quad(k: int, a: float, b: float, ctrl: QuadratureControl) -> float:
    log_norm = float(special.gammaln(k + 1))
    # u^k e^(-u) / k! is below 1e-20 past the cut
    upper = min(b, k + _MOMENT_TAIL_CUT + 10.0 * math.sqrt(k + 1.0))

    def f(u: float) -> float:
        return math.exp(float(special.xlogy(k, u)) - u - log_norm) / (a + u)

    return integrate(f, 0.0, upper, ctrl, points=[float(k)])


def _reciprocal_moments(a: float, b: float, k_max: int, ctrl: QuadratureControl) -> NDArray[np.float64]:
    """F_0..F_kmax via F_k = (P(k, b) - a F_(k-1)) / k.

    The recurrence is run away from one quadrature seed in whichever
    direction is stable: backward below min(a, b), forward above.
    """
    f = np.zeros(k_max + 1)
    p = np.zeros(k_max + 1)
    if k_max >= 1:
        p[1:] = special.gammainc(np.arange(1, k_max + 1), b)
    seed = k_max if b <= a else min(int(math.floor(a)), k_max)
    f[seed] = _reciprocal_moment_zero(a, b) if seed == 0 else _reciprocal_moment_quad(seed, a, b, ctrl)
    for k in range(seed, 0, -1):
        f[k - 1] = (p[k] - k * f[k]) / a
    for k in range(seed + 1, k_max + 1):
        f[k] = (p[k] - a * f[k - 1]) / k
    return np.maximum(f, 0.0)


def _rate_moments(
    signal: float, nu: float, eta: float, theta: float, k_max: int, ctrl: QuadratureControl,
) -> NDArray[np.float64]:
    """M_0..M_kmax in nats, by the integration-by-parts recurrence."""
    if eta <= 0:
        return np.zeros(k_max + 1)
    b = theta * eta
    f_hi = _reciprocal_moments(theta * (nu + signal), b, k_max, ctrl)
    f_lo = _reciprocal_moments(theta * nu, b, k_max, ctrl)
    h_eta = math.log1p(signal / (nu + eta))
    out = np.empty(k_max + 1)
    out[0] = math.log1p(signal / nu) - math.exp(-b) * h_eta + f_hi[0] - f_lo[0]
    if k_max >= 1:
        ks = np.arange(1, k_max + 1)
        steps = (f_hi[1:] - f_lo[1:]) - sps.poisson.pmf(ks, b) * h_eta
        out[1:] = out[0] + np.cumsum(steps)
    return np.maximum(out, 0.0)


def mu_recurrence(k: int, ctx: InterferenceContext, ctrl: StatsControl | None = None) -> float:
    """μ_k = ∫_0^η ln(1 + λβ/(ν+y)) y^k e^(-θy) dy with θ = ``ctx.rate_max``.

    With an unknown signal gain the result is averaged over its fading law.
    """
    ctrl = ctrl or StatsControl()
    if k < 0 or int(k) != k:
        raise DomainError("k must be a non-negative integer")
    if not ctx.integer_shapes:
        raise UnsupportedError("the moment recurrence needs integer interferer shapes")
    theta = ctx.rate_max

    def known(beta: float) -> float:
        eta = max(0.0, ctx.signal_scale * beta / ctx.sinr_min - ctx.nu)
        if eta <= 0:
            return 0.0
        m_k = _rate_moments(ctx.signal_scale * beta, ctx.nu, eta, theta, int(k), ctrl.quadrature)[int(k)]
        if m_k <= 0:
            return 0.0
        return math.exp(math.log(m_k) + float(special.gammaln(k + 1)) - (k + 1) * math.log(theta))

    if ctx.signal_beta is not None:
        return known(ctx.signal_beta)
    dist = ctx.signal_fading.distribution()
    x0 = ctx.sinr_min * ctx.nu / ctx.signal_scale
    return integrate(lambda x: float(dist.pdf(x)) * known(x), x0, math.inf, ctrl.quadrature)


# ---------------------------------------------------------------------------
# Success probability
# ---------------------------------------------------------------------------

def _mgf_applies(ctx: InterferenceContext) -> bool:
    return ctx.signal_beta is None and ctx.signal_fading.is_rayleigh


def _mgf_success(ctx: InterferenceContext) -> float:
    """Rayleigh signal, unknown gain: E[exp(-ξ(ν+Y)/λ)]."""
    s = ctx.sinr_min / ctx.signal_scale
    log_p = -s * ctx.nu - sum(i.shape * math.log1p(s * i.scale / i.shape) for i in ctx.unknown_interferers)
    return math.exp(log_p)


def _mixture_unknown_success(ctx: InterferenceContext, law: ExponentialMixture) -> float:
    lam, xi = ctx.signal_scale, ctx.sinr_min
    terms = law.coefficients * lam / (lam + xi * law.scales)
    return math.exp(-xi * ctx.nu / lam) * float(terms.sum())


def _success_given_law(ctx: InterferenceContext, law: InterferenceLaw, ctrl: StatsControl) -> float:
    if ctx.signal_beta is not None:
        return law.cdf(ctx.eta)
    if ctx.signal_fading.is_rayleigh:
        if isinstance(law, ExponentialMixture):
            return _mixture_unknown_success(ctx, law)
        return _mgf_success(ctx)
    dist = ctx.signal_fading.distribution()
    lam, xi, nu = ctx.signal_scale, ctx.sinr_min, ctx.nu
    x0 = xi * nu / lam
    return integrate(lambda x: float(dist.pdf(x)) * law.cdf(lam * x / xi - nu), x0, math.inf, ctrl.quadrature)


def success_probability(ctx: InterferenceContext, ctrl: StatsControl | None = None) -> float:
    ctrl = ctrl or StatsControl()
    if not ctx.unknown_interferers:
        if ctx.signal_beta is not None:
            return 1.0 if ctx.signal_scale * ctx.signal_beta / ctx.nu >= ctx.sinr_min else 0.0
        x0 = ctx.sinr_min * ctx.nu / ctx.signal_scale
        return float(ctx.signal_fading.distribution().sf(x0))
    if _mgf_applies(ctx):
        return min(1.0, max(0.0, _mgf_success(ctx)))
    p = _success_given_law(ctx, interference_law(ctx, ctrl), ctrl)
    return min(1.0, max(0.0, p))


# ---------------------------------------------------------------------------
# Expected rate
# ---------------------------------------------------------------------------

def _known_rate(ctx: InterferenceContext, beta: float, law: InterferenceLaw, ctrl: StatsControl) -> float:
    signal = ctx.signal_scale * beta
    eta = max(0.0, signal / ctx.sinr_min - ctx.nu)
    if eta <= 0:
        return 0.0
    if isinstance(law, ExponentialMixture):
        nats = sum(
            c * _rate_moments(signal, ctx.nu, eta, 1.0 / lam, 0, ctrl.quadrature)[0]
            for c, lam in zip(law.coefficients, law.scales)
        )
        return LOG2E * max(0.0, nats)
    if isinstance(law, ErlangMixture):
        nats = 0.0
        for rate in np.unique(law.rates):
            sel = law.rates == rate
            orders = law.orders[sel]
            moments = _rate_moments(signal, ctx.nu, eta, float(rate), int(orders.max()) - 1, ctrl.quadrature)
            nats += float(law.weights[sel] @ moments[orders - 1])
        return LOG2E * max(0.0, nats)
    if isinstance(law, CharacteristicLaw):
        return _known_rate_from_cdf(ctx.nu, signal, eta, law, ctrl)
    if float(law.shape).is_integer():
        base = int(law.shape) - 1
        moments = _rate_moments(signal, ctx.nu, eta, law.rate, base + law.n_terms - 1, ctrl.quadrature)
        return LOG2E * float(moments[base:] @ law.weights)
    return integrate(
        lambda y: math.log2(1.0 + signal / (ctx.nu + y)) * float(law.pdf(y)),
        0.0, eta, ctrl.quadrature,
    )


def _known_rate_from_cdf(
    nu: float, signal: float, eta: float, law: InterferenceLaw, ctrl: StatsControl,
) -> float:
    """E[log2(1 + S/(ν+Y)) 1{Y <= η}] by parts, using only the CDF of Y."""

    def f(y: float) -> float:
        return signal * law.cdf(y) / ((nu + y) * (nu + y + signal))

    nats = math.log1p(signal / (nu + eta)) * law.cdf(eta) + integrate(f, 0.0, eta, ctrl.quadrature)
    return LOG2E * max(0.0, nats)


def _rayleigh_unknown_rate_from_cdf(
    ctx: InterferenceContext, law: InterferenceLaw, p: float, ctrl: StatsControl,
) -> float:
    """Rayleigh signal, unknown gain: E[k(Y)] = -∫ k'(y) F(y) dy.

    k(y) = e^(-ξw) e^z E1(z) with w = (ν+y)/λ and z = (1+ξ)w, so
    -k'(y) = (e^(-ξw)/w - k(y)) / λ.
    """
    lam, xi, nu = ctx.signal_scale, ctx.sinr_min, ctx.nu

    def f(y: float) -> float:
        w = (nu + y) / lam
        decay = math.exp(-xi * w)
        slope = decay / w - decay * float(scaled_exp1((1.0 + xi) * w))
        return slope * law.cdf(y) / lam

    return LOG2E * (math.log1p(xi) * p + integrate(f, 0.0, math.inf, ctrl.quadrature))


def _scaled_e1_difference(z0: float, d: float) -> float:
    """[g(z0) - g(z0 + d)] / d for g(z) = e^z E1(z)."""
    if abs(d) <= 1e-5 * z0:
        g = float(scaled_exp1(z0))
        g1 = g - 1.0 / z0
        g2 = g1 + 1.0 / (z0 * z0)
        return -g1 - 0.5 * g2 * d
    return (float(scaled_exp1(z0)) - float(scaled_exp1(z0 + d))) / d


def _mixture_unknown_rate(ctx: InterferenceContext, law: ExponentialMixture, p: float) -> float:
    lam, xi, nu = ctx.signal_scale, ctx.sinr_min, ctx.nu
    z0 = (1.0 + xi) * nu / lam
    damping = math.exp(-xi * nu / lam)
    tail = 0.0
    for c, lam_z in zip(law.coefficients, law.scales):
        d = nu / lam_z - nu / lam
        tail += c * damping * (nu / lam_z) * _scaled_e1_difference(z0, d)
    return LOG2E * (math.log1p(xi) * p + tail)


def _rayleigh_unknown_rate(ctx: InterferenceContext, law: InterferenceLaw, p: float, ctrl: StatsControl) -> float:
    lam, xi, nu = ctx.signal_scale, ctx.sinr_min, ctx.nu

    def f(y: float) -> float:
        load = (nu + y) / lam
        return float(law.pdf(y)) * math.exp(-xi * load) * float(scaled_exp1((1.0 + xi) * load))

    return LOG2E * (math.log1p(xi) * p + integrate(f, 0.0, math.inf, ctrl.quadrature))


def _interference_free_rate(ctx: InterferenceContext, ctrl: StatsControl) -> float:
    lam, xi, nu = ctx.signal_scale, ctx.sinr_min, ctx.nu
    if ctx.signal_beta is not None:
        sinr = lam * ctx.signal_beta / nu
        return math.log2(1.0 + sinr) if sinr >= xi else 0.0
    x0 = xi * nu / lam
    if ctx.signal_fading.is_rayleigh:
        return LOG2E * math.exp(-x0) * (math.log1p(xi) + float(scaled_exp1((1.0 + xi) * nu / lam)))
    dist = ctx.signal_fading.distribution()
    return integrate(lambda x: math.log2(1.0 + lam * x / nu) * float(dist.pdf(x)), x0, math.inf, ctrl.quadrature)


def _rate_given_law(ctx: InterferenceContext, law: InterferenceLaw, p: float, ctrl: StatsControl) -> float:
    if p <= 0.0:
        return 0.0
    if ctx.signal_beta is not None:
        return _known_rate(ctx, ctx.signal_beta, law, ctrl)
    if ctx.signal_fading.is_rayleigh:
        if isinstance(law, ExponentialMixture):
            return _mixture_unknown_rate(ctx, law, p)
        if isinstance(law, (ErlangMixture, CharacteristicLaw)):
            return _rayleigh_unknown_rate_from_cdf(ctx, law, p, ctrl)
        return _rayleigh_unknown_rate(ctx, law, p, ctrl)
    dist = ctx.signal_fading.distribution()
    x0 = ctx.sinr_min * ctx.nu / ctx.signal_scale
    return integrate(lambda x: float(dist.pdf(x)) * _known_rate(ctx, x, law, ctrl), x0, math.inf, ctrl.quadrature)


def expected_rate(ctx: InterferenceContext, ctrl: StatsControl | None = None) -> float:
    return link_stats(ctx, ctrl).expected_rate


def link_stats(ctx: InterferenceContext, ctrl: StatsControl | None = None) -> LinkStats:
    """Success probability and expected rate sharing one interference law."""
    ctrl = ctrl or StatsControl()
    if not ctx.unknown_interferers:
        p = success_probability(ctx, ctrl)
        return LinkStats(p, _interference_free_rate(ctx, ctrl) if p > 0 else 0.0)
    law = None if _mgf_applies(ctx) else interference_law(ctx, ctrl)
    p = _mgf_success(ctx) if law is None else _success_given_law(ctx, law, ctrl)
    p = min(1.0, max(0.0, p))
    if p <= 0.0:
        return LinkStats(p, 0.0)
    if law is None:
        law = interference_law(ctx, ctrl)
    r = max(0.0, _rate_given_law(ctx, law, p, ctrl))
    return LinkStats(p, r)


# ---------------------------------------------------------------------------
# Monte-Carlo oracle
# ---------------------------------------------------------------------------

def mc_oracle(ctx: InterferenceContext, n: int, seed: int) -> LinkStatsEstimate:
    """Sample SINR draws and estimate success probability and rate."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = np.random.default_rng(seed)
    sums = np.zeros(4)  # Σ ok, Σ ok², Σ rate, Σ rate²
    remaining = n
    while remaining:
        size = min(remaining, _MC_CHUNK)
        if ctx.signal_beta is not None:
            beta = np.full(size, ctx.signal_beta)
        else:
            beta = ctx.signal_fading.sample(rng, size)
        load = np.full(size, ctx.nu)
        for item in ctx.unknown_interferers:
            load += item.scale * rng.gamma(item.shape, 1.0 / item.shape, size=size)
        sinr = ctx.signal_scale * beta / load
        ok = (sinr >= ctx.sinr_min).astype(float)
        rate = np.where(ok > 0, np.log2(1.0 + sinr), 0.0)
        sums += (ok.sum(), (ok * ok).sum(), rate.sum(), (rate * rate).sum())
        remaining -= size

    def _mean_se(total: float, total_sq: float) -> tuple[float, float]:
        mean = total / n
        if n == 1:
            return mean, 0.0
        var = max(0.0, (total_sq - n * mean * mean) / (n - 1))
        return mean, math.sqrt(var / n)

    p, p_se = _mean_se(sums[0], sums[1])
    r, r_se = _mean_se(sums[2], sums[3])
    return LinkStatsEstimate(p, r, p_se, r_se, n)


def with_signal_gain(ctx: InterferenceContext, beta: float | None) -> InterferenceContext:
    return replace(ctx, signal_beta=beta)
