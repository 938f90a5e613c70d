"""Closed-form performance math for energy-detector cooperative sensing.

Pure functions only: Gaussian tail helpers, fixed-threshold detector
probabilities, their dual-dynamic-threshold counterparts (an activity
predictor toggling between a lowered and a raised threshold scaled by a
noise-uncertainty factor), Rayleigh-fading averages, and the hard-fusion
probability algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from scipy import integrate, special

__all__ = [
    "NumericalConsistencyError",
    "FusionRule",
    "DetectorParams",
    "DualThresholdParams",
    "AnalyticPoint",
    "FusionSpec",
    "q_function",
    "q_inverse",
    "cfar_threshold",
    "pfa_conventional",
    "pd_awgn",
    "pd_rayleigh",
    "avg_energy_moments",
    "pfa_dual_threshold",
    "pd_dual_threshold",
    "pd_dual_threshold_rayleigh",
    "fuse_probability",
]

_SQRT2 = math.sqrt(2.0)
# Excursions beyond [0, 1] up to this size are floating-point noise and get
# clamped; anything larger indicates a formula bug and raises instead.
_CLAMP_RAISE = 1e-9
_QUAD_TOL = 1e-8
# Exponential tail below e**-40 ~ 4e-18; used by the truncated-domain retry.
_QUAD_TRUNCATION = 40.0


class NumericalConsistencyError(ArithmeticError):
    """A numeric result violated a bound by more than rounding can explain."""


class FusionRule(Enum):
    AND = "and"
    OR = "or"
    MAJORITY = "majority"


@dataclass(frozen=True)
class DetectorParams:
    """Single-detector parameters, all in linear power units.

    ``snr`` is the instantaneous SNR used by the AWGN formulas; ``snr_bar``
    is the average SNR of the fading distribution used by the Rayleigh
    averages.
    """

    n_samples: int
    sigma2: float = 1.0
    snr: float = 0.0
    snr_bar: float = 0.0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.snr >= 0:
            raise ValueError(f"snr must be nonnegative, got {self.snr}")
        if not self.snr_bar >= 0:
            raise ValueError(f"snr_bar must be nonnegative, got {self.snr_bar}")


@dataclass(frozen=True)
class DualThresholdParams:
    """Parameters of the dual-dynamic-threshold detector.

    ``history_len`` is the averaging window length, ``active_count`` the
    number of window slots carrying signal-plus-noise energy (0 for a
    window recorded entirely while the band was idle, ``history_len`` for
    one recorded entirely while it was busy), ``rho`` the noise-uncertainty
    factor scaling the two candidate thresholds.
    """

    history_len: int
    active_count: int
    rho: float
    base: DetectorParams

    def __post_init__(self) -> None:
        if self.history_len < 2:
            raise ValueError(f"history_len must be >= 2, got {self.history_len}")
        if not 0 <= self.active_count <= self.history_len:
            raise ValueError(
                f"active_count must lie in [0, {self.history_len}], got {self.active_count}"
            )
        if not self.rho >= 1.0:
            raise ValueError(f"rho must be >= 1, got {self.rho}")


@dataclass(frozen=True)
class AnalyticPoint:
    """One (false alarm, detection) operating point at a given threshold."""

    p_fa: float
    p_d: float
    threshold: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_fa <= 1.0:
            raise ValueError(f"p_fa out of [0,1]: {self.p_fa}")
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError(f"p_d out of [0,1]: {self.p_d}")
        if not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")


@dataclass(frozen=True)
class FusionSpec:
    """Hard-decision fusion rule at the fusion center.

    For MAJORITY, ``majority_l`` is the minimum number of votes required;
    it defaults to ceil(k_crs / 2) when not given.
    """

    rule: FusionRule
    k_crs: int
    majority_l: int | None = None

    def __post_init__(self) -> None:
        if self.k_crs < 1:
            raise ValueError(f"k_crs must be >= 1, got {self.k_crs}")
        if self.rule is FusionRule.MAJORITY and self.majority_l is None:
            object.__setattr__(self, "majority_l", (self.k_crs + 1) // 2)
        if self.majority_l is not None and not 1 <= self.majority_l <= self.k_crs:
            raise ValueError(
                f"majority_l must lie in [1, {self.k_crs}], got {self.majority_l}"
            )


def _clamp_probability(value: float, context: str) -> float:
    if value < 0.0:
        if value < -_CLAMP_RAISE:
            raise NumericalConsistencyError(f"{context} produced {value!r} < 0")
        return 0.0
    if value > 1.0:
        if value > 1.0 + _CLAMP_RAISE:
            raise NumericalConsistencyError(f"{context} produced {value!r} > 1")
        return 1.0
    return value


def q_function(x: float) -> float:
    """Standard Gaussian upper-tail probability Q(x)."""
    if not math.isfinite(x):
        raise ValueError(f"q_function requires finite input, got {x!r}")
    return 0.5 * math.erfc(x / _SQRT2)


def q_inverse(p: float) -> float:
    """Inverse of :func:`q_function` on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inverse requires 0 < p < 1, got {p!r}")
    return _SQRT2 * float(special.erfcinv(2.0 * p))


def cfar_threshold(p_fa_target: float, params: DetectorParams) -> float:
    """Energy threshold holding the false-alarm rate at ``p_fa_target``.

    Inverts the noise-only Gaussian energy model for the nominal noise
    variance (constant-false-alarm-rate rule).
    """
    n, s2 = params.n_samples, params.sigma2
    lam = n * s2 + math.sqrt(2.0 * n) * s2 * q_inverse(p_fa_target)
    if lam <= 0.0:
        raise ValueError(
            f"p_fa_target={p_fa_target} yields nonpositive threshold {lam} "
            f"for n_samples={n}, sigma2={s2}"
        )
    return lam


def _check_threshold(threshold: float) -> None:
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold!r}")


def pfa_conventional(threshold: float, params: DetectorParams) -> float:
    """False-alarm probability of the fixed-threshold energy detector."""
    _check_threshold(threshold)
    n, s2 = params.n_samples, params.sigma2
    return q_function((threshold - n * s2) / (math.sqrt(2.0 * n) * s2))


def pd_awgn(threshold: float, params: DetectorParams) -> float:
    """Detection probability at fixed SNR ``params.snr`` (no fading)."""
    _check_threshold(threshold)
    n = params.n_samples
    m = params.sigma2 * (params.snr + 1.0)
    return q_function((threshold - n * m) / (math.sqrt(2.0 * n) * m))


def _expect_over_exponential(integrand, context: str) -> float:
    """Integrate ``integrand(t) * exp(-t)`` over t >= 0 to within _QUAD_TOL.

    The unit-mean exponential weight is folded into ``integrand`` by the
    callers; here ``integrand`` already includes it.
    """
    res = integrate.quad(
        integrand, 0.0, math.inf, epsabs=_QUAD_TOL / 10, epsrel=1e-10, limit=200,
        full_output=1,
    )
    value, abserr = res[0], res[1]
    if len(res) < 4 and abserr <= _QUAD_TOL:
        return _clamp_probability(value, context)
    # Retry on a truncated domain; the discarded tail is below 4e-18.
    res = integrate.quad(
        integrand, 0.0, _QUAD_TRUNCATION, epsabs=_QUAD_TOL / 10, epsrel=1e-10,
        limit=200, full_output=1,
    )
    value, abserr = res[0], res[1]
    if len(res) < 4 and abserr <= _QUAD_TOL:
        return _clamp_probability(value, context)
    message = res[3] if len(res) >= 4 else "error estimate above tolerance"
    raise NumericalConsistencyError(
        f"quadrature failed for {context}: value={value!r}, abserr={abserr!r}: {message}"
    )


def pd_rayleigh(threshold: float, params: DetectorParams) -> float:
    """Detection probability averaged over Rayleigh fading.

    Averages :func:`pd_awgn` against an exponential SNR density with mean
    ``params.snr_bar``.
    """
    _check_threshold(threshold)
    gbar = params.snr_bar
    if gbar == 0.0:
        return pd_awgn(threshold, replace(params, snr=0.0))

    def integrand(t: float) -> float:
        return pd_awgn(threshold, replace(params, snr=gbar * t)) * math.exp(-t)

    return _expect_over_exponential(integrand, f"pd_rayleigh(threshold={threshold})")


def avg_energy_moments(p: DualThresholdParams) -> tuple[float, float]:
    """Mean and variance of the window-averaged energy.

    The window mixes ``active_count`` signal-plus-noise slots with
    ``history_len - active_count`` noise-only slots, each slot Gaussian
    under the large-sample energy model.
    """
    n = p.base.n_samples
    s2 = p.base.sigma2
    g1 = p.base.snr + 1.0
    m, ell = p.active_count, p.history_len
    mu = (m * n * s2 * g1 + (ell - m) * n * s2) / ell
    var = (m * 2.0 * n * s2 * s2 * g1 * g1 + (ell - m) * 2.0 * n * s2 * s2) / (ell * ell)
    return mu, var


def _predictor_weight(threshold: float, p: DualThresholdParams) -> float:
    mu, var = avg_energy_moments(p)
    return q_function((threshold - mu) / math.sqrt(var))


def pfa_dual_threshold(threshold: float, p: DualThresholdParams) -> float:
    """False-alarm probability of the dual-dynamic-threshold detector.

    The activity predictor fires with probability w = P(E_avg >= threshold)
    and lowers the decision threshold to threshold/rho; otherwise the
    threshold is raised to rho*threshold. Exceedance under noise-only
    energy statistics is mixed accordingly (the current-event energy is
    treated as independent of the window average).
    """
    _check_threshold(threshold)
    w = _predictor_weight(threshold, p)
    at_low = pfa_conventional(threshold / p.rho, p.base)
    at_high = pfa_conventional(p.rho * threshold, p.base)
    return _clamp_probability(w * (at_low - at_high) + at_high, "pfa_dual_threshold")


def pd_dual_threshold(threshold: float, p: DualThresholdParams) -> float:
    """Detection probability of the dual-threshold detector at fixed SNR."""
    _check_threshold(threshold)
    w = _predictor_weight(threshold, p)
    at_low = pd_awgn(threshold / p.rho, p.base)
    at_high = pd_awgn(p.rho * threshold, p.base)
    return _clamp_probability(w * (at_low - at_high) + at_high, "pd_dual_threshold")


def pd_dual_threshold_rayleigh(threshold: float, p: DualThresholdParams) -> float:
    """Rayleigh-fading average of :func:`pd_dual_threshold`.

    The window moments depend on the instantaneous SNR, so the full
    expression is averaged, not just the exceedance terms.
    """
    _check_threshold(threshold)
    gbar = p.base.snr_bar
    if gbar == 0.0:
        return pd_dual_threshold(threshold, replace(p, base=replace(p.base, snr=0.0)))

    def integrand(t: float) -> float:
        point = replace(p, base=replace(p.base, snr=gbar * t))
        return pd_dual_threshold(threshold, point) * math.exp(-t)

    return _expect_over_exponential(
        integrand, f"pd_dual_threshold_rayleigh(threshold={threshold})"
    )


def fuse_probability(p_single: float, spec: FusionSpec) -> float:
    """Fusion-center probability given one i.i.d. per-detector probability.

    Works for both false-alarm and detection probabilities since the
    fusion algebra is the same.
    """
    if not 0.0 <= p_single <= 1.0:
        raise ValueError(f"p_single must lie in [0, 1], got {p_single!r}")
    k = spec.k_crs
    if spec.rule is FusionRule.AND:
        return _clamp_probability(p_single**k, "fuse_probability")
    if spec.rule is FusionRule.OR:
        return _clamp_probability(1.0 - (1.0 - p_single) ** k, "fuse_probability")
    ell = spec.majority_l
    # l = 1 and l = K collapse to OR and AND; use the closed forms so the
    # boundary identities hold exactly.
    if ell == 1:
        return _clamp_probability(1.0 - (1.0 - p_single) ** k, "fuse_probability")
    if ell == k:
        return _clamp_probability(p_single**k, "fuse_probability")
    total = sum(
        math.comb(k, t) * p_single**t * (1.0 - p_single) ** (k - t)
        for t in range(ell, k + 1)
    )
    return _clamp_probability(total, "fuse_probability")
