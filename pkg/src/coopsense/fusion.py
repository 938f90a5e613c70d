"""Fusion center: hard-decision combining and the soft MRC baseline.

The hard path applies AND/OR/Majority to the collected one-bit decisions.
The soft path forms an SNR-weighted (maximal-ratio) combination of the
reported energies and compares it against a threshold placed by the same
constant-false-alarm-rate rule as the hard detectors, so both families sit
on a common footing in comparisons.
"""

from __future__ import annotations

import math

import numpy as np

from .analytic import DetectorParams, FusionRule, FusionSpec, q_inverse
from .detector import Decision

__all__ = ["fuse_hard", "fuse_soft_mrc", "mrc_threshold_for_pfa", "mrc_statistic"]


def fuse_hard(decisions, spec: FusionSpec) -> Decision:
    """Combine per-detector bits under the given fusion rule."""
    bits = [int(d) for d in decisions]
    if len(bits) != spec.k_crs:
        raise ValueError(
            f"expected {spec.k_crs} decisions, got {len(bits)}"
        )
    if any(b not in (0, 1) for b in bits):
        raise ValueError("decisions must be binary")
    votes = sum(bits)
    if spec.rule is FusionRule.AND:
        present = votes == spec.k_crs
    elif spec.rule is FusionRule.OR:
        present = votes >= 1
    else:
        present = votes >= spec.majority_l
    return Decision.PRESENT if present else Decision.ABSENT


def _mrc_weights(gammas) -> np.ndarray:
    g = np.asarray(gammas, dtype=np.float64)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("gammas must be a nonempty 1-d sequence")
    if (g < 0).any():
        raise ValueError("gammas must be nonnegative")
    total = g.sum()
    if total == 0.0:
        raise ValueError("degenerate MRC weights: all SNRs are zero")
    return g / total


def mrc_statistic(energies, gammas) -> float:
    """SNR-weighted energy combination with weights normalized to one."""
    e = np.asarray(energies, dtype=np.float64)
    w = _mrc_weights(gammas)
    if e.shape != w.shape:
        raise ValueError(
            f"energies and gammas must have equal length, got {e.shape} vs {w.shape}"
        )
    return float(w @ e)


def fuse_soft_mrc(energies, gammas, threshold: float) -> Decision:
    """Soft decision: combined statistic at or above the threshold is present."""
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold!r}")
    t = mrc_statistic(energies, gammas)
    return Decision.PRESENT if t >= threshold else Decision.ABSENT


def mrc_threshold_for_pfa(p_fa_target: float, gammas, params: DetectorParams) -> float:
    """Threshold holding the combined statistic's noise-only exceedance rate.

    Under noise only the weighted statistic is Gaussian with mean
    N*sigma2 (weights sum to one) and variance 2*N*sigma2**2 * sum(w**2).
    """
    if not 0.0 < p_fa_target < 1.0:
        raise ValueError(f"p_fa_target must lie in (0, 1), got {p_fa_target!r}")
    w = _mrc_weights(gammas)
    n, s2 = params.n_samples, params.sigma2
    std = math.sqrt(2.0 * n * s2 * s2 * float(w @ w))
    threshold = n * s2 + std * q_inverse(p_fa_target)
    if threshold <= 0:
        raise ValueError(
            f"p_fa_target={p_fa_target} yields nonpositive MRC threshold {threshold}"
        )
    return threshold
