"""Per-detector sensing logic.

Energy measurement, the rolling history of energies and noise-variance
estimates, the windowed noise-uncertainty-factor estimator, activity
prediction, dynamic threshold selection, and the local binary decision.
The fixed-threshold detector is also here as the baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "Decision",
    "WarmupError",
    "CrState",
    "LocalDecision",
    "compute_energy",
    "estimate_noise_variance",
    "push_history",
    "average_energy",
    "estimate_rho",
    "select_threshold",
    "decide_local",
    "decide_conventional",
]


class Decision(IntEnum):
    ABSENT = 0
    PRESENT = 1


class WarmupError(RuntimeError):
    """A windowed quantity was requested before the history buffers filled."""


class CrState:
    """Rolling history of the last ``capacity`` (energy, variance) pairs.

    The two buffers stay index-aligned: slot i always holds the energy and
    the noise-variance estimate of the same past sensing event. Single-owner
    mutable state: confine an instance to one logical thread at a time.
    """

    __slots__ = ("capacity", "_energies", "_sigma2", "_next", "_count")

    def __init__(self, capacity: int):
        if capacity < 2:
            raise ValueError(f"capacity must be >= 2, got {capacity}")
        self.capacity = capacity
        self._energies = np.zeros(capacity)
        self._sigma2 = np.zeros(capacity)
        self._next = 0
        self._count = 0

    def __len__(self) -> int:
        return self._count

    @property
    def full(self) -> bool:
        return self._count == self.capacity

    def _chronological(self, buf: np.ndarray) -> np.ndarray:
        if self._count < self.capacity:
            return buf[: self._count].copy()
        return np.roll(buf, -self._next)

    @property
    def energies(self) -> np.ndarray:
        """Stored energies, oldest first."""
        return self._chronological(self._energies)

    @property
    def sigma2_estimates(self) -> np.ndarray:
        """Stored variance estimates, oldest first."""
        return self._chronological(self._sigma2)


def compute_energy(samples) -> float:
    """Sum of squared magnitudes of the received samples."""
    x = np.asarray(samples)
    if x.size == 0:
        raise ValueError("compute_energy requires a nonempty sample sequence")
    if np.iscomplexobj(x):
        return float(np.vdot(x, x).real)
    x = x.astype(np.float64, copy=False)
    return float(x @ x)


def estimate_noise_variance(noise_samples) -> float:
    """Mean squared magnitude of a noise-only reference window."""
    x = np.asarray(noise_samples)
    if x.size == 0:
        raise ValueError("estimate_noise_variance requires a nonempty sequence")
    return compute_energy(x) / x.size


def push_history(state: CrState, energy: float, sigma2_hat: float) -> CrState:
    """Record one (energy, variance-estimate) pair, evicting the oldest."""
    if not sigma2_hat > 0:
        raise ValueError(f"sigma2_hat must be positive, got {sigma2_hat!r}")
    state._energies[state._next] = energy
    state._sigma2[state._next] = sigma2_hat
    state._next = (state._next + 1) % state.capacity
    if state._count < state.capacity:
        state._count += 1
    return state


def _require_full(state: CrState, what: str) -> None:
    if not state.full:
        raise WarmupError(
            f"{what} needs a full history ({len(state)}/{state.capacity} recorded)"
        )


def average_energy(state: CrState) -> float:
    """Mean of the stored energies (current event included by the caller)."""
    _require_full(state, "average_energy")
    return float(state._energies.sum()) / state.capacity


def estimate_rho(state: CrState) -> float:
    """Windowed noise-uncertainty factor: max over mean of stored variances.

    Evaluated as capacity / sum(sigma2_i / max) so a constant buffer yields
    exactly 1.0 and the result is invariant to rescaling all entries. The
    final guard keeps the estimate at >= 1 against last-bit rounding.
    """
    _require_full(state, "estimate_rho")
    buf = state._sigma2
    peak = buf.max()
    if not peak > 0:
        raise ValueError("variance history must be positive")
    rho = state.capacity / float((buf / peak).sum())
    return max(rho, 1.0)


def select_threshold(e_avg: float, lam: float, rho: float) -> float:
    """Pick the dynamic threshold for the current event.

    Predicted-present (window average at or above the static threshold)
    lowers the threshold to lam/rho; predicted-absent raises it to rho*lam.
    """
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam!r}")
    if not rho >= 1.0:
        raise ValueError(f"rho must be >= 1, got {rho!r}")
    return lam / rho if e_avg >= lam else rho * lam


@dataclass(frozen=True)
class LocalDecision:
    """One detector's decision plus the diagnostics that produced it."""

    bit: Decision
    threshold_used: float
    rho_hat: float
    e_avg: float
    predicted_present: bool


def decide_local(state: CrState, current_energy: float, lam: float) -> LocalDecision:
    """Dual-dynamic-threshold decision for the current event.

    The caller must have pushed the current event's (energy, variance
    estimate) pair already; equality with the selected threshold counts as
    present, consistent with the prediction comparison.
    """
    _require_full(state, "decide_local")
    e_avg = average_energy(state)
    rho = estimate_rho(state)
    threshold = select_threshold(e_avg, lam, rho)
    bit = Decision.PRESENT if current_energy >= threshold else Decision.ABSENT
    return LocalDecision(
        bit=bit,
        threshold_used=threshold,
        rho_hat=rho,
        e_avg=e_avg,
        predicted_present=e_avg >= lam,
    )


def decide_conventional(current_energy: float, lam: float) -> Decision:
    """Fixed-threshold decision: present iff the energy reaches lam."""
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam!r}")
    return Decision.PRESENT if current_energy >= lam else Decision.ABSENT
