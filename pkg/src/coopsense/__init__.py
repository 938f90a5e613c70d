"""Cooperative spectrum sensing simulator and analytics.

Hard-decision cooperative sensing with energy detection under noise
uncertainty: a dual-dynamic-threshold detector driven by an activity
predictor and a windowed noise-uncertainty-factor estimate, its closed-form
performance theory, and a reproducible Monte Carlo harness that validates
theory against simulation.
"""

__version__ = "0.1.0"

from .analytic import (
    AnalyticPoint,
    DetectorParams,
    DualThresholdParams,
    FusionRule,
    FusionSpec,
    NumericalConsistencyError,
    avg_energy_moments,
    cfar_threshold,
    fuse_probability,
    pd_awgn,
    pd_dual_threshold,
    pd_dual_threshold_rayleigh,
    pd_rayleigh,
    pfa_conventional,
    pfa_dual_threshold,
    q_function,
    q_inverse,
)
from .detector import (
    CrState,
    Decision,
    LocalDecision,
    WarmupError,
    average_energy,
    compute_energy,
    decide_conventional,
    decide_local,
    estimate_noise_variance,
    estimate_rho,
    push_history,
    select_threshold,
)
from .fusion import fuse_hard, fuse_soft_mrc, mrc_statistic, mrc_threshold_for_pfa
from .montecarlo import (
    DEFAULT_PFA_GRID,
    DetectorScheme,
    EmpiricalResult,
    ExperimentConfig,
    InsufficientDataError,
    MrcFusion,
    RocCurve,
    RocPoint,
    VarianceSource,
    auc,
    auc_sigma,
    crs_needed_for,
    nested_roc_sweep,
    roc_sweep,
    run_experiment,
)
from .simchan import (
    Hypothesis,
    ScenarioConfig,
    SensingEvent,
    draw_noise_sigma2,
    draw_rayleigh_gamma,
    expected_rho_estimate,
    gen_bpsk,
    gen_event,
    pu_hypothesis_sequence,
    step_pu_activity,
)

__all__ = [name for name in dir() if not name.startswith("_")]
