"""Monte Carlo experiment engine.

Runs seeded trials of the full pipeline (world generation, per-detector
sensing, fusion), counts empirical false-alarm/detection rates conditioned
on the true hypothesis, sweeps threshold targets into ROC curves, and
attaches the closed-form predictions for cross-validation.

Events are embarrassingly parallel: every event draws from its own
counter-based stream, the activity sequence is fixed up front, and a worker
assigned events [a, b) regenerates the preceding window to warm its
detector history. Counts are therefore identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .analytic import (
    DetectorParams,
    DualThresholdParams,
    FusionRule,
    FusionSpec,
    cfar_threshold,
    fuse_probability,
    pd_dual_threshold_rayleigh,
    pd_rayleigh,
    pfa_conventional,
    pfa_dual_threshold,
    q_inverse,
)
from .detector import (
    CrState,
    decide_local,
    estimate_noise_variance,
    push_history,
)
from .fusion import fuse_hard, fuse_soft_mrc, mrc_threshold_for_pfa
from .simchan import (
    PURPOSE_REFERENCE,
    EventStreamPool,
    Hypothesis,
    ScenarioConfig,
    StreamPool,
    expected_rho_estimate,
    gen_event,
    gen_reference_noise,
    pu_hypothesis_sequence,
)

__all__ = [
    "InsufficientDataError",
    "DetectorScheme",
    "VarianceSource",
    "MrcFusion",
    "ExperimentConfig",
    "EmpiricalResult",
    "RocPoint",
    "RocCurve",
    "DEFAULT_PFA_GRID",
    "wilson_interval",
    "run_experiment",
    "run_paths_experiment",
    "decision_streams",
    "roc_sweep",
    "nested_roc_sweep",
    "auc",
    "auc_sigma",
    "crs_needed_for",
]

DEFAULT_PFA_GRID = (0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5)

_Z95 = 1.959963984540054


class InsufficientDataError(RuntimeError):
    """Too few events under one hypothesis to form the requested rate."""


class DetectorScheme(Enum):
    CONVENTIONAL = "conventional"
    DUAL_THRESHOLD = "dual"


class VarianceSource(Enum):
    """Where each detector's per-event noise-variance estimate comes from."""

    GENIE = "genie"  # exact per-event variance, isolates estimator noise
    ESTIMATED = "estimated"  # mean square of a noise-only reference window


@dataclass(frozen=True)
class MrcFusion:
    """Marker selecting the soft maximal-ratio-combining path."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    detector: DetectorScheme
    fusion: FusionSpec | MrcFusion
    history_len: int = 15
    pfa_grid: tuple[float, ...] = DEFAULT_PFA_GRID
    n_events: int = 60_000
    warmup_excluded: bool = True
    variance_source: VarianceSource = VarianceSource.GENIE
    ref_samples: int | None = None
    workers: int = 1
    label: str | None = None

    def __post_init__(self) -> None:
        if self.history_len < 2:
            raise ValueError(f"history_len must be >= 2, got {self.history_len}")
        if self.n_events < self.history_len:
            raise ValueError(
                f"n_events must be >= history_len, got {self.n_events} < {self.history_len}"
            )
        grid = tuple(float(p) for p in self.pfa_grid)
        if not grid:
            raise ValueError("pfa_grid must be nonempty")
        if any(not 0.0 < p < 1.0 for p in grid):
            raise ValueError(f"pfa_grid values must lie in (0, 1): {grid}")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError(f"pfa_grid must be strictly increasing: {grid}")
        object.__setattr__(self, "pfa_grid", grid)
        if isinstance(self.fusion, FusionSpec) and self.fusion.k_crs != self.scenario.k_crs:
            raise ValueError(
                f"fusion.k_crs={self.fusion.k_crs} does not match "
                f"scenario.k_crs={self.scenario.k_crs}"
            )
        if self.ref_samples is not None and self.ref_samples < 1:
            raise ValueError(f"ref_samples must be >= 1, got {self.ref_samples}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    @property
    def kind(self) -> str:
        if isinstance(self.fusion, MrcFusion):
            return "mrc"
        return self.detector.value

    @property
    def curve_label(self) -> str:
        if self.label is not None:
            return self.label
        if isinstance(self.fusion, MrcFusion):
            return "mrc"
        rule = self.fusion.rule
        name = rule.value if rule is not FusionRule.MAJORITY else f"majority{self.fusion.majority_l}"
        return f"{self.kind}-{name}"


@dataclass(frozen=True)
class EmpiricalResult:
    """Counted rates for one experiment at one threshold target."""

    pfa_hat: float
    pd_hat: float
    n_h0: int
    n_h1: int
    false_alarms: int
    detections: int
    ci95_pfa: tuple[float, float]
    ci95_pd: tuple[float, float]
    seed: int


@dataclass(frozen=True)
class RocPoint:
    pfa_target: float
    pfa_hat: float
    pfa_ci_lo: float
    pfa_ci_hi: float
    pd_hat: float
    pd_ci_lo: float
    pd_ci_hi: float
    pfa_theory: float
    pd_theory: float
    n_h0: int
    n_h1: int
    seed: int


@dataclass(frozen=True)
class RocCurve:
    label: str
    points: tuple[RocPoint, ...]


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval; well behaved near rates of 0 and 1."""
    if trials <= 0:
        raise ValueError("wilson_interval requires trials > 0")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2.0 * trials)) / denom
    half = (
        z
        * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials))
        / denom
    )
    # containment of the point estimate must survive last-bit rounding
    lo = min(max(0.0, center - half), phat)
    hi = max(min(1.0, center + half), phat)
    return (lo, hi)


def _derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence((seed, index)).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# Core counting pass
# ---------------------------------------------------------------------------


def _chunk_counts(args):
    (
        scenario,
        history_len,
        paths,
        lam,
        pfa_target,
        variance_source,
        ref_samples,
        hypotheses,
        start,
        stop,
        warmup_excluded,
        collect,
        k_values,
    ) = args
    k_full = scenario.k_crs
    kv = np.asarray(k_values, dtype=np.int64)
    nested = not (kv.size == 1 and kv[0] == k_full)
    kv_idx = kv - 1

    need_dual = any(kind == "dual" for kind, _ in paths)
    need_mrc = any(kind == "mrc" for kind, _ in paths)
    params = DetectorParams(scenario.n_samples, scenario.sigma2_nominal)
    qinv_target = q_inverse(pfa_target)
    n_s2 = scenario.n_samples * scenario.sigma2_nominal
    mrc_var_base = 2.0 * scenario.n_samples * scenario.sigma2_nominal**2

    pool = EventStreamPool(k_full)
    ref_pool = StreamPool() if variance_source is VarianceSource.ESTIMATED else None
    states = [CrState(history_len) for _ in range(k_full)] if need_dual else None
    warm_limit = history_len - 1
    first = max(0, start - warm_limit) if need_dual else start

    counts = np.zeros((len(paths), kv.size, 4), dtype=np.int64)
    fused_streams = [[] for _ in paths] if collect else None
    conv_bit_rows = [] if collect else None
    dual_bit_rows = [] if collect else None

    for i in range(first, stop):
        present = bool(hypotheses[i])
        hyp = Hypothesis.H1 if present else Hypothesis.H0
        event = gen_event(scenario, hyp, pool.streams(scenario, i))
        energies = np.einsum("ij,ij->i", event.per_cr_samples, event.per_cr_samples)

        if need_dual:
            if variance_source is VarianceSource.GENIE:
                s2_hat = event.per_cr_true_sigma2
            else:
                s2_hat = np.empty(k_full)
                for j in range(k_full):
                    rng = ref_pool.rekey(scenario.seed, PURPOSE_REFERENCE, i, j)
                    window = gen_reference_noise(
                        ref_samples, float(event.per_cr_true_sigma2[j]), rng
                    )
                    s2_hat[j] = estimate_noise_variance(window)
            for j in range(k_full):
                push_history(states[j], float(energies[j]), float(s2_hat[j]))

        countable = i >= start and (not warmup_excluded or i >= warm_limit)
        if not countable:
            continue

        conv_bits = (energies >= lam).astype(np.int64)
        dual_bits = None
        if need_dual:
            if states[0].full:
                dual_bits = np.fromiter(
                    (
                        decide_local(states[j], float(energies[j]), lam).bit
                        for j in range(k_full)
                    ),
                    dtype=np.int64,
                    count=k_full,
                )
            else:
                # warm-up fallback: behave as the fixed-threshold detector
                dual_bits = conv_bits

        if need_mrc:
            gam = event.per_cr_gamma
            if nested:
                cg = np.cumsum(gam)
                cge = np.cumsum(gam * energies)
                cg2 = np.cumsum(gam * gam)
                sg = cg[kv_idx]
                if np.any(sg == 0.0):
                    raise ValueError("degenerate MRC weights: all SNRs are zero")
                t_stat = cge[kv_idx] / sg
                thr = n_s2 + np.sqrt(mrc_var_base * cg2[kv_idx] / (sg * sg)) * qinv_target
                mrc_fused = (t_stat >= thr).astype(np.int64)
            else:
                thr = mrc_threshold_for_pfa(pfa_target, gam, params)
                mrc_fused = np.array(
                    [int(fuse_soft_mrc(energies, gam, thr))], dtype=np.int64
                )

        col = 3 if present else 2
        hyp_col = 1 if present else 0
        for p_idx, (kind, fus) in enumerate(paths):
            if kind == "mrc":
                fused = mrc_fused
            else:
                bits = conv_bits if kind == "conventional" else dual_bits
                if nested:
                    if fus.rule is FusionRule.OR:
                        acc = np.logical_or.accumulate(bits)
                    elif fus.rule is FusionRule.AND:
                        acc = np.logical_and.accumulate(bits)
                    else:
                        raise ValueError(
                            "nested k sweeps support only OR/AND hard rules"
                        )
                    fused = acc[kv_idx].astype(np.int64)
                else:
                    fused = np.array(
                        [int(fuse_hard(bits, fus))], dtype=np.int64
                    )
            counts[p_idx, :, hyp_col] += 1
            counts[p_idx, :, col] += fused
            if collect:
                fused_streams[p_idx].append(int(fused[-1]))
        if collect:
            conv_bit_rows.append(conv_bits.copy())
            if need_dual:
                dual_bit_rows.append(dual_bits.copy())

    collected = None
    if collect:
        collected = {
            "fused": [np.asarray(s, dtype=np.uint8) for s in fused_streams],
            "conventional_bits": (
                np.vstack(conv_bit_rows).astype(np.uint8)
                if conv_bit_rows
                else np.zeros((0, k_full), dtype=np.uint8)
            ),
            "dual_bits": (
                np.vstack(dual_bit_rows).astype(np.uint8)
                if dual_bit_rows
                else None
            ),
        }
    return counts, collected


def _run_paths(
    scenario: ScenarioConfig,
    history_len: int,
    paths,
    pfa_target: float,
    n_events: int,
    *,
    warmup_excluded: bool = True,
    variance_source: VarianceSource = VarianceSource.GENIE,
    ref_samples: int | None = None,
    workers: int = 1,
    collect: bool = False,
    k_values=None,
):
    if not 0.0 < pfa_target < 1.0:
        raise ValueError(f"pfa_target must lie in (0, 1), got {pfa_target!r}")
    if n_events < history_len:
        raise ValueError("n_events must cover at least one full history window")
    params = DetectorParams(scenario.n_samples, scenario.sigma2_nominal)
    lam = cfar_threshold(pfa_target, params)
    hyps = pu_hypothesis_sequence(scenario, n_events)
    ref_n = ref_samples if ref_samples is not None else scenario.n_samples
    if k_values is None:
        k_values = (scenario.k_crs,)
    k_values = tuple(int(k) for k in k_values)
    if any(not 1 <= k <= scenario.k_crs for k in k_values):
        raise ValueError(f"k_values must lie in [1, {scenario.k_crs}]: {k_values}")

    def chunk_args(a: int, b: int):
        return (
            scenario,
            history_len,
            tuple(paths),
            lam,
            pfa_target,
            variance_source,
            ref_n,
            hyps,
            a,
            b,
            warmup_excluded,
            collect,
            k_values,
        )

    n_workers = max(1, min(workers, n_events))
    if n_workers == 1:
        results = [_chunk_counts(chunk_args(0, n_events))]
    else:
        bounds = np.linspace(0, n_events, n_workers + 1).astype(int)
        jobs = [
            chunk_args(int(a), int(b))
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_chunk_counts, jobs))

    counts = sum(r[0] for r in results)
    collected = None
    if collect:
        collected = {
            "fused": [
                np.concatenate([r[1]["fused"][p] for r in results])
                for p in range(len(paths))
            ],
            "conventional_bits": np.vstack(
                [r[1]["conventional_bits"] for r in results]
            ),
            "dual_bits": (
                np.vstack([r[1]["dual_bits"] for r in results])
                if results[0][1]["dual_bits"] is not None
                else None
            ),
        }
    return counts, collected


def _result_from_counts(row: np.ndarray, seed: int) -> EmpiricalResult:
    n_h0, n_h1, fa, det = (int(v) for v in row)
    if n_h0 == 0 or n_h1 == 0:
        raise InsufficientDataError(
            f"need events under both hypotheses after warm-up, got n_h0={n_h0}, "
            f"n_h1={n_h1}; raise n_events or adjust duty cycle"
        )
    return EmpiricalResult(
        pfa_hat=fa / n_h0,
        pd_hat=det / n_h1,
        n_h0=n_h0,
        n_h1=n_h1,
        false_alarms=fa,
        detections=det,
        ci95_pfa=wilson_interval(fa, n_h0),
        ci95_pd=wilson_interval(det, n_h1),
        seed=seed,
    )


def _path_of(config: ExperimentConfig):
    if isinstance(config.fusion, MrcFusion):
        return ("mrc", None)
    return (config.detector.value, config.fusion)


def run_experiment(config: ExperimentConfig, p_fa_target: float) -> EmpiricalResult:
    """Simulate one experiment at one threshold target and count rates."""
    counts, _ = _run_paths(
        config.scenario,
        config.history_len,
        (_path_of(config),),
        p_fa_target,
        config.n_events,
        warmup_excluded=config.warmup_excluded,
        variance_source=config.variance_source,
        ref_samples=config.ref_samples,
        workers=config.workers,
    )
    return _result_from_counts(counts[0, 0], config.scenario.seed)


def run_paths_experiment(
    configs, p_fa_target: float
) -> list[EmpiricalResult]:
    """Run several schemes against one shared simulated world.

    All configs must agree on everything except detector/fusion; per-event
    worlds are generated once, so scheme comparisons are paired.
    """
    base = configs[0]
    for cfg in configs[1:]:
        if cfg.scenario != base.scenario or cfg.history_len != base.history_len or (
            cfg.n_events != base.n_events
            or cfg.warmup_excluded != base.warmup_excluded
            or cfg.variance_source != base.variance_source
            or cfg.ref_samples != base.ref_samples
        ):
            raise ValueError("shared-world configs must differ only in scheme/fusion")
    counts, _ = _run_paths(
        base.scenario,
        base.history_len,
        tuple(_path_of(c) for c in configs),
        p_fa_target,
        base.n_events,
        warmup_excluded=base.warmup_excluded,
        variance_source=base.variance_source,
        ref_samples=base.ref_samples,
        workers=base.workers,
    )
    return [
        _result_from_counts(counts[i, 0], base.scenario.seed)
        for i in range(len(configs))
    ]


def decision_streams(config: ExperimentConfig, p_fa_target: float):
    """Fused and per-detector decision bit streams for the counted events.

    Returns a dict with the fixed-threshold per-detector bits, the
    dual-threshold per-detector bits (when that scheme is selected), and the
    fused stream. Intended for equivalence and determinism checks.
    """
    paths = [("conventional", _as_fusion(config)), ("dual", _as_fusion(config))]
    counts, collected = _run_paths(
        config.scenario,
        config.history_len,
        tuple(paths),
        p_fa_target,
        config.n_events,
        warmup_excluded=config.warmup_excluded,
        variance_source=config.variance_source,
        ref_samples=config.ref_samples,
        workers=config.workers,
        collect=True,
    )
    return {
        "conventional_bits": collected["conventional_bits"],
        "dual_bits": collected["dual_bits"],
        "conventional_fused": collected["fused"][0],
        "dual_fused": collected["fused"][1],
        "counts": counts[:, 0, :],
    }


def _as_fusion(config: ExperimentConfig) -> FusionSpec:
    if isinstance(config.fusion, MrcFusion):
        return FusionSpec(FusionRule.OR, config.scenario.k_crs)
    return config.fusion


def _theory_point(config: ExperimentConfig, p_fa_target: float) -> tuple[float, float]:
    """Closed-form (pfa, pd) prediction for one grid point.

    Dual-threshold predictions use all-idle and all-busy history windows
    for the false-alarm and detection sides respectively, with the
    noise-uncertainty factor set to the model-implied mean of the windowed
    estimator. The MRC pfa prediction is its construction target; no
    closed-form fading average is attached for its pd.
    """
    sc = config.scenario
    params = DetectorParams(sc.n_samples, sc.sigma2_nominal, snr_bar=sc.snr_bar)
    if isinstance(config.fusion, MrcFusion):
        return p_fa_target, math.nan
    lam = cfar_threshold(p_fa_target, params)
    if config.detector is DetectorScheme.CONVENTIONAL:
        pfa_j = pfa_conventional(lam, params)
        pd_j = pd_rayleigh(lam, params)
    else:
        rho = expected_rho_estimate(sc.uncertainty_db, config.history_len)
        idle = DualThresholdParams(config.history_len, 0, rho, params)
        busy = DualThresholdParams(config.history_len, config.history_len, rho, params)
        pfa_j = pfa_dual_threshold(lam, idle)
        pd_j = pd_dual_threshold_rayleigh(lam, busy)
    spec = config.fusion
    return fuse_probability(pfa_j, spec), fuse_probability(pd_j, spec)


def _roc_point(
    config: ExperimentConfig, index: int, p_fa_target: float
) -> RocPoint:
    seed_i = _derived_seed(config.scenario.seed, index)
    cfg = replace(config, scenario=replace(config.scenario, seed=seed_i))
    res = run_experiment(cfg, p_fa_target)
    pfa_th, pd_th = _theory_point(config, p_fa_target)
    return RocPoint(
        pfa_target=p_fa_target,
        pfa_hat=res.pfa_hat,
        pfa_ci_lo=res.ci95_pfa[0],
        pfa_ci_hi=res.ci95_pfa[1],
        pd_hat=res.pd_hat,
        pd_ci_lo=res.ci95_pd[0],
        pd_ci_hi=res.ci95_pd[1],
        pfa_theory=pfa_th,
        pd_theory=pd_th,
        n_h0=res.n_h0,
        n_h1=res.n_h1,
        seed=seed_i,
    )


def roc_sweep(config: ExperimentConfig) -> RocCurve:
    """One experiment per grid point, with independently derived seeds."""
    points = tuple(
        _roc_point(config, i, target) for i, target in enumerate(config.pfa_grid)
    )
    return RocCurve(label=config.curve_label, points=points)


def nested_roc_sweep(
    config: ExperimentConfig, k_values
) -> dict[int, RocCurve]:
    """ROC curves for every detector-count prefix in one simulation pass.

    Detectors are i.i.d. and each owns its own random stream, so the first
    k detectors of a K-detector world are exactly the k-detector world;
    one pass at the largest count yields every smaller count for free.
    Supports OR/AND hard rules and MRC.
    """
    k_values = tuple(sorted(int(k) for k in k_values))
    if k_values[-1] != config.scenario.k_crs:
        raise ValueError("largest k value must equal scenario.k_crs")
    if isinstance(config.fusion, FusionSpec) and config.fusion.rule is FusionRule.MAJORITY:
        raise ValueError("nested sweeps support only OR/AND hard rules or MRC")
    path = _path_of(config)
    per_k_points: dict[int, list[RocPoint]] = {k: [] for k in k_values}
    for i, target in enumerate(config.pfa_grid):
        seed_i = _derived_seed(config.scenario.seed, i)
        scenario_i = replace(config.scenario, seed=seed_i)
        counts, _ = _run_paths(
            scenario_i,
            config.history_len,
            (path,),
            target,
            config.n_events,
            warmup_excluded=config.warmup_excluded,
            variance_source=config.variance_source,
            ref_samples=config.ref_samples,
            workers=config.workers,
            k_values=k_values,
        )
        theory_cache: dict[int, tuple[float, float]] = {}
        for k_idx, k in enumerate(k_values):
            res = _result_from_counts(counts[0, k_idx], seed_i)
            if k not in theory_cache:
                theory_cache[k] = _theory_point(_config_at_k(config, k), target)
            pfa_th, pd_th = theory_cache[k]
            per_k_points[k].append(
                RocPoint(
                    pfa_target=target,
                    pfa_hat=res.pfa_hat,
                    pfa_ci_lo=res.ci95_pfa[0],
                    pfa_ci_hi=res.ci95_pfa[1],
                    pd_hat=res.pd_hat,
                    pd_ci_lo=res.ci95_pd[0],
                    pd_ci_hi=res.ci95_pd[1],
                    pfa_theory=pfa_th,
                    pd_theory=pd_th,
                    n_h0=res.n_h0,
                    n_h1=res.n_h1,
                    seed=seed_i,
                )
            )
    return {
        k: RocCurve(label=f"{_config_at_k(config, k).curve_label}-k{k}", points=tuple(pts))
        for k, pts in per_k_points.items()
    }


def _config_at_k(config: ExperimentConfig, k: int) -> ExperimentConfig:
    scenario = replace(config.scenario, k_crs=k)
    fusion = config.fusion
    if isinstance(fusion, FusionSpec):
        majority_l = fusion.majority_l if fusion.rule is FusionRule.MAJORITY else None
        if majority_l is not None:
            majority_l = min(majority_l, k)
        fusion = FusionSpec(fusion.rule, k, majority_l)
    return replace(config, scenario=scenario, fusion=fusion, label=None)


def _sorted_xy(curve: RocCurve):
    pts = sorted(curve.points, key=lambda p: (p.pfa_hat, p.pd_hat))
    return pts


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under (pfa_hat, pd_hat), anchored at (0,0) and (1,1)."""
    if len(curve.points) < 2:
        raise ValueError("auc requires at least 2 points")
    pts = _sorted_xy(curve)
    xs = [0.0] + [p.pfa_hat for p in pts] + [1.0]
    ys = [0.0] + [p.pd_hat for p in pts] + [1.0]
    return sum(
        (x1 - x0) * (y1 + y0) / 2.0 for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:])
    )


def auc_sigma(curve: RocCurve) -> float:
    """Delta-method standard deviation of :func:`auc` from binomial noise.

    Grid points use independent seeds and the two coordinates of a point
    come from disjoint event sets, so variances add.
    """
    if len(curve.points) < 2:
        raise ValueError("auc_sigma requires at least 2 points")
    pts = _sorted_xy(curve)
    xs = [0.0] + [p.pfa_hat for p in pts] + [1.0]
    ys = [0.0] + [p.pd_hat for p in pts] + [1.0]
    var = 0.0
    for idx, p in enumerate(pts, start=1):
        dx = (xs[idx + 1] - xs[idx - 1]) / 2.0
        dy = (ys[idx - 1] - ys[idx + 1]) / 2.0
        var_pd = p.pd_hat * (1.0 - p.pd_hat) / p.n_h1
        var_pfa = p.pfa_hat * (1.0 - p.pfa_hat) / p.n_h0
        var += dx * dx * var_pd + dy * dy * var_pfa
    return math.sqrt(var)


def _pd_at_pfa(curve: RocCurve, at_pfa: float) -> tuple[float, float] | None:
    """Interpolate pd at an operating false-alarm rate on the empirical ROC.

    Returns (pd, one binomial sigma) or None when the curve does not
    bracket the requested rate.
    """
    pts = _sorted_xy(curve)
    xs = np.array([p.pfa_hat for p in pts])
    ys = np.array([p.pd_hat for p in pts])
    if not (xs.min() <= at_pfa <= xs.max()):
        return None
    pd = float(np.interp(at_pfa, xs, ys))
    nearest = min(pts, key=lambda p: abs(p.pfa_hat - at_pfa))
    sigma = math.sqrt(max(pd * (1.0 - pd), 1e-12) / nearest.n_h1)
    return pd, sigma


def crs_needed_for(
    target_pd: float, at_pfa: float, config_template: ExperimentConfig, k_max: int
) -> int | None:
    """Smallest detector count reaching ``target_pd`` at the operating rate.

    The operating point is matched on the empirical ROC: pd is read off at
    pfa_hat = ``at_pfa``, and a count qualifies when pd >= target_pd minus
    one Monte Carlo sigma. Returns None when no count up to ``k_max``
    qualifies (or can be evaluated at that operating rate).
    """
    if not 0.0 <= target_pd < 1.0:
        raise ValueError(f"target_pd must lie in [0, 1), got {target_pd!r}")
    if not 0.0 < at_pfa < 1.0:
        raise ValueError(f"at_pfa must lie in (0, 1), got {at_pfa!r}")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    if target_pd == 0.0:
        return 1

    nested_ok = isinstance(config_template.fusion, MrcFusion) or (
        config_template.fusion.rule in (FusionRule.OR, FusionRule.AND)
    )
    if nested_ok:
        template = _config_at_k(config_template, k_max)
        curves = nested_roc_sweep(template, tuple(range(1, k_max + 1)))
        for k in range(1, k_max + 1):
            got = _pd_at_pfa(curves[k], at_pfa)
            if got is None:
                continue
            pd, sigma = got
            if pd >= target_pd - sigma:
                return k
        return None

    for k in range(1, k_max + 1):
        curve = roc_sweep(_config_at_k(config_template, k))
        got = _pd_at_pfa(curve, at_pfa)
        if got is None:
            continue
        pd, sigma = got
        if pd >= target_pd - sigma:
            return k
    return None
