"""Command-line front end.

Parses scenario flags or a named preset, runs the requested experiments,
and emits plot-ready CSV/JSON together with a run manifest that pins every
parameter needed to reproduce the output bit-exactly.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analytic import FusionRule, FusionSpec
from .montecarlo import (
    DEFAULT_PFA_GRID,
    DetectorScheme,
    ExperimentConfig,
    MrcFusion,
    RocCurve,
    VarianceSource,
    auc,
    crs_needed_for,
    nested_roc_sweep,
    roc_sweep,
    _derived_seed,
)
from .simchan import ScenarioConfig

__all__ = ["build_parser", "parse_args", "emit_results", "summarize", "main"]

CSV_HEADER = (
    "label,pfa_target,pfa_hat,pfa_ci_lo,pfa_ci_hi,"
    "pd_hat,pd_ci_lo,pd_ci_hi,pfa_theory,pd_theory"
)

# Per-scheme/rule target grids for the comparison presets, sized so each
# curve's *realized* false-alarm rate spans the ROC range and brackets 0.1.
# Under a 1 dB wobble the fixed-threshold schemes realize far more false
# alarms than their nominal targets (so their grids reach down to 1e-14),
# while K-detector AND fusion crushes the realized rate (so AND grids reach
# up toward 1).
FIG3_GRIDS = {
    ("dual", "and"): (0.55, 0.65, 0.72, 0.78, 0.83, 0.88, 0.93),
    ("dual", "or"): (0.002, 0.005, 0.01, 0.015, 0.025, 0.05, 0.1, 0.25),
    ("dual", "majority"): (0.03, 0.07, 0.12, 0.16, 0.2, 0.3, 0.45, 0.65),
    ("conventional", "and"): (0.5, 0.8, 0.9, 0.96, 0.99, 0.998, 0.9995, 0.9999),
    ("conventional", "or"): (1e-14, 3e-13, 1e-11, 3e-10, 1e-8, 1e-6, 1e-4, 1e-2),
    ("conventional", "majority"): (1e-6, 1e-5, 1e-4, 5e-4, 2e-3, 0.01, 0.05, 0.2),
    ("mrc", "or"): (1e-8, 1e-7, 1e-6, 3e-6, 1e-5, 1e-4, 1e-3, 0.01),
}
FIG4_DUAL_GRID = (0.0005, 0.002, 0.005, 0.02, 0.05, 0.1, 0.2, 0.4)
FIG4_WALL_GRID = (1e-16, 1e-13, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 0.1)
FIG4_MRC_GRID = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 0.01, 0.1)

# Defaults for custom (non-preset) runs. Noise uncertainty defaults to a
# half-width of 1.0 dB; presets inherit it unless overridden.
DEFAULTS = {
    "scheme": "dual",
    "rule": "or",
    "num_samples": 1000,
    "num_crs": 3,
    "history_len": 15,
    "majority_l": None,
    "snr_db": -15.0,
    "uncertainty_db": 1.0,
    "duty_cycle": 0.5,
    "dwell_events": 50.0,
    "events": 60_000,
    "pfa_grid": ",".join(str(p) for p in DEFAULT_PFA_GRID),
    "seed": 1,
    "format": "csv",
    "workers": 1,
    "variance": "genie",
}


@dataclass(frozen=True)
class SweepJob:
    """One ROC sweep; ``k_values`` switches to the nested multi-count pass."""

    config: ExperimentConfig
    k_values: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Fig4Spec:
    target_pd: float
    at_pfa: float
    k_max: int


@dataclass
class RunPlan:
    jobs: list[SweepJob]
    out: str
    format: str
    seed: int
    fig4: Fig4Spec | None = None
    argv: tuple[str, ...] = ()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopsense",
        description=(
            "Cooperative spectrum sensing Monte Carlo runner: fixed-threshold, "
            "dual-dynamic-threshold, and soft-MRC schemes with AND/OR/Majority fusion."
        ),
    )
    parser.add_argument(
        "--preset",
        choices=("fig1", "fig2", "fig3", "fig4"),
        help="documented parameter set; explicit flags override preset values",
    )
    parser.add_argument("--scheme", choices=("conventional", "dual", "mrc"))
    parser.add_argument("--rule", choices=("and", "or", "majority"))
    parser.add_argument("--num-samples", type=int, dest="num_samples")
    parser.add_argument("--num-crs", type=int, dest="num_crs")
    parser.add_argument("--history-len", type=int, dest="history_len")
    parser.add_argument("--majority-l", type=int, dest="majority_l")
    parser.add_argument("--snr-db", type=float, dest="snr_db")
    parser.add_argument("--uncertainty-db", type=float, dest="uncertainty_db")
    parser.add_argument("--duty-cycle", type=float, dest="duty_cycle")
    parser.add_argument("--dwell-events", type=float, dest="dwell_events")
    parser.add_argument("--events", type=int)
    parser.add_argument(
        "--pfa-grid",
        dest="pfa_grid",
        help="comma-separated false-alarm targets, strictly increasing in (0,1)",
    )
    parser.add_argument("--seed", type=int)
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--out", help="output path prefix (required)")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--variance", choices=("genie", "estimated"))
    parser.add_argument(
        "--replay", help="rebuild and rerun the plan recorded in a manifest file"
    )
    return parser


def _resolve(ns: argparse.Namespace, preset_values: dict) -> dict:
    values = dict(DEFAULTS)
    values.update(preset_values)
    for key in DEFAULTS:
        given = getattr(ns, key, None)
        if given is not None:
            values[key] = given
    return values


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        grid = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ValueError(f"--pfa-grid: not a number list: {text!r}") from exc
    if not grid:
        raise ValueError("--pfa-grid: empty grid")
    if any(not 0.0 < p < 1.0 for p in grid):
        raise ValueError(f"--pfa-grid: values must lie in (0,1): {text!r}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"--pfa-grid: must be strictly increasing: {text!r}")
    return grid


def _fusion_for(rule: str, k: int, majority_l: int | None) -> FusionSpec:
    return FusionSpec(FusionRule(rule), k, majority_l if rule == "majority" else None)


def _scenario(values: dict, seed: int, k: int | None = None) -> ScenarioConfig:
    return ScenarioConfig(
        n_samples=values["num_samples"],
        k_crs=k if k is not None else values["num_crs"],
        snr_bar_db=values["snr_db"],
        uncertainty_db=values["uncertainty_db"],
        duty_cycle=values["duty_cycle"],
        pu_dwell_events=values["dwell_events"],
        seed=seed,
    )


def _config(
    values: dict,
    seed: int,
    scheme: str,
    rule: str,
    *,
    k: int | None = None,
    history_len: int | None = None,
    grid: tuple[float, ...] | None = None,
    label: str | None = None,
) -> ExperimentConfig:
    scenario = _scenario(values, seed, k)
    if scheme == "mrc":
        fusion: FusionSpec | MrcFusion = MrcFusion()
        detector = DetectorScheme.CONVENTIONAL
    else:
        fusion = _fusion_for(rule, scenario.k_crs, values["majority_l"])
        detector = (
            DetectorScheme.DUAL_THRESHOLD if scheme == "dual" else DetectorScheme.CONVENTIONAL
        )
    return ExperimentConfig(
        scenario=scenario,
        detector=detector,
        fusion=fusion,
        history_len=history_len if history_len is not None else values["history_len"],
        pfa_grid=grid if grid is not None else _parse_grid(values["pfa_grid"]),
        n_events=values["events"],
        variance_source=VarianceSource(values["variance"]),
        workers=values["workers"],
        label=label,
    )


def _plan_custom(values: dict, ns: argparse.Namespace) -> RunPlan:
    seed = _derived_seed(values["seed"], 0)
    cfg = _config(values, seed, values["scheme"], values["rule"])
    return RunPlan(
        jobs=[SweepJob(cfg)], out=ns.out, format=values["format"], seed=values["seed"]
    )


def _plan_fig1(values: dict, ns: argparse.Namespace) -> RunPlan:
    jobs = []
    for idx, history in enumerate((5, 10, 15, 20)):
        seed = _derived_seed(values["seed"], idx)
        cfg = _config(
            values,
            seed,
            "dual",
            "or",
            history_len=history,
            label=f"dual-or-L{history}",
        )
        jobs.append(SweepJob(cfg))
    return RunPlan(jobs=jobs, out=ns.out, format=values["format"], seed=values["seed"])


def _plan_fig2(values: dict, ns: argparse.Namespace) -> RunPlan:
    seed = _derived_seed(values["seed"], 0)
    cfg = _config(values, seed, "dual", "or", k=7)
    return RunPlan(
        jobs=[SweepJob(cfg, k_values=(1, 3, 5, 7))],
        out=ns.out,
        format=values["format"],
        seed=values["seed"],
    )


def _plan_fig3(values: dict, ns: argparse.Namespace) -> RunPlan:
    jobs = []
    idx = 0
    for scheme, rules in (
        ("dual", ("and", "or", "majority")),
        ("conventional", ("and", "or", "majority")),
        ("mrc", ("or",)),
    ):
        for rule in rules:
            seed = _derived_seed(values["seed"], idx)
            idx += 1
            grid = FIG3_GRIDS[(scheme, rule)]
            jobs.append(SweepJob(_config(values, seed, scheme, rule, grid=grid)))
    return RunPlan(jobs=jobs, out=ns.out, format=values["format"], seed=values["seed"])


def _plan_fig4(values: dict, ns: argparse.Namespace) -> RunPlan:
    k_max = 40
    jobs = []
    for idx, (scheme, grid) in enumerate(
        (
            ("dual", FIG4_DUAL_GRID),
            ("conventional", FIG4_WALL_GRID),
            ("mrc", FIG4_MRC_GRID),
        )
    ):
        seed = _derived_seed(values["seed"], idx)
        cfg = _config(values, seed, scheme, "or", k=k_max, grid=grid)
        jobs.append(SweepJob(cfg, k_values=tuple(range(1, k_max + 1))))
    return RunPlan(
        jobs=jobs,
        out=ns.out,
        format=values["format"],
        seed=values["seed"],
        fig4=Fig4Spec(target_pd=0.4, at_pfa=0.1, k_max=k_max),
    )


_PRESETS = {
    None: (_plan_custom, {}),
    "fig1": (_plan_fig1, {"snr_db": -20.0, "num_crs": 3, "events": 80_000, "dwell_events": 200.0}),
    "fig2": (_plan_fig2, {"snr_db": -20.0, "history_len": 15, "events": 80_000, "dwell_events": 200.0}),
    "fig3": (
        _plan_fig3,
        {
            "snr_db": -15.0,
            "num_crs": 7,
            "history_len": 15,
            "majority_l": 3,
            "events": 60_000,
            "dwell_events": 2000.0,
        },
    ),
    "fig4": (
        _plan_fig4,
        {"snr_db": -15.0, "history_len": 15, "events": 15_000, "dwell_events": 2000.0},
    ),
}


def parse_args(argv) -> RunPlan:
    """Resolve flags (and preset) into a validated run plan."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.replay is not None:
        plan = load_manifest_plan(ns.replay, out=ns.out, fmt=ns.format)
        return plan
    if ns.out is None:
        parser.error("--out is required")
    builder, preset_values = _PRESETS[ns.preset]
    values = _resolve(ns, preset_values)
    try:
        plan = builder(values, ns)
    except ValueError as exc:
        parser.error(str(exc))
    plan.argv = tuple(argv)
    return plan


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return f"{float(x):.10g}"


def _round10(x) -> float:
    return float(_fmt(x))


def _config_to_dict(config: ExperimentConfig) -> dict:
    fusion: dict
    if isinstance(config.fusion, MrcFusion):
        fusion = {"type": "mrc"}
    else:
        fusion = {
            "type": "hard",
            "rule": config.fusion.rule.value,
            "k_crs": config.fusion.k_crs,
            "majority_l": config.fusion.majority_l,
        }
    return {
        "scenario": asdict(config.scenario),
        "detector": config.detector.value,
        "fusion": fusion,
        "history_len": config.history_len,
        "pfa_grid": list(config.pfa_grid),
        "n_events": config.n_events,
        "warmup_excluded": config.warmup_excluded,
        "variance_source": config.variance_source.value,
        "ref_samples": config.ref_samples,
        "workers": config.workers,
        "label": config.label,
    }


def _config_from_dict(data: dict) -> ExperimentConfig:
    scenario = ScenarioConfig(**data["scenario"])
    if data["fusion"]["type"] == "mrc":
        fusion: FusionSpec | MrcFusion = MrcFusion()
    else:
        fusion = FusionSpec(
            FusionRule(data["fusion"]["rule"]),
            data["fusion"]["k_crs"],
            data["fusion"]["majority_l"],
        )
    return ExperimentConfig(
        scenario=scenario,
        detector=DetectorScheme(data["detector"]),
        fusion=fusion,
        history_len=data["history_len"],
        pfa_grid=tuple(data["pfa_grid"]),
        n_events=data["n_events"],
        warmup_excluded=data["warmup_excluded"],
        variance_source=VarianceSource(data["variance_source"]),
        ref_samples=data["ref_samples"],
        workers=data["workers"],
        label=data["label"],
    )


def build_manifest(plan: RunPlan, outputs: list[str]) -> dict:
    """Everything needed to reproduce the run, plus bookkeeping fields."""
    return {
        "tool": "coopsense",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "argv": list(plan.argv),
        "seed": plan.seed,
        "format": plan.format,
        "out": plan.out,
        "jobs": [
            {
                "config": _config_to_dict(job.config),
                "k_values": list(job.k_values) if job.k_values else None,
            }
            for job in plan.jobs
        ],
        "fig4": asdict(plan.fig4) if plan.fig4 else None,
        "outputs": outputs,
    }


def load_manifest_plan(path: str, out: str | None, fmt: str | None) -> RunPlan:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    jobs = [
        SweepJob(
            _config_from_dict(entry["config"]),
            tuple(entry["k_values"]) if entry["k_values"] else None,
        )
        for entry in data["jobs"]
    ]
    fig4 = Fig4Spec(**data["fig4"]) if data.get("fig4") else None
    return RunPlan(
        jobs=jobs,
        out=out if out is not None else data["out"],
        format=fmt if fmt is not None else data["format"],
        seed=data["seed"],
        fig4=fig4,
        argv=("--replay", path),
    )


def emit_results(curves, fmt: str, destination, manifest: dict | None = None) -> None:
    """Write curves as CSV or JSON; numbers carry 10 significant digits."""
    curves = list(curves)
    if not curves:
        raise ValueError("no curves to emit")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(destination)
    ordered = sorted(curves, key=lambda c: c.label)
    if fmt == "csv":
        lines = [CSV_HEADER]
        for curve in ordered:
            for p in curve.points:
                lines.append(
                    ",".join(
                        [curve.label]
                        + [
                            _fmt(v)
                            for v in (
                                p.pfa_target,
                                p.pfa_hat,
                                p.pfa_ci_lo,
                                p.pfa_ci_hi,
                                p.pd_hat,
                                p.pd_ci_lo,
                                p.pd_ci_hi,
                                p.pfa_theory,
                                p.pd_theory,
                            )
                        ]
                    )
                )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return
    payload = {
        "manifest": manifest,
        "curves": [
            {
                "label": curve.label,
                "points": [
                    {
                        "pfa_target": _round10(p.pfa_target),
                        "pfa_hat": _round10(p.pfa_hat),
                        "pfa_ci_lo": _round10(p.pfa_ci_lo),
                        "pfa_ci_hi": _round10(p.pfa_ci_hi),
                        "pd_hat": _round10(p.pd_hat),
                        "pd_ci_lo": _round10(p.pd_ci_lo),
                        "pd_ci_hi": _round10(p.pd_ci_hi),
                        "pfa_theory": _round10(p.pfa_theory),
                        "pd_theory": _round10(p.pd_theory),
                    }
                    for p in curve.points
                ],
            }
            for curve in ordered
        ],
    }
    path.write_text(json.dumps(payload, indent=2, allow_nan=True) + "\n", encoding="utf-8")


def _operating_point(curve: RocCurve, at: float = 0.1):
    return min(curve.points, key=lambda p: abs(p.pfa_hat - at))


def summarize(curves) -> str:
    """Human-readable comparison: operating points, ratios, and AUCs.

    Operating points are selected on the realized false-alarm axis (the
    ROC abscissa), nearest 0.1; ratios compare same-rule curves against the
    fixed-threshold baseline.
    """
    curves = list(curves)
    if not curves:
        raise ValueError("no curves to summarize")
    lines = ["scheme summary (operating point nearest pfa_hat = 0.1):"]
    by_label = {c.label: c for c in curves}
    for curve in curves:
        p = _operating_point(curve)
        lines.append(
            f"  {curve.label}: pd={p.pd_hat:.4f} at pfa_hat={p.pfa_hat:.4g} "
            f"(target {p.pfa_target:.4g}), auc={auc(curve):.4f}"
        )
    baselines = {
        label.split("-", 1)[1]: c
        for label, c in by_label.items()
        if label.startswith("conventional-")
    }
    if baselines:
        lines.append("ratios vs conventional hard baseline (pd at pfa_hat ~ 0.1):")
        for curve in curves:
            kind, _, rest = curve.label.partition("-")
            base = baselines.get(rest) if kind == "dual" else None
            if kind == "mrc":
                base = baselines.get("or")
            if base is None or base is curve:
                continue
            num = _operating_point(curve).pd_hat
            den = _operating_point(base).pd_hat
            ratio = math.inf if den == 0 else num / den
            lines.append(f"  {curve.label} / {base.label}: {ratio:.2f}")
    else:
        lines.append("no conventional-hard baseline curve; ratios omitted")
    lines.append("auc by curve:")
    for curve in curves:
        lines.append(f"  {curve.label}: {auc(curve):.4f}")
    return "\n".join(lines)


def _execute(plan: RunPlan) -> tuple[list[RocCurve], dict | None]:
    curves: list[RocCurve] = []
    for job in plan.jobs:
        if job.k_values is None:
            curves.append(roc_sweep(job.config))
        else:
            by_k = nested_roc_sweep(job.config, job.k_values)
            curves.extend(by_k[k] for k in sorted(by_k))
    fig4_summary = None
    if plan.fig4 is not None:
        spec = plan.fig4
        results = {}
        for job in plan.jobs:
            kind = job.config.kind
            results[kind] = crs_needed_for(
                spec.target_pd, spec.at_pfa, job.config, spec.k_max
            )
        fig4_summary = {
            "target_pd": spec.target_pd,
            "at_pfa": spec.at_pfa,
            "k_max": spec.k_max,
            "detectors_needed": results,
        }
    return curves, fig4_summary


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    plan = parse_args(argv)
    try:
        curves, fig4_summary = _execute(plan)
        out_path = f"{plan.out}.{plan.format}"
        manifest_path = f"{plan.out}.manifest.json"
        outputs = [out_path, manifest_path]
        manifest = build_manifest(plan, outputs)
        if fig4_summary is not None:
            manifest["fig4_summary"] = fig4_summary
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        emit_results(curves, plan.format, out_path, manifest=manifest)
        Path(manifest_path).write_text(
            json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
        )
        print(summarize(curves))
        if fig4_summary is not None:
            print("detectors needed for pd >= "
                  f"{fig4_summary['target_pd']} at pfa {fig4_summary['at_pfa']}:")
            for kind, k in fig4_summary["detectors_needed"].items():
                shown = k if k is not None else f"> {fig4_summary['k_max']} (not reached)"
                print(f"  {kind}: {shown}")
        print(f"wrote {out_path} and {manifest_path}")
    except (ValueError, RuntimeError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
