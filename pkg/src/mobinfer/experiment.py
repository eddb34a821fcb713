"""Synthetic generate -> extract -> infer -> evaluate runs, single and swept."""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from mobinfer.evaluation import EvaluationReport, evaluate
from mobinfer.inference import InferenceParams, NodeConstraint, infer
from mobinfer.mobility import max_speed_violations
from mobinfer.errors import ConfigError
from mobinfer.synthetic import GRID_ANCHORS, RwpConfig, extract_contacts, generate_rwp


@dataclass(frozen=True)
class ExperimentConfig:
    """One synthetic scenario plus the inference settings used on it.

    The scenario's stationary nodes (``rwp.anchors``) are passed to the
    inference as anchor constraints.

    ``reference`` picks which contacts missed/added are measured against:
    ``truth`` (proximity sampled every movement frame) or ``input`` (the
    trace sampled at ``period`` and handed to the inference).
    ``infer_geometry``: ``same`` lays out on the original torus, ``plane``
    uses the unbounded plane. A speed sweep changes only the generator unless
    ``match_inference_speed`` also sets the inference ``v_max``.
    """

    rwp: RwpConfig = RwpConfig()
    params: InferenceParams = InferenceParams()
    period: float = 1.0
    repetitions: int = 1
    base_seed: int = 0
    known_initial_positions: bool = True
    reference: str = "truth"
    infer_geometry: str = "same"
    match_inference_speed: bool = False

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.reference not in ("truth", "input"):
            raise ConfigError(f"reference must be truth or input, got {self.reference!r}")
        if self.infer_geometry not in ("same", "plane"):
            raise ConfigError(f"infer_geometry must be same or plane, got {self.infer_geometry!r}")

    def seeds(self) -> list[int]:
        return [self.base_seed + k for k in range(self.repetitions)]


def run_once(cfg: ExperimentConfig, seed: int) -> EvaluationReport:
    rwp = dataclasses.replace(cfg.rwp, seed=seed)
    original = generate_rwp(rwp)
    r = cfg.params.r
    sampled = extract_contacts(original, r, cfg.period)
    reference = sampled if cfg.reference == "input" else extract_contacts(original, r, original.dt)

    geometry = "plane"
    if cfg.infer_geometry == "same":
        geometry = f"torus,{rwp.width!r},{rwp.height!r}"
    params = dataclasses.replace(
        cfg.params, record_interval=original.dt, geometry=geometry, seed=seed
    )
    constraints = {i: NodeConstraint.anchor(x, y) for i, (x, y) in enumerate(rwp.anchors)}
    initial = original.frames[0] if cfg.known_initial_positions else None
    inferred = infer(sampled, constraints, initial, params)

    report = evaluate(reference, inferred, r, original_mobility=original)
    report.extra.update(
        seed=seed,
        period=cfg.period,
        v_max=params.v_max,
        anchors=len(constraints),
        speed_violations=len(max_speed_violations(inferred, params.v_max)),
    )
    return report


def _run_args(args):
    cfg, seed = args
    return run_once(cfg, seed).summary()


def run_repetitions(cfg: ExperimentConfig, workers: int = 1) -> list[dict]:
    """Summaries for seeds base_seed .. base_seed+repetitions-1, in seed order."""
    jobs = [(cfg, s) for s in cfg.seeds()]
    if workers <= 1:
        return [_run_args(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_args, jobs))


def aggregate(rows: list[dict], key: str, value) -> dict:
    """Run-mean and pooled (frame-weighted) means over repetitions of one sweep point."""
    out = {key: value, "runs": len(rows), "seeds": ";".join(str(r["seed"]) for r in rows)}
    for name in ("pearson_correlation", "mean_missed_pct", "mean_added_pct"):
        vals = [r[name] for r in rows if r[name] is not None and not math.isnan(r[name])]
        out[f"run_mean_{name}"] = float(np.mean(vals)) if vals else math.nan
    weights = np.array([r["frames_with_contacts"] for r in rows], float)
    for name in ("mean_missed_pct", "mean_added_pct"):
        vals = np.array([r[name] for r in rows], float)
        ok = ~np.isnan(vals) & (weights > 0)
        out[f"time_mean_{name.removeprefix('mean_')}"] = (
            float(np.average(vals[ok], weights=weights[ok])) if ok.any() else math.nan
        )
    out["speed_violations"] = sum(r.get("speed_violations", 0) for r in rows)
    return out


def sweep(cfg: ExperimentConfig, kind: str, values, workers: int = 1) -> list[dict]:
    """One aggregated row per value of ``kind`` (``period``, ``speed`` or ``anchors``)."""
    rows = []
    for v in values:
        if kind == "period":
            point = dataclasses.replace(cfg, period=float(v))
        elif kind == "speed":
            point = dataclasses.replace(cfg, rwp=dataclasses.replace(cfg.rwp, v_max_gen=float(v)))
            if cfg.match_inference_speed:
                point = dataclasses.replace(
                    point, params=dataclasses.replace(cfg.params, v_max=float(v))
                )
        elif kind == "anchors":
            anchors = GRID_ANCHORS if int(v) else ()
            point = dataclasses.replace(cfg, rwp=dataclasses.replace(cfg.rwp, anchors=anchors))
        else:
            raise ConfigError(f"unknown sweep kind {kind!r}")
        rows.append(aggregate(run_repetitions(point, workers), kind, v))
    return rows
