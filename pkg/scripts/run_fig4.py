"""Distance correlation of inferred vs original RWP mobility, with and without anchors.

    python3 scripts/run_fig4.py --seeds 5 --out results/
"""

import argparse
import dataclasses
import logging
from pathlib import Path

import numpy as np

from mobinfer.evaluation import write_report
from mobinfer.experiment import ExperimentConfig, run_once
from mobinfer.synthetic import GRID_ANCHORS

log = logging.getLogger("run_fig4")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--base-seed", type=int, default=0)
    ap.add_argument("--geometry", choices=["same", "plane"], default="same",
                    help="lay out on the original torus or on the plane")
    ap.add_argument("--out", type=Path, default=Path("results/fig4"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    base = ExperimentConfig(repetitions=args.seeds, base_seed=args.base_seed,
                            infer_geometry=args.geometry)
    for label, anchors in (("anchors", GRID_ANCHORS), ("none", ())):
        cfg = dataclasses.replace(base, rwp=dataclasses.replace(base.rwp, anchors=anchors))
        corr = []
        for seed in cfg.seeds():
            report = run_once(cfg, seed)
            write_report(report, args.out / label / f"seed{seed}")
            corr.append(report.pearson_correlation)
            log.info("%-7s seed %d  correlation %.3f", label, seed, corr[-1])
        log.info("%-7s mean %.3f  sd %.3f", label, np.mean(corr), np.std(corr))


if __name__ == "__main__":
    main()
