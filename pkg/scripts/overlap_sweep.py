"""Normalized mean tree cross-entropy against the bootstrap overlap ratio."""

import argparse

from denoising_forest.experiment import OVERLAP_GRID, overlap_sweep, preset

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--dataset", default="concrete")
ap.add_argument("--seeds", type=int, default=3)
args = ap.parse_args()

cfg = preset("concrete_degradation" if args.dataset == "concrete" else args.dataset)
for ratio, value in overlap_sweep(cfg, OVERLAP_GRID, range(args.seeds)).items():
    print(f"overlap {ratio:4.2f}  cross-entropy {value:.4f}")
