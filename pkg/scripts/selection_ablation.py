"""Multipath metrics with and without cross-entropy tree selection."""

from denoising_forest.experiment import selection_ablation

results = selection_ablation()
print(f"{'dataset':<10} {'':>6} {'xent':>8} {'detect':>8} {'l1':>8}")
for name, arms in results.items():
    for selected, m in arms.items():
        tag = "with" if selected else "w/o"
        print(f"{name:<10} {tag:>6} {m['xent']:8.4f} {m['detection']:8.4f} {m['l1']:8.4f}")
