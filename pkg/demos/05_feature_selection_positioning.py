#!/usr/bin/env python3
"""Pick half the feedback elements and see what it costs in positioning error.

Scores every element over a region of interest, selects the five most often
best (greedy coverage), then trains position regressors on all ten elements,
the selected five, and five random ones, across a few seeds.  The selected
half should track the full set closely and beat the random half.
"""

import os

import numpy as np

from bfisense import (CrbConfig, MlpSpec, PathScenario, SelectionResult, annulus_roi,
                      bfi_element_labels, gen_dataset, half_wavelength_geometry,
                      scatter_cluster, select_features, split_dataset,
                      train_eval_positioner)

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

N_SEEDS = 3
ROI_SIZE = 400

scenario = PathScenario(geometry=half_wavelength_geometry(2, 4),
                        cluster=scatter_cluster(seed=5, n_paths=4), snr_db=20.0)
roi = annulus_roi(r=ROI_SIZE, seed=3)

print(f"scoring {ROI_SIZE} positions and selecting 5 of 10 elements ...")
selection = select_features(roi, scenario, CrbConfig(n_mc=1000, seed=17), n_sel=5)
labels = [f"{lab.kind}_{lab.row}{lab.col}" for lab in bfi_element_labels(2, 4)]
print("coverage (positions where each element is the most informative):")
for lab, count in zip(labels, selection.coverage[0]):
    bar = "#" * int(40 * count / max(selection.coverage[0].max(), 1))
    print(f"  {lab:>8} {count:5d} {bar}")
print("selected elements:", [labels[j] for j in sorted(selection.per_subcarrier[0])])


def random_subset(rng):
    idx = np.sort(rng.choice(10, size=5, replace=False))
    return SelectionResult(per_subcarrier=[idx], eta=selection.eta,
                           coverage=selection.coverage, mode="random", n_sel=5, n_bfi=10)


rng = np.random.default_rng(99)
errors = {"all 10": [], "selected 5": [], "random 5": []}
for seed in range(N_SEEDS):
    variants = {"all 10": None, "selected 5": selection, "random 5": random_subset(rng)}
    for name, sel in variants.items():
        ds = gen_dataset(roi, scenario, sel, samples_per_pos=2, seed=1000 + seed)
        train, test = split_dataset(ds, 0.8, seed=seed)
        spec = MlpSpec(layer_sizes=(ds.features.shape[1], 128, 2), seed=seed)
        result = train_eval_positioner(train, test, spec)
        errors[name].append(result.errors)
        print(f"seed {seed} {name:>11}: median {result.quantiles['p50']:.3f} m, "
              f"p75 {result.quantiles['p75']:.3f} m")

for name, errs in errors.items():
    med = np.median(np.concatenate(errs))
    print(f"{name:>11}: pooled median {med:.3f} m")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping the box plot")
    raise SystemExit(0)

fig, ax = plt.subplots(figsize=(5, 3.4))
ax.boxplot([np.concatenate(errs) for errs in errors.values()],
           tick_labels=list(errors.keys()), showfliers=False)
ax.set_ylabel("positioning error (m)")
ax.grid(True, axis="y", alpha=0.3)
fig.tight_layout()
path = os.path.join(OUT, "positioning_boxplot.png")
fig.savefig(path, dpi=150)
print(f"saved {path}")
