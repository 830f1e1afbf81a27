"""Recycle trained weights across runs: pool neurons from many small
nets, fit a Gaussian mixture to the pooled (u, theta) rows, then draw
fresh bottom-layer weights from the fitted density and fit only the top
layer in closed form. Compares against a fresh Gaussian feature draw.

Run: python demos/feature_recycling.py
"""

import numpy as np

from widenet import features as F
from widenet.data import load_digits_dataset, normalize_features

ds = normalize_features(load_digits_dataset(seed=0))

print("training 30 independent width-100 nets to build a weight bank...")
bank = F.build_bank(ds, runs=30, m=100, steps=200, eta=0.05, seed=0)
print(f"  bank: {bank.samples.shape[0]} pooled neurons, "
      f"row dim {bank.samples.shape[1]}")

print("fitting a 16-component Gaussian mixture to the pooled rows...")
density = F.fit_density(bank.samples, G=16, seed=0, max_iter=100, n_init=2)
print(f"  components kept: {len(density.weights)}")

print("repopulated random features versus a fresh Gaussian draw (m = 200):")
res = F.repopulate_rf(density, 200, ds, lam=1e-4, seed=0, k_dim=bank.k)
print(f"  repopulated accuracy {res['repopulated_accuracy']:.3f}")
print(f"  baseline accuracy    {res['baseline_accuracy']:.3f}")
