"""Width-m sigmoid students learning a fixed 4-neuron sigmoid teacher.

Narrow students often plateau above the noise floor; wide students
reach it. Injected parameter noise can shake a stuck narrow student
loose. Prints loss curves and the fraction of near-dead output weights.

Run: python demos/teacher_student.py
"""

import numpy as np

from widenet import meanfield as MF

print("plain particle-flow training, squared loss, noise_std = 0.01")
for m in (4, 64, 256):
    (steps, losses), cloud, _ = MF.target_experiment(
        m, seed=0, n=500, steps=2000, eta=0.05,
        record_every=500, noise_std=0.01)
    wf = MF.wasted_fraction(cloud)
    print(f"  m = {m:4d}  final loss {losses[-1]:.5f}  "
          f"wasted fraction {wf:.2f}")

print("\nnarrow student (m = 4), plain versus noisy training")
for lam_p in (0.0, 1e-4):
    (steps, losses), cloud, _ = MF.target_experiment(
        4, seed=0, n=500, steps=2000, eta=0.05,
        lambda_p=lam_p, record_every=500, noise_std=0.01)
    tag = "plain" if lam_p == 0 else f"noisy (lambda_p = {lam_p})"
    curve = "  ".join(f"{l:.5f}" for l in losses)
    print(f"  {tag}: loss curve {curve}")
    print(f"    wasted fraction {MF.wasted_fraction(cloud):.2f}")
