"""How the output scaling alpha controls distance from initialization.

With f = (alpha/m) sum_j u_j h(theta_j, x), larger alpha means a smaller
parameter move suffices to change the output, so training stays in a
shrinking neighborhood of the initialization ("lazy" regime). A second
sweep holds alpha = sqrt(m) and grows the width.

Run: python demos/lazy_training.py
"""

import numpy as np

from widenet import meanfield as MF
from widenet import model as M
from widenet import optim as O
from widenet.data import synth_classification

ds = synth_classification(n=600, d=10, informative=4, classes=2,
                          class_sep=1.5, seed=0)

m = 300
cfg = O.TrainConfig(eta=0.5, coupling="ntk_equal", batch_size=O.FULL,
                    steps=300, seed=0, record_every=300)

print("alpha sweep at fixed width m =", m)
rows = MF.alpha_sweep(m, ds, cfg, alphas=[1.0, np.sqrt(m), m])
for rec in rows:
    print(f"  alpha {rec['alpha']:8.1f}  dist_u {rec['dist_u']:.4f}  "
          f"dist_theta {rec['dist_theta']:.4f}  "
          f"loss {rec['train_loss']:.4f}")

print("width sweep at alpha = sqrt(m)")
for m in (100, 400, 1600):
    net = M.init_net(m, ds.d, 2, float(np.sqrt(m)), "relu",
                     M.InitSpec("gaussian", 1.0, 0))
    net, trace = O.train(net, ds, M.LossSpec("softmax_ce", 2), M.RegSpec(),
                         cfg)
    print(f"  m {m:5d}  dist_theta {trace.dist_theta[-1]:.5f}  "
          f"loss {trace.train_loss[-1]:.4f}")
