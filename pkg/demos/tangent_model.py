"""Train a net and its first-order Taylor (tangent) model side by side
on the same minibatch stream, then try to break the agreement with a
larger learning rate.

Run: python demos/tangent_model.py
"""

import numpy as np

from widenet import model as M
from widenet import optim as O
from widenet import tangent as T
from widenet.data import synth_classification

ds = synth_classification(n=1000, d=20, informative=6, classes=2,
                          class_sep=2.0, seed=1)
loss_spec = M.LossSpec("softmax_ce", 2)

for eta in (0.05, 1.0):
    net = M.init_net(500, ds.d, 2, float(np.sqrt(500)), "relu",
                     M.InitSpec("gaussian", 1.0, 0))
    cfg = O.TrainConfig(eta=eta, coupling="ntk_equal", batch_size=64,
                        steps=300, seed=0, record_every=100)
    nn_tr, lin_tr, gaps, _, _ = T.train_pair(net, cfg, ds, loss_spec)
    print(f"eta = {eta}")
    for i, step in enumerate(gaps.steps):
        print(f"  step {step:4d}  net loss {gaps.loss_nn[i]:.4f}  "
              f"tangent loss {gaps.loss_lin[i]:.4f}  "
              f"pred gap {gaps.pred_gap[i]:.2e}")
    print(f"  terminal relative loss gap: {gaps.terminal_rel_gap():.4f}")
