"""Train a small two-layer net on a synthetic task and plot the loss.

Run: python demos/train_basic.py
"""

import numpy as np

from widenet import model as M
from widenet import optim as O
from widenet import svgplot
from widenet.data import synth_classification

ds = synth_classification(n=1000, d=20, informative=5, classes=3,
                          class_sep=1.5, seed=0)

m = 200
net = M.init_net(m, ds.d, ds.num_classes, alpha=float(np.sqrt(m)),
                 activation="relu", init_spec=M.InitSpec("gaussian", 1.0, 0))
loss_spec = M.LossSpec("softmax_ce", ds.num_classes)

cfg = O.TrainConfig(eta=0.1, coupling="ntk_equal", batch_size=64,
                    steps=500, seed=0, record_every=50)
net, trace = O.train(net, ds, loss_spec, M.RegSpec(), cfg)

for step, tr, te, acc in zip(trace.steps, trace.train_loss,
                             trace.test_loss, trace.accuracy):
    print(f"step {step:4d}  train {tr:.4f}  test {te:.4f}  acc {acc:.3f}")

svgplot.save("train_basic.svg",
             [("train", trace.steps, trace.train_loss),
              ("test", trace.steps, trace.test_loss)],
             title="two-layer net on synthetic data",
             xlabel="step", ylabel="loss")
print("wrote train_basic.svg")
