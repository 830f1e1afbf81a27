"""Random-features ridge regression two ways: primal (train the top
layer) and dual (kernel coefficients beta), and the exact bridge between
them. The two predictions agree to near machine precision.

Run: python demos/kernel_bridge.py
"""

import numpy as np

from widenet import kernels as K
from widenet import model as M

rng = np.random.default_rng(0)
n, m, d = 120, 400, 8

theta = rng.standard_normal((m, d))        # frozen random features
X = rng.standard_normal((n, d))
Y = np.sin(X[:, :1]) + 0.1 * rng.standard_normal((n, 1))

# dual: solve the kernel ridge problem in beta
G = K.gram_rf(theta, "tanh", X)
dual = K.solve_dual(G, Y, lam=1e-3, loss_spec=M.LossSpec("squared", 1),
                    anchors=X)

# bridge: the optimal top layer is a weighted sum of feature vectors
u = K.primal_from_dual(dual.beta, theta, "tanh", X)
net = M.TwoLayerNet(1.0, u, theta, "tanh")

probes = rng.standard_normal((30, d))
pred_primal = M.forward(net, probes)
pred_dual = K.gram_rf(theta, "tanh", probes, X) @ dual.beta

gap = np.max(np.abs(pred_primal - pred_dual))
print(f"max |primal - dual| over 30 probes: {gap:.3e}")

# the regularizer has the same kernel form
lhs = K.rescaled_u_norm2(u)
rhs = float(dual.beta.T @ G @ dual.beta)
print(f"|u|^2 via weights: {lhs:.6f}   via kernel: {rhs:.6f}")
