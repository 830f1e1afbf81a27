"""First-order Taylor model of a two-layer net around its initialization.

The tangent model is trained in parameter space (delta_u, delta_theta)
alongside the true net on an identical minibatch stream, so the
prediction/loss gap between the two isolates the linearization error.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import model as M
from . import optim as O
from .activations import act, act_deriv


@dataclass
class TangentModel:
    snapshot: M.TwoLayerNet       # frozen (u0, theta0, alpha, activation)
    delta_u: np.ndarray = None    # m x k
    delta_theta: np.ndarray = None  # m x d

    def __post_init__(self):
        if self.delta_u is None:
            self.delta_u = np.zeros_like(self.snapshot.u0)
        if self.delta_theta is None:
            self.delta_theta = np.zeros_like(self.snapshot.theta0)

    @property
    def m(self):
        return self.snapshot.m


def _frozen_parts(tm, X):
    net = tm.snapshot
    Z = np.asarray(X, dtype=np.float64) @ net.theta0.T
    H = act(net.activation, Z)
    D = act_deriv(net.activation, Z)
    return Z, H, D


def lin_forward(tm, X):
    """Base prediction plus the exact linear terms in (du, dtheta)."""
    net = tm.snapshot
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != net.d:
        raise ValueError("input dimension mismatch")
    _, H, D = _frozen_parts(tm, X)
    scale = net.alpha / net.m
    base = scale * (H @ net.u0)
    du_term = scale * (H @ tm.delta_u)
    dth_term = scale * (((X @ tm.delta_theta.T) * D) @ net.u0)
    return base + du_term + dth_term


def lin_gradients(tm, loss_spec, X, Y):
    """Gradients of the mean loss w.r.t. (delta_u, delta_theta)."""
    net = tm.snapshot
    X = np.asarray(X, dtype=np.float64)
    _, H, D = _frozen_parts(tm, X)
    scale = net.alpha / net.m
    V = scale * (H @ (net.u0 + tm.delta_u)) \
        + scale * (((X @ tm.delta_theta.T) * D) @ net.u0)
    loss = M.loss_value(loss_spec, V, Y)
    G = M.loss_grad(loss_spec, V, Y) / X.shape[0]
    grad_du = scale * (H.T @ G)
    grad_dth = scale * (((G @ net.u0.T) * D).T @ X)
    return grad_du, grad_dth, loss


@dataclass
class GapSeries:
    steps: list = field(default_factory=list)
    loss_nn: list = field(default_factory=list)
    loss_lin: list = field(default_factory=list)
    test_loss_nn: list = field(default_factory=list)
    test_loss_lin: list = field(default_factory=list)
    pred_gap: list = field(default_factory=list)
    dist_u: list = field(default_factory=list)
    dist_theta: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "loss_nn", "loss_lin", "pred_gap",
                        "dist_u", "dist_theta"])
            for row in zip(self.steps, self.loss_nn, self.loss_lin,
                           self.pred_gap, self.dist_u, self.dist_theta):
                w.writerow([repr(v) for v in row])

    def terminal_rel_gap(self):
        a, b = self.loss_nn[-1], self.loss_lin[-1]
        return abs(a - b) / max(abs(a), 1e-300)


def train_pair(net, config, dataset, loss_spec, probe_X=None):
    """Train the net and its tangent model on one shared batch stream.

    Both start at the net's stored initialization snapshot. Returns
    (nn trace, tangent trace, GapSeries, final net, final tangent model).
    The prediction gap is the mean squared discrepancy over a fixed
    probe set (defaults to the test split, else the training inputs).
    """
    X, Y = dataset.train_xy()
    X_test, Y_test = dataset.test_xy()
    if probe_X is None:
        probe_X = X_test if X_test is not None else X
    net = net.snapshot_net()
    tm = TangentModel(net.snapshot_net())
    reg0 = M.RegSpec()
    state = O.make_state(net, config)
    batches = O.batch_stream(X.shape[0], config.batch_size, state.rng)
    nn_trace, lin_trace = O.TrainTrace(), O.TrainTrace()
    gaps = GapSeries()
    eta_u, eta_theta = O.resolve_rates(config, net.m, net.alpha)

    def record(t):
        V = M.forward(net, X)
        Vl = lin_forward(tm, X)
        l_nn = M.loss_value(loss_spec, V, Y)
        l_lin = M.loss_value(loss_spec, Vl, Y)
        if X_test is not None:
            te_nn = M.loss_value(loss_spec, M.forward(net, X_test), Y_test)
            te_lin = M.loss_value(loss_spec, lin_forward(tm, X_test), Y_test)
            acc_nn = O._accuracy(loss_spec, M.forward(net, X_test), Y_test)
            acc_lin = O._accuracy(loss_spec, lin_forward(tm, X_test), Y_test)
        else:
            te_nn = te_lin = acc_nn = acc_lin = float("nan")
        gap = float(np.mean((M.forward(net, probe_X)
                             - lin_forward(tm, probe_X)) ** 2))
        du, dt = net.dist_to_init()
        nn_trace.append(t, l_nn, te_nn, du, dt, acc_nn)
        dul = np.linalg.norm(tm.delta_u, axis=1).mean()
        dtl = np.linalg.norm(tm.delta_theta, axis=1).mean()
        lin_trace.append(t, l_lin, te_lin, dul, dtl, acc_lin)
        gaps.steps.append(t)
        gaps.loss_nn.append(l_nn)
        gaps.loss_lin.append(l_lin)
        gaps.test_loss_nn.append(te_nn)
        gaps.test_loss_lin.append(te_lin)
        gaps.pred_gap.append(gap)
        gaps.dist_u.append(du)
        gaps.dist_theta.append(dt)

    record(0)
    vel_u = np.zeros_like(tm.delta_u)
    vel_theta = np.zeros_like(tm.delta_theta)
    for t in range(config.steps):
        idx = next(batches)
        gu, gt, _ = M.gradients(net, loss_spec, reg0, X[idx], Y[idx])
        net, state = O.step(net, config, gu, gt, state)
        lgu, lgt, _ = lin_gradients(tm, loss_spec, X[idx], Y[idx])
        sched = config.eta_at(state.t - 1) / config.eta
        # mirror the net's optimizer (rates, schedule, momentum) so any
        # gap reflects the linearization alone
        vel_u = config.momentum * vel_u - eta_u * sched * lgu
        vel_theta = config.momentum * vel_theta - eta_theta * sched * lgt
        tm.delta_u += vel_u
        tm.delta_theta += vel_theta
        if (t + 1) % config.record_every == 0 or t + 1 == config.steps:
            record(t + 1)
    return nn_trace, lin_trace, gaps, net, tm


def break_ntk_experiment(dataset, m=5000, variations=("large_eta", "momentum",
                                                      "he_init"),
                         eta=0.01, steps=200, batch_size=64, seed=0,
                         alpha=None, loss_spec=None):
    """Endpoint diagnostics for configurations that leave the lazy regime.

    Baseline: gaussian(1) init, small learning rate, no momentum. Each
    variation reruns the paired net/tangent training and records terminal
    distances, relative theta displacement, and the net-vs-tangent test
    accuracy gap.
    """
    allowed = {"large_eta", "momentum", "he_init"}
    if not set(variations) <= allowed:
        raise ValueError(f"variations must be a subset of {sorted(allowed)}")
    d = dataset.d
    k = dataset.num_classes
    if alpha is None:
        alpha = np.sqrt(m)
    if loss_spec is None:
        loss_spec = M.LossSpec("softmax_ce", k)

    def run(tag, init_scheme, eta_run, momentum):
        init = M.InitSpec(init_scheme, 1.0, seed)
        net = M.init_net(m, d, k, alpha, "relu", init)
        cfg = O.TrainConfig(eta=eta_run, coupling="ntk_equal",
                            momentum=momentum, batch_size=batch_size,
                            steps=steps, seed=seed,
                            record_every=max(1, steps // 10))
        nn_tr, lin_tr, gaps, net_f, _ = train_pair(net, cfg, dataset,
                                                   loss_spec)
        theta0_norm = np.linalg.norm(net_f.theta0, axis=1).mean()
        return {
            "variation": tag,
            "dist_u": nn_tr.dist_u[-1],
            "dist_theta": nn_tr.dist_theta[-1],
            "rel_dist_theta": nn_tr.dist_theta[-1] / theta0_norm,
            "acc_nn": nn_tr.accuracy[-1],
            "acc_lin": lin_tr.accuracy[-1],
            "acc_gap": abs(nn_tr.accuracy[-1] - lin_tr.accuracy[-1]),
            "loss_gap": abs(nn_tr.train_loss[-1] - lin_tr.train_loss[-1]),
        }

    report = {"baseline": run("baseline", "gaussian", eta, 0.0)}
    if "large_eta" in variations:
        report["large_eta"] = run("large_eta", "gaussian", 10 * eta, 0.0)
    if "momentum" in variations:
        report["momentum"] = run("momentum", "gaussian", eta, 0.9)
    if "he_init" in variations:
        report["he_init"] = run("he_init", "he", eta, 0.0)
    return report
