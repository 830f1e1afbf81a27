"""Minibatch (stochastic) gradient descent for two-layer nets.

Supports per-layer learning-rate couplings, heavy-ball momentum, an
inverse-time schedule, and noisy gradient descent: with noise strength
lambda_p > 0 each update adds i.i.d. N(0, 2*lambda_p*eta(t)) noise per
coordinate, which implements entropy regularization of the weight
distribution.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import model as M

FULL = -1  # sentinel batch size: use the whole training split


@dataclass
class TrainConfig:
    eta: float = 0.1
    coupling: str = "practical"   # practical | ntk_scaled | ntk_equal | explicit
    eta_u: float = None           # used only with coupling="explicit"
    eta_theta: float = None
    momentum: float = 0.0
    lambda_p: float = 0.0
    batch_size: int = FULL
    steps: int = 1000
    seed: int = 0
    schedule: str = "constant"    # constant | inverse_time
    t0: float = 1.0               # inverse_time: eta(t) = eta / (1 + t/t0)
    record_every: int = 10

    def __post_init__(self):
        if self.coupling not in ("practical", "ntk_scaled", "ntk_equal",
                                 "explicit"):
            raise ValueError(f"unknown coupling {self.coupling!r}")
        if self.coupling == "explicit" and (self.eta_u is None
                                            or self.eta_theta is None):
            raise ValueError("explicit coupling needs eta_u and eta_theta")
        if self.schedule not in ("constant", "inverse_time"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.lambda_p < 0:
            raise ValueError("lambda_p must be nonnegative")
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    def eta_at(self, t):
        """Base rate at step t under the configured schedule."""
        if self.schedule == "inverse_time":
            return self.eta / (1.0 + t / self.t0)
        return self.eta


def resolve_rates(config, m, alpha):
    """Per-layer rates (eta_u, eta_theta) for the chosen coupling.

    practical:  eta_u = eta*m/alpha, eta_theta = eta (same effective rate
                for the rescaled top layer alpha*u/m).
    ntk_scaled: eta_u = eta/alpha,   eta_theta = eta.
    ntk_equal:  eta_u = eta_theta = eta.
    """
    if m < 1 or alpha <= 0:
        raise ValueError("need m >= 1 and alpha > 0")
    eta = config.eta
    if config.coupling == "practical":
        return eta * m / alpha, eta
    if config.coupling == "ntk_scaled":
        return eta / alpha, eta
    if config.coupling == "ntk_equal":
        return eta, eta
    return config.eta_u, config.eta_theta


@dataclass
class OptState:
    rng: np.random.Generator
    vel_u: np.ndarray = None
    vel_theta: np.ndarray = None
    t: int = 0


def make_state(net, config):
    return OptState(rng=np.random.default_rng(config.seed),
                    vel_u=np.zeros_like(net.u),
                    vel_theta=np.zeros_like(net.theta))


def step(net, config, grad_u, grad_theta, state):
    """One in-place update; returns the (mutated) net and state."""
    if not (np.isfinite(grad_u).all() and np.isfinite(grad_theta).all()):
        raise FloatingPointError(
            f"non-finite gradient at step {state.t}; aborting")
    eta_u, eta_theta = resolve_rates(config, net.m, net.alpha)
    sched = config.eta_at(state.t) / config.eta
    if config.momentum > 0:
        state.vel_u = config.momentum * state.vel_u + grad_u
        state.vel_theta = config.momentum * state.vel_theta + grad_theta
        du, dt = state.vel_u, state.vel_theta
    else:
        du, dt = grad_u, grad_theta
    net.u -= eta_u * sched * du
    net.theta -= eta_theta * sched * dt
    if config.lambda_p > 0:
        std = np.sqrt(2.0 * config.lambda_p * config.eta_at(state.t))
        net.u += std * state.rng.standard_normal(net.u.shape)
        net.theta += std * state.rng.standard_normal(net.theta.shape)
    state.t += 1
    return net, state


@dataclass
class TrainTrace:
    steps: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    dist_u: list = field(default_factory=list)
    dist_theta: list = field(default_factory=list)
    accuracy: list = field(default_factory=list)

    def append(self, t, tr, te, du, dt, acc):
        self.steps.append(t)
        self.train_loss.append(tr)
        self.test_loss.append(te)
        self.dist_u.append(du)
        self.dist_theta.append(dt)
        self.accuracy.append(acc)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "train_loss", "test_loss", "dist_u",
                        "dist_theta", "accuracy"])
            for row in zip(self.steps, self.train_loss, self.test_loss,
                           self.dist_u, self.dist_theta, self.accuracy):
                w.writerow([repr(v) for v in row])


def _accuracy(loss_spec, V, Y):
    if loss_spec.kind != "softmax_ce":
        return float("nan")
    y = np.asarray(Y).astype(int).ravel()
    return float(np.mean(V.argmax(axis=1) == y))


def _record(trace, t, net, loss_spec, reg_spec, X, Y, X_test, Y_test):
    V = M.forward(net, X)
    tr = M.loss_value(loss_spec, V, Y) + M.reg_value(reg_spec, net.u, net.theta)
    if X_test is not None:
        Vt = M.forward(net, X_test)
        te = M.loss_value(loss_spec, Vt, Y_test)
        acc = _accuracy(loss_spec, Vt, Y_test)
    else:
        te = float("nan")
        acc = _accuracy(loss_spec, V, Y)
    du, dt = net.dist_to_init()
    trace.append(t, tr, te, du, dt, acc)


def batch_stream(n, batch_size, rng):
    """Epoch-shuffled minibatch indices, without replacement per epoch."""
    if batch_size == FULL or batch_size >= n:
        while True:
            yield np.arange(n)
    else:
        while True:
            perm = rng.permutation(n)
            for lo in range(0, n - batch_size + 1, batch_size):
                yield perm[lo:lo + batch_size]


def train(net, dataset, loss_spec, reg_spec, config):
    """Run config.steps updates; returns (net, TrainTrace).

    The trace records train loss (objective), test loss, mean distances
    to the stored initialization, and test accuracy every
    config.record_every steps (plus step 0 and the final step).
    """
    X, Y = dataset.train_xy()
    if X.shape[0] == 0:
        raise ValueError("dataset has an empty training split")
    X_test, Y_test = dataset.test_xy()
    if X_test is not None and X_test.shape[0] == 0:
        X_test, Y_test = None, None
    state = make_state(net, config)
    batches = batch_stream(X.shape[0], config.batch_size, state.rng)
    trace = TrainTrace()
    _record(trace, 0, net, loss_spec, reg_spec, X, Y, X_test, Y_test)
    for t in range(config.steps):
        idx = next(batches)
        gu, gt, _ = M.gradients(net, loss_spec, reg_spec, X[idx], Y[idx])
        net, state = step(net, config, gu, gt, state)
        if (t + 1) % config.record_every == 0 or t + 1 == config.steps:
            _record(trace, t + 1, net, loss_spec, reg_spec,
                    X, Y, X_test, Y_test)
    return net, trace
