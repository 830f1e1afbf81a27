"""Mean-field view of a two-layer net as a cloud of m particles.

The cloud reuses TwoLayerNet (both views are the same object). This
module computes the per-particle functional gradient g, the first-order
condition residual Var_j(g_j), the one-step energy-dissipation identity,
wasted-neuron diagnostics, and the small-teacher reproduction experiment.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import model as M
from . import optim as O
from .activations import act, act_deriv

ParticleCloud = M.TwoLayerNet  # the MF view of a net is the net itself


@dataclass
class MfDiagnostics:
    g_values: np.ndarray        # m per-particle functional gradients
    grad_g_u: np.ndarray        # m x k
    grad_g_theta: np.ndarray    # m x d
    phi: float                  # objective value
    c: float                    # mean_j g_j (first-order constant)
    residual: float             # Var_j(g_j)
    grad_g_norms: np.ndarray = None

    def __post_init__(self):
        if self.grad_g_norms is None:
            self.grad_g_norms = np.sqrt(
                np.sum(self.grad_g_u ** 2, axis=1)
                + np.sum(self.grad_g_theta ** 2, axis=1))

    def dissipation_pred(self, eta):
        """Predicted objective decrement eta * mean_j |grad g_j|^2."""
        return eta * float(np.mean(self.grad_g_norms ** 2))


def particle_g(cloud, X, Y, loss_spec, reg_spec):
    """Full-batch functional gradient per particle.

    g_j = (alpha/n) sum_i <L1'(f(x_i), y_i), u_j> h(theta_j, x_i)
          + (lambda_u/2)|u_j|^2 + (lambda_theta/2)|theta_j|^2.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    Z = X @ cloud.theta.T
    H = act(cloud.activation, Z)
    D = act_deriv(cloud.activation, Z)
    V = (cloud.alpha / cloud.m) * (H @ cloud.u)
    L1 = M.loss_grad(loss_spec, V, Y)          # n x k
    P = L1 @ cloud.u.T                         # n x m  <L1'_i, u_j>
    r = 0.5 * (reg_spec.lambda_u * np.sum(cloud.u ** 2, axis=1)
               + reg_spec.lambda_theta * np.sum(cloud.theta ** 2, axis=1))
    g = (cloud.alpha / n) * np.sum(P * H, axis=0) + r
    grad_u = (cloud.alpha / n) * (H.T @ L1) + reg_spec.lambda_u * cloud.u
    grad_theta = (cloud.alpha / n) * ((P * D).T @ X) \
        + reg_spec.lambda_theta * cloud.theta
    phi = M.loss_value(loss_spec, V, Y) + M.reg_value(reg_spec, cloud.u,
                                                      cloud.theta)
    return MfDiagnostics(g, grad_u, grad_theta, phi, float(np.mean(g)),
                         float(np.var(g)))


def dissipation_check(cloud, X, Y, loss_spec, reg_spec, eta):
    """One plain particle-flow step u_j -= eta grad_u g_j (same for theta).

    Returns (actual decrement, predicted decrement, actual/predicted).
    The prediction eta * (1/m) sum_j |grad g_j|^2 is the first-order
    Taylor decrement, exact only in the eta -> 0 limit.
    """
    diag = particle_g(cloud, X, Y, loss_spec, reg_spec)
    stepped = cloud.copy()
    stepped.u -= eta * diag.grad_g_u
    stepped.theta -= eta * diag.grad_g_theta
    phi_after = M.objective(stepped, loss_spec, reg_spec, X, Y)
    actual = diag.phi - phi_after
    predicted = diag.dissipation_pred(eta)
    ratio = actual / predicted if predicted != 0 else (
        1.0 if actual == 0 else float("inf"))
    return actual, predicted, ratio


def wasted_fraction(cloud, tau=None):
    """Fraction of particles with |u_j| below tau.

    Default tau = 0.05 * median_j |u_j| (scale-free); tau = 0 gives 0.
    """
    norms = np.linalg.norm(cloud.u, axis=1)
    if tau is None:
        tau = 0.05 * float(np.median(norms))
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return float(np.mean(norms < tau))


def make_teacher(d=2, seed=0, input_scale=100.0, noise_std=0.1):
    """Fixed m=4 sigmoid teacher with unit top weights.

    The four bottom weights are seeded random unit-norm directions.
    Returns (teacher net, sample function drawing (X, y) pairs).
    """
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal((4, d))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    u = np.ones((4, 1))
    teacher = M.TwoLayerNet(1.0, u, theta, "sigmoid")

    def sample(n, sample_seed):
        srng = np.random.default_rng(sample_seed)
        X = input_scale * srng.standard_normal((n, d))
        y = M.forward(teacher, X) + noise_std * srng.standard_normal((n, 1))
        return X, y

    return teacher, sample


def target_experiment(m_student, seed=0, d=2, n=1000, steps=4000, eta=0.05,
                      lambda_p=0.0, lambda_u=0.0, sigma2=1.0,
                      record_every=100, teacher_seed=0, noise_std=0.1):
    """Reproduce the fixed 4-neuron sigmoid teacher with a width-m student.

    Returns (loss curve as (steps, losses), final student cloud, teacher).
    Training is plain (or noisy, lambda_p > 0) full-batch particle-flow
    gradient descent with squared loss.
    """
    teacher, sample = make_teacher(d=d, seed=teacher_seed,
                                   noise_std=noise_std)
    X, y = sample(n, sample_seed=10_000 + seed)
    init = M.InitSpec("gaussian", sigma2, seed)
    net = M.init_net(m_student, d, 1, 1.0, "sigmoid", init)
    loss_spec = M.LossSpec("squared", 1)
    reg_spec = M.RegSpec(lambda_u=lambda_u)
    rng = np.random.default_rng(seed + 1)
    rec_steps, losses = [], []
    for t in range(steps + 1):
        diag = particle_g(net, X, y, loss_spec, reg_spec)
        if t % record_every == 0 or t == steps:
            rec_steps.append(t)
            losses.append(diag.phi)
        if t == steps:
            break
        # particle-flow step: rate eta on the per-particle gradient g
        net.u -= eta * diag.grad_g_u
        net.theta -= eta * diag.grad_g_theta
        if lambda_p > 0:
            std = np.sqrt(2.0 * lambda_p * eta)
            net.u += std * rng.standard_normal(net.u.shape)
            net.theta += std * rng.standard_normal(net.theta.shape)
    return (rec_steps, losses), net, teacher


def alpha_sweep(m, dataset, config, alphas, d=None, k=None, activation="relu",
                init_seed=0, loss_spec=None):
    """Terminal distances to initialization per scaling alpha.

    The same init seed and net shape are reused across alpha values so
    the sweeps differ only in the scaling.
    """
    if d is None:
        d = dataset.d
    if k is None:
        k = dataset.num_classes
    if loss_spec is None:
        loss_spec = M.LossSpec("softmax_ce", k)
    reg_spec = M.RegSpec()
    out = []
    for alpha in alphas:
        net = M.init_net(m, d, k, alpha, activation,
                         M.InitSpec("gaussian", 1.0, init_seed))
        net, trace = O.train(net, dataset, loss_spec, reg_spec, config)
        out.append({"alpha": float(alpha),
                    "dist_u": trace.dist_u[-1],
                    "dist_theta": trace.dist_theta[-1],
                    "train_loss": trace.train_loss[-1]})
    return out


def export_cloud_csv(cloud, path):
    """Scatter export: j, u_norm, theta_1..theta_d."""
    norms = np.linalg.norm(cloud.u, axis=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "u_norm"] + [f"theta_{i+1}"
                                      for i in range(cloud.d)])
        for j in range(cloud.m):
            w.writerow([j, repr(norms[j])]
                       + [repr(v) for v in cloud.theta[j]])
