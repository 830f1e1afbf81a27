"""Discrete two-layer network f(x) = (alpha/m) sum_j u_j h0(theta_j^T x).

Holds the model container, Gaussian/He initialization (with a frozen
snapshot of the initial weights for distance diagnostics), the softmax
and squared losses, the L2 weight regularizer, and exact analytic
gradients of the full training objective.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .activations import ACTIVATIONS, act, act_deriv


@dataclass
class InitSpec:
    """Weight initialization law.

    scheme "gaussian": every entry of u and theta ~ N(0, sigma2).
    scheme "he": theta entries ~ N(0, 1/d), u entries ~ N(0, sigma2).
    """

    scheme: str = "gaussian"
    sigma2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("gaussian", "he"):
            raise ValueError(f"unknown init scheme {self.scheme!r}")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")


@dataclass
class LossSpec:
    """kind 'softmax_ce' (integer labels 0..k-1) or 'squared' (real n x k)."""

    kind: str = "softmax_ce"
    k: int = 1

    def __post_init__(self):
        if self.kind not in ("softmax_ce", "squared"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class RegSpec:
    """L2 weight decay R = (1/2m) sum_j [lu*|u_j|^2 + lt*|theta_j|^2]."""

    lambda_u: float = 0.0
    lambda_theta: float = 0.0

    def __post_init__(self):
        if self.lambda_u < 0 or self.lambda_theta < 0:
            raise ValueError("regularization strengths must be nonnegative")


@dataclass
class TwoLayerNet:
    alpha: float
    u: np.ndarray        # m x k
    theta: np.ndarray    # m x d
    activation: str
    u0: np.ndarray = None       # snapshot at init, m x k
    theta0: np.ndarray = None   # snapshot at init, m x d
    seed: int = 0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.u.ndim != 2 or self.theta.ndim != 2:
            raise ValueError("u and theta must be 2-d arrays")
        if self.u.shape[0] != self.theta.shape[0]:
            raise ValueError("u and theta must share the particle count m")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.isfinite(self.u).all() and np.isfinite(self.theta).all()):
            raise ValueError("weights must be finite")
        if self.u0 is None:
            self.u0 = self.u.copy()
        if self.theta0 is None:
            self.theta0 = self.theta.copy()

    @property
    def m(self):
        return self.u.shape[0]

    @property
    def k(self):
        return self.u.shape[1]

    @property
    def d(self):
        return self.theta.shape[1]

    def copy(self):
        return replace(self, u=self.u.copy(), theta=self.theta.copy(),
                       u0=self.u0.copy(), theta0=self.theta0.copy())

    def snapshot_net(self):
        """Net frozen at the stored initialization."""
        return TwoLayerNet(self.alpha, self.u0.copy(), self.theta0.copy(),
                           self.activation, self.u0.copy(), self.theta0.copy(),
                           self.seed)

    def dist_to_init(self):
        """(mean_j |u_j - u0_j|, mean_j |theta_j - theta0_j|)."""
        du = np.linalg.norm(self.u - self.u0, axis=1).mean()
        dt = np.linalg.norm(self.theta - self.theta0, axis=1).mean()
        return du, dt


def init_net(m, d, k, alpha, activation, init_spec):
    """Draw a fresh net; identical seeds give bit-identical weights."""
    if m < 1 or d < 1 or k < 1:
        raise ValueError("m, d, k must all be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    rng = np.random.default_rng(init_spec.seed)
    sigma = np.sqrt(init_spec.sigma2)
    u = sigma * rng.standard_normal((m, k))
    if init_spec.scheme == "he":
        theta = rng.standard_normal((m, d)) / np.sqrt(d)
    else:
        theta = sigma * rng.standard_normal((m, d))
    return TwoLayerNet(alpha, u, theta, activation, seed=init_spec.seed)


def preactivations(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.d:
        raise ValueError(
            f"X must be n x {net.d}, got shape {np.shape(X)}")
    return X @ net.theta.T  # n x m


def forward(net, X):
    """n x k predictions (alpha/m) H U with H = h0(X theta^T)."""
    Z = preactivations(net, X)
    H = act(net.activation, Z)
    return (net.alpha / net.m) * (H @ net.u)


def softmax(V):
    """Row-wise softmax with log-sum-exp stabilization."""
    V = np.asarray(V, dtype=np.float64)
    Vs = V - V.max(axis=1, keepdims=True)
    E = np.exp(Vs)
    return E / E.sum(axis=1, keepdims=True)


def loss_value(loss_spec, V, Y):
    """Mean loss over rows of V.

    softmax_ce: (1/n) sum_i -log softmax(v_i)[y_i], stabilized.
    squared:    (1/2n) sum_i |v_i - y_i|^2.
    """
    V = np.asarray(V, dtype=np.float64)
    n = V.shape[0]
    if loss_spec.kind == "softmax_ce":
        y = np.asarray(Y).astype(int).ravel()
        if y.shape[0] != n:
            raise ValueError("label count does not match prediction count")
        if y.min() < 0 or y.max() >= V.shape[1]:
            raise ValueError("class label out of range")
        Vs = V - V.max(axis=1, keepdims=True)
        lse = np.log(np.exp(Vs).sum(axis=1))
        return float(np.mean(lse - Vs[np.arange(n), y]))
    Y = np.asarray(Y, dtype=np.float64).reshape(V.shape)
    return float(0.5 * np.sum((V - Y) ** 2) / n)


def loss_grad(loss_spec, V, Y):
    """Per-row gradient L1'(v_i, y_i), an n x k array."""
    V = np.asarray(V, dtype=np.float64)
    n = V.shape[0]
    if loss_spec.kind == "softmax_ce":
        y = np.asarray(Y).astype(int).ravel()
        if y.min() < 0 or y.max() >= V.shape[1]:
            raise ValueError("class label out of range")
        G = softmax(V)
        G[np.arange(n), y] -= 1.0
        return G
    Y = np.asarray(Y, dtype=np.float64).reshape(V.shape)
    return V - Y


def reg_value(reg_spec, u, theta):
    m = u.shape[0]
    return (reg_spec.lambda_u * np.sum(u * u)
            + reg_spec.lambda_theta * np.sum(theta * theta)) / (2.0 * m)


def objective(net, loss_spec, reg_spec, X, Y):
    """Full training objective: mean loss + regularizer."""
    return (loss_value(loss_spec, forward(net, X), Y)
            + reg_value(reg_spec, net.u, net.theta))


def gradients(net, loss_spec, reg_spec, X, Y):
    """Exact gradients of the objective w.r.t. u and theta.

    Returns (grad_u m x k, grad_theta m x d, objective value).
    """
    X = np.asarray(X, dtype=np.float64)
    Z = preactivations(net, X)
    H = act(net.activation, Z)
    n = X.shape[0]
    scale = net.alpha / net.m
    V = scale * (H @ net.u)
    loss = loss_value(loss_spec, V, Y) + reg_value(reg_spec, net.u, net.theta)
    G = loss_grad(loss_spec, V, Y) / n          # n x k
    grad_u = scale * (H.T @ G) + (reg_spec.lambda_u / net.m) * net.u
    B = (G @ net.u.T) * act_deriv(net.activation, Z)  # n x m
    grad_theta = scale * (B.T @ X) + (reg_spec.lambda_theta / net.m) * net.theta
    return grad_u, grad_theta, loss
