"""Finite-width and Monte-Carlo infinite-width kernels, dual solvers,
and the primal-dual bridge for random-feature and tangent-kernel models.

Conventions: all finite-width Gram matrices are assembled from feature
matrices (n x m times m x n'); the top-layer kernel is

    k(x, x') = (1/m) sum_j h0(theta_j^T x) h0(theta_j^T x'),

and the bottom-layer (tangent) kernel weights the gradient features
grad_theta h = h0'(theta^T x) x by the initial top weights u_j.
"""

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .activations import act, act_deriv
from .model import loss_grad, loss_value

PSD_TOL = 1e-8


class GramError(ValueError):
    pass


def check_psd(K, tol=PSD_TOL):
    """Require symmetry and min eigenvalue >= -tol * max eigenvalue."""
    if K.shape[0] != K.shape[1]:
        raise GramError("Gram matrix must be square")
    if not np.allclose(K, K.T, rtol=0, atol=1e-10 * max(1.0, np.abs(K).max())):
        raise GramError("Gram matrix is not symmetric")
    eigs = np.linalg.eigvalsh(K)
    lam_max = max(eigs[-1], 0.0)
    if eigs[0] < -tol * max(lam_max, 1e-300):
        raise GramError(
            f"Gram matrix is not PSD to tolerance: min eig {eigs[0]:.3e}, "
            f"max eig {lam_max:.3e}")


@dataclass
class GramBundle:
    K_rf: np.ndarray            # n x n' top-layer kernel
    K_theta: np.ndarray         # n x n' scalar bottom-layer kernel
    K_theta_mat: np.ndarray = None  # n x n' x k x k matrix kernel (k > 1)
    metadata: dict = field(default_factory=dict)

    @property
    def K_u(self):
        # identical definition to the RF kernel, shared snapshot
        return self.K_rf

    def export_csv(self, path, which="K_rf"):
        K = getattr(self, which)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kernel", which, "n", K.shape[0], "n2", K.shape[1],
                        "snapshot", self.metadata.get("snapshot_hash", "")])
            for row in K:
                w.writerow([repr(v) for v in row])


def snapshot_hash(u0, theta0):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(u0).tobytes())
    h.update(np.ascontiguousarray(theta0).tobytes())
    return h.hexdigest()[:16]


def features_rf(theta_snapshot, activation, X):
    """Feature matrix H with H[i, j] = h0(theta_j^T x_i)."""
    X = np.asarray(X, dtype=np.float64)
    theta = np.asarray(theta_snapshot, dtype=np.float64)
    if X.shape[1] != theta.shape[1]:
        raise GramError("input dimension does not match theta snapshot")
    return act(activation, X @ theta.T)


def gram_rf(theta_snapshot, activation, X, X2=None):
    """(1/m) sum_j h(theta_j, x_i) h(theta_j, x'_l) via feature products."""
    H = features_rf(theta_snapshot, activation, X)
    H2 = H if X2 is None else features_rf(theta_snapshot, activation, X2)
    return (H @ H2.T) / theta_snapshot.shape[0]


def gram_ntk(net_snapshot, X, X2=None):
    """Gram bundle (K_u, scalar K_theta, matrix K_theta for k > 1).

    The scalar bottom-layer kernel weights each hidden unit by
    |u0_j|^2 / k (tr(u0_j u0_j^T)/k), which equals u0_j^2 for k = 1 and
    matches the sigma^2-weighted simplification in expectation under a
    Gaussian product initialization.
    """
    u0 = net_snapshot.u0
    theta0 = net_snapshot.theta0
    activation = net_snapshot.activation
    m, k = u0.shape
    X = np.asarray(X, dtype=np.float64)
    X2a = X if X2 is None else np.asarray(X2, dtype=np.float64)
    Z = X @ theta0.T
    Z2 = Z if X2 is None else X2a @ theta0.T
    D = act_deriv(activation, Z)       # n x m
    D2 = D if X2 is None else act_deriv(activation, Z2)
    XX = X @ X2a.T                     # n x n'
    K_rf = gram_rf(theta0, activation, X, X2)
    w = np.sum(u0 * u0, axis=1) / k    # trace weights
    K_theta = ((D * w) @ D2.T / m) * XX
    K_theta_mat = None
    if k > 1:
        # full k x k matrix kernel (1/m) sum_j u_j u_j^T d_ij d'_lj x_i^T x'_l
        S = np.einsum("ij,lj,ja,jb->ilab", D, D2, u0, u0) / m
        K_theta_mat = S * XX[:, :, None, None]
    meta = {"snapshot_hash": snapshot_hash(u0, theta0),
            "activation": activation, "m": m, "k": k}
    return GramBundle(K_rf, K_theta, K_theta_mat, meta)


def mc_infinite_kernel(init_spec, activation, X, X2, num_samples, which="rf",
                       chunk=512):
    """Monte-Carlo estimate of the infinite-width kernel over fresh draws
    from the initialization law, with a per-entry standard error.

    which="rf":        E_theta h(theta,x) h(theta,x')
    which="ntk_theta": sigma_u^2 * E_theta h0'(z) h0'(z') x^T x'
    """
    if num_samples < 2:
        raise ValueError("num_samples must be >= 2")
    if which not in ("rf", "ntk_theta"):
        raise ValueError(f"unknown kernel kind {which!r}")
    X = np.asarray(X, dtype=np.float64)
    X2a = X if X2 is None else np.asarray(X2, dtype=np.float64)
    d = X.shape[1]
    rng = np.random.default_rng(init_spec.seed)
    total = np.zeros((X.shape[0], X2a.shape[0]))
    total_sq = np.zeros_like(total)
    XX = X @ X2a.T if which == "ntk_theta" else None
    done = 0
    while done < num_samples:
        s = min(chunk, num_samples - done)
        if init_spec.scheme == "he":
            theta = rng.standard_normal((s, d)) / np.sqrt(d)
        else:
            theta = np.sqrt(init_spec.sigma2) * rng.standard_normal((s, d))
        Z = X @ theta.T
        Z2 = Z if X2 is None else X2a @ theta.T
        if which == "rf":
            A = act(activation, Z)
            B = act(activation, Z2)
            C = np.einsum("is,ls->ils", A, B)
        else:
            A = act_deriv(activation, Z)
            B = act_deriv(activation, Z2)
            C = init_spec.sigma2 * np.einsum("is,ls->ils", A, B) \
                * XX[:, :, None]
        total += C.sum(axis=2)
        total_sq += (C * C).sum(axis=2)
        done += s
    mean = total / num_samples
    var = np.maximum(total_sq / num_samples - mean * mean, 0.0)
    se = np.sqrt(var / (num_samples - 1))
    return mean, se


@dataclass
class DualModel:
    beta: np.ndarray          # n x k dual coefficients
    anchors: np.ndarray       # the n training inputs
    lam: float
    kind: str = "rf"

    def predict(self, K_cross):
        """Predictions from a cross Gram matrix K(x_probe, anchors)."""
        return K_cross @ self.beta


def _dual_objective(K, beta, Y, lam, loss_spec):
    F = K @ beta
    return loss_value(loss_spec, F, Y) + 0.5 * lam * float(
        np.sum(beta * (K @ beta)))


def _dual_gradient(K, beta, Y, lam, loss_spec):
    F = K @ beta
    n = K.shape[0]
    G = loss_grad(loss_spec, F, Y) / n
    return K @ G + lam * (K @ beta)


def solve_dual(gram, Y, lam, loss_spec, tol=1e-8, max_iter=200000,
               anchors=None):
    """Minimize (1/n) sum L(K beta, y) + (lam/2) beta^T K beta.

    Squared loss with lam > 0 is solved in closed form; the softmax loss
    and the unregularized (lam = 0) squared problem are solved by
    full-batch gradient descent in beta to gradient norm < tol.
    """
    K = np.asarray(gram, dtype=np.float64)
    check_psd(K)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    n = K.shape[0]
    if loss_spec.kind == "squared":
        Yv = np.asarray(Y, dtype=np.float64)
        if Yv.ndim == 1:
            Yv = Yv[:, None]
        if lam > 0:
            beta = np.linalg.solve(K + n * lam * np.eye(n), Yv)
            return DualModel(beta, anchors, lam)
        # lam = 0: steepest descent with exact line search on the quadratic
        beta = np.zeros_like(Yv)
        for _ in range(max_iter):
            g = K @ (K @ beta - Yv) / n
            gnorm = np.linalg.norm(g)
            if gnorm < tol:
                break
            Ag = K @ (K @ g) / n
            denom = float(np.sum(g * Ag))
            if denom <= 0:
                break
            beta = beta - (gnorm ** 2 / denom) * g
        else:
            raise GramError("lam=0 dual solve did not converge")
        return DualModel(beta, anchors, lam)
    # softmax: gradient descent with backtracking
    k = loss_spec.k
    beta = np.zeros((n, k))
    step = 1.0
    obj = _dual_objective(K, beta, Y, lam, loss_spec)
    for _ in range(max_iter):
        g = _dual_gradient(K, beta, Y, lam, loss_spec)
        gnorm = np.linalg.norm(g)
        if gnorm < tol:
            break
        while step > 1e-14:
            cand = beta - step * g
            cobj = _dual_objective(K, cand, Y, lam, loss_spec)
            if cobj <= obj - 0.25 * step * gnorm ** 2:
                break
            step *= 0.5
        beta, obj = cand, cobj
        step *= 2.0
    else:
        raise GramError("softmax dual solve did not converge")
    return DualModel(beta, anchors, lam)


def solve_ntk_dual(bundle, Y, lam, loss_spec, tol=1e-8, max_iter=200000):
    """Two-block tangent-kernel dual: f = K_u beta_u + K_theta beta_theta.

    Squared loss with lam > 0 solves the stacked normal equations; lam = 0
    and softmax run gradient descent on the stacked coefficients.
    Returns (beta_u, beta_theta).
    """
    K_u, K_t = bundle.K_u, bundle.K_theta
    check_psd(K_u)
    check_psd(K_t)
    n = K_u.shape[0]
    P = np.hstack([K_u, K_t])            # n x 2n
    if loss_spec.kind == "squared" and lam > 0:
        Yv = np.asarray(Y, dtype=np.float64)
        if Yv.ndim == 1:
            Yv = Yv[:, None]
        D = np.zeros((2 * n, 2 * n))
        D[:n, :n] = K_u
        D[n:, n:] = K_t
        A = P.T @ P / n + lam * D
        # tiny ridge keeps the stacked system solvable when kernels overlap
        A += 1e-12 * np.trace(A) / (2 * n) * np.eye(2 * n)
        stacked = np.linalg.solve(A, P.T @ Yv / n)
        return stacked[:n], stacked[n:]
    k = loss_spec.k if loss_spec.kind == "softmax_ce" else (
        np.asarray(Y).ndim > 1 and np.asarray(Y).shape[1] or 1)
    stacked = np.zeros((2 * n, k))

    def obj(b):
        F = P @ b
        reg = 0.5 * lam * (float(np.sum(b[:n] * (K_u @ b[:n])))
                           + float(np.sum(b[n:] * (K_t @ b[n:]))))
        return loss_value(loss_spec, F, Y) + reg

    def grad(b):
        F = P @ b
        G = loss_grad(loss_spec, F, Y) / n
        out = P.T @ G
        out[:n] += lam * (K_u @ b[:n])
        out[n:] += lam * (K_t @ b[n:])
        return out

    step = 1.0
    cur = obj(stacked)
    for _ in range(max_iter):
        g = grad(stacked)
        gnorm = np.linalg.norm(g)
        if gnorm < tol:
            break
        while step > 1e-14:
            cand = stacked - step * g
            cobj = obj(cand)
            if cobj <= cur - 0.25 * step * gnorm ** 2:
                break
            step *= 0.5
        stacked, cur = cand, cobj
        step *= 2.0
    else:
        raise GramError("tangent-kernel dual solve did not converge")
    return stacked[:n], stacked[n:]


def primal_from_dual(beta, theta_snapshot, activation, X_train, alpha=1.0):
    """Recover the top-layer weights u (m x k) from dual coefficients.

    In the rescaled coordinates u_resc = (alpha/sqrt(m)) u the optimality
    condition reads u_resc = sum_i h(x_i) beta_i^T with the 1/sqrt(m)
    feature map, so u = (1/alpha) H^T beta.
    """
    H = features_rf(theta_snapshot, activation, X_train)
    beta = np.asarray(beta, dtype=np.float64)
    if beta.ndim == 1:
        beta = beta[:, None]
    if beta.shape[0] != H.shape[0]:
        raise GramError("beta row count does not match the training inputs")
    return (H.T @ beta) / alpha


def rescaled_u_norm2(u, alpha=1.0):
    """Frobenius norm squared of the rescaled top layer (alpha/sqrt(m)) u."""
    m = u.shape[0]
    return (alpha ** 2 / m) * float(np.sum(u * u))
