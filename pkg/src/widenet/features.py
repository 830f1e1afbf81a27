"""Feature-distribution learning and reuse.

Pools trained (u, theta) weights from many independent runs into a
sample bank, fits a full-covariance Gaussian mixture by EM, and uses the
fitted density for feature repopulation, tangent-space comparison, and
importance-sampling pruning. A variance diagnostic relates sub-network
deviation to the predicted 1/m' sampling variance.
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import model as M
from . import optim as O
from . import tangent as T
from .activations import act
from .data import unit_second_moment_scale


@dataclass
class WeightSampleBank:
    samples: np.ndarray          # N x (k + d) rows [u_j, theta_j]
    run_ids: np.ndarray          # N run indices
    k: int
    d: int
    provenance: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.samples.shape[0]

    def theta_samples(self):
        return self.samples[:, self.k:]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run_id"] + [f"u{i}" for i in range(self.k)]
                       + [f"theta{i}" for i in range(self.d)])
            for rid, row in zip(self.run_ids, self.samples):
                w.writerow([int(rid)] + [repr(v) for v in row])


def build_bank(dataset, runs=50, m=100, steps=200, eta=0.05, lambda_u=1e-4,
               activation="relu", alpha=1.0, batch_size=O.FULL, seed=0):
    """Train `runs` independent nets and pool their weights row-wise."""
    d = dataset.d
    k = dataset.num_classes
    loss_spec = M.LossSpec("softmax_ce", k)
    reg_spec = M.RegSpec(lambda_u=lambda_u)
    rows, ids = [], []
    for r in range(runs):
        net = M.init_net(m, d, k, alpha, activation,
                         M.InitSpec("gaussian", 1.0, seed + 1000 * (r + 1)))
        cfg = O.TrainConfig(eta=eta, coupling="practical",
                            batch_size=batch_size, steps=steps,
                            seed=seed + r, record_every=steps)
        net, _ = O.train(net, dataset, loss_spec, reg_spec, cfg)
        rows.append(np.hstack([net.u, net.theta]))
        ids.append(np.full(m, r))
    return WeightSampleBank(np.vstack(rows), np.concatenate(ids), k, d,
                            {"runs": runs, "m": m, "steps": steps,
                             "eta": eta, "lambda_u": lambda_u, "seed": seed})


@dataclass
class FeatureDensity:
    """Mixture of full-covariance Gaussians over weight space."""

    weights: np.ndarray       # G
    means: np.ndarray         # G x dim
    covs: np.ndarray          # G x dim x dim
    log_likelihoods: list = field(default_factory=list)

    @property
    def dim(self):
        return self.means.shape[1]

    def log_pdf(self, X):
        return _logsumexp(self._component_logpdf(X)
                          + np.log(self.weights), axis=1)

    def _component_logpdf(self, X):
        X = np.asarray(X, dtype=np.float64)
        n, dim = X.shape
        out = np.empty((n, len(self.weights)))
        for g, (mu, cov) in enumerate(zip(self.means, self.covs)):
            chol = np.linalg.cholesky(cov)
            diff = X - mu
            z = np.linalg.solve(chol, diff.T)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            out[:, g] = -0.5 * (np.sum(z * z, axis=0) + logdet
                                + dim * np.log(2 * np.pi))
        return out

    def sample(self, n, seed=0):
        rng = np.random.default_rng(seed)
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        out = np.empty((n, self.dim))
        for g in range(len(self.weights)):
            idx = np.where(comp == g)[0]
            if idx.size:
                chol = np.linalg.cholesky(self.covs[g])
                out[idx] = self.means[g] + \
                    rng.standard_normal((idx.size, self.dim)) @ chol.T
        return out

    def marginal(self, dims):
        """Marginal mixture over a subset of coordinates."""
        dims = np.asarray(dims)
        return FeatureDensity(self.weights.copy(), self.means[:, dims],
                              self.covs[:, dims[:, None], dims[None, :]])


def _logsumexp(A, axis):
    mx = A.max(axis=axis, keepdims=True)
    return (mx + np.log(np.exp(A - mx).sum(axis=axis, keepdims=True))) \
        .squeeze(axis)


def fit_density(samples, G, seed=0, max_iter=200, tol=1e-7, n_init=4):
    """Full-covariance Gaussian mixture via EM.

    Log-likelihood is nondecreasing per iteration; covariances carry an
    eps*I regularizer with eps = 1e-6 * mean data variance; components
    whose weight drops below 1/N are pruned with a warning. EM is
    restarted n_init times from different random means and the run with
    the best final log-likelihood is kept.
    """
    best = None
    for r in range(n_init):
        dens = _fit_density_once(samples, G, seed + 7919 * r, max_iter, tol)
        if best is None or dens.log_likelihoods[-1] \
                > best.log_likelihoods[-1]:
            best = dens
    return best


def _fit_density_once(samples, G, seed, max_iter, tol):
    if isinstance(samples, WeightSampleBank):
        samples = samples.samples
    X = np.asarray(samples, dtype=np.float64)
    N, dim = X.shape
    if N < 10 * G:
        raise ValueError(f"need at least 10*G = {10*G} samples, got {N}")
    rng = np.random.default_rng(seed)
    eps = 1e-6 * float(np.mean(np.var(X, axis=0)))
    eps = max(eps, 1e-12)
    means = X[rng.choice(N, size=G, replace=False)].copy()
    covs = np.repeat(np.cov(X.T).reshape(1, dim, dim) + eps * np.eye(dim),
                     G, axis=0)
    weights = np.full(G, 1.0 / G)
    density = FeatureDensity(weights, means, covs)
    prev_ll = -np.inf
    for _ in range(max_iter):
        logp = density._component_logpdf(X) + np.log(density.weights)
        ll = float(np.mean(_logsumexp(logp, axis=1)))
        density.log_likelihoods.append(ll)
        resp = np.exp(logp - _logsumexp(logp, axis=1)[:, None])
        nk = resp.sum(axis=0)
        alive = nk / N >= 1.0 / N
        if not alive.all():
            warnings.warn(f"pruning {int((~alive).sum())} degenerate "
                          "mixture component(s)")
            density.weights = density.weights[alive]
            density.weights /= density.weights.sum()
            density.means = density.means[alive]
            density.covs = density.covs[alive]
            prev_ll = -np.inf
            continue
        density.weights = nk / N
        density.means = (resp.T @ X) / nk[:, None]
        for g in range(density.means.shape[0]):
            diff = X - density.means[g]
            density.covs[g] = (resp[:, g][:, None] * diff).T @ diff / nk[g] \
                + eps * np.eye(dim)
        if abs(ll - prev_ll) < tol * max(1.0, abs(ll)):
            break
        prev_ll = ll
    return density


def _ridge_top_layer(theta, dataset, lam, activation="relu"):
    """Closed-form convex fit of the top layer with frozen features.

    Works in the rescaled coordinates W = (alpha/sqrt(m)) u so the ridge
    strength matches the kernel objective; returns test accuracy and W.
    """
    Xtr, ytr = dataset.train_xy()
    Xte, yte = dataset.test_xy()
    m = theta.shape[0]
    k = dataset.num_classes
    Yoh = np.eye(k)[np.asarray(ytr).astype(int).ravel()]
    Phi = act(activation, Xtr @ theta.T) / np.sqrt(m)
    n = Phi.shape[0]
    W = np.linalg.solve(Phi.T @ Phi + n * lam * np.eye(m), Phi.T @ Yoh)
    Phi_te = act(activation, Xte @ theta.T) / np.sqrt(m)
    acc = float(np.mean((Phi_te @ W).argmax(axis=1)
                        == np.asarray(yte).astype(int).ravel()))
    train_loss = float(0.5 * np.sum((Phi @ W - Yoh) ** 2) / n)
    return acc, train_loss, W


def repopulate_rf(density, m, dataset, lam=1e-4, seed=0, activation="relu",
                  k_dim=None):
    """Repopulated-feature RF versus a fresh-Gaussian RF baseline.

    Samples m bottom weights from the theta-marginal of the density,
    freezes them, and fits the top layer in closed form; the baseline
    draws theta from the gaussian(1) init law with an identical budget.
    Returns a dict with both accuracies.
    """
    d = dataset.d
    if k_dim is None:
        k_dim = density.dim - d
    theta_density = density.marginal(np.arange(k_dim, k_dim + d))
    theta_rep = theta_density.sample(m, seed=seed)
    rng = np.random.default_rng(seed)
    theta_base = rng.standard_normal((m, d))
    acc_rep, loss_rep, _ = _ridge_top_layer(theta_rep, dataset, lam,
                                            activation)
    acc_base, loss_base, _ = _ridge_top_layer(theta_base, dataset, lam,
                                              activation)
    return {"repopulated_accuracy": acc_rep,
            "baseline_accuracy": acc_base,
            "repopulated_train_loss": loss_rep,
            "baseline_train_loss": loss_base}


def tangent_compare(dataset, density, m=1000, seed=0, steps=400, eta=1.0,
                    activation="relu", alpha=None):
    """Train tangent models anchored at a random init and at generated
    weights from the learned density; report train loss / test accuracy.
    """
    d = dataset.d
    k = dataset.num_classes
    if alpha is None:
        alpha = np.sqrt(m)
    loss_spec = M.LossSpec("squared", k)
    Xtr, ytr = dataset.train_xy()
    Xte, yte = dataset.test_xy()
    Yoh = np.eye(k)[np.asarray(ytr).astype(int).ravel()]

    def run(anchor_net):
        tm = T.TangentModel(anchor_net)
        cfg_eta_u, cfg_eta_th = eta, eta
        for _ in range(steps):
            gu, gt, _ = T.lin_gradients(tm, loss_spec, Xtr, Yoh)
            tm.delta_u -= cfg_eta_u * gu
            tm.delta_theta -= cfg_eta_th * gt
        train_loss = M.loss_value(loss_spec, T.lin_forward(tm, Xtr), Yoh)
        acc = float(np.mean(T.lin_forward(tm, Xte).argmax(axis=1)
                            == np.asarray(yte).astype(int).ravel()))
        return {"train_loss": train_loss, "test_accuracy": acc}

    init_net = M.init_net(m, d, k, alpha, activation,
                          M.InitSpec("gaussian", 1.0, seed))
    gen = density.sample(m, seed=seed)
    u_gen, theta_gen = gen[:, :k], gen[:, k:]
    gen_net = M.TwoLayerNet(alpha, u_gen, theta_gen, activation)
    return {"init_anchor": run(init_net.snapshot_net()),
            "learned_anchor": run(gen_net.snapshot_net())}


def importance_prune(big_net, m_keep, strategy, dataset, seed=0, lam=1e-4):
    """Prune to m_keep neurons and retrain the top layer (convex).

    strategy "uniform": indices uniformly without replacement;
    strategy "importance": probability proportional to |u_j|, sequential
    weighted draws without replacement.
    """
    if strategy not in ("uniform", "importance"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if m_keep > big_net.m:
        raise ValueError("m_keep exceeds the net width")
    rng = np.random.default_rng(seed)
    if strategy == "uniform":
        keep = rng.choice(big_net.m, size=m_keep, replace=False)
    else:
        norms = np.linalg.norm(big_net.u, axis=1)
        if (norms > 0).sum() < m_keep:
            raise ValueError("fewer nonzero-importance neurons than m_keep")
        keep = rng.choice(big_net.m, size=m_keep, replace=False,
                          p=norms / norms.sum())
    theta = big_net.theta[np.sort(keep)]
    acc, train_loss, W = _ridge_top_layer(theta, dataset, lam,
                                          big_net.activation)
    m = theta.shape[0]
    u = np.sqrt(m) * W  # back to unscaled coordinates at alpha = 1
    pruned = M.TwoLayerNet(1.0, u, theta, big_net.activation)
    return pruned, acc


def variance_diagnostic(cloud, X_probe, m_primes=None, n_resamples=20,
                        seed=0, normalized=False):
    """Predicted vs empirical sub-network deviation (the 1/m' law).

    Prediction per sub-width m':
        (1/m') * mean_x (1/m) sum_j |alpha u_j h(theta_j, x) - f(x)|^2.
    Empirical: mean over resamples (with replacement, i.i.d. from the
    empirical measure) of mean_x |f_sub(x) - f(x)|^2.
    """
    X = np.asarray(X_probe, dtype=np.float64)
    m = cloud.m
    if m_primes is None:
        m_primes = [m // 2, m // 4, m // 8]
    H = act(cloud.activation, X @ cloud.theta.T)      # n x m
    if normalized:
        H = H / unit_second_moment_scale(cloud.theta, X, cloud.activation)
    contrib = cloud.alpha * np.einsum("ij,jk->ijk", H, cloud.u)  # n x m x k
    f_full = contrib.mean(axis=1)                     # n x k
    sq_dev = np.sum((contrib - f_full[:, None, :]) ** 2, axis=2)  # n x m
    base = float(np.mean(sq_dev))       # mean_x (1/m) sum_j |...|^2
    rng = np.random.default_rng(seed)
    out = {}
    for mp in m_primes:
        pred = base / mp
        errs = []
        for _ in range(n_resamples):
            idx = rng.integers(0, m, size=mp)
            f_sub = contrib[:, idx, :].mean(axis=1)
            errs.append(float(np.mean(np.sum((f_sub - f_full) ** 2, axis=1))))
        emp = float(np.mean(errs))
        out[mp] = {"predicted": pred, "empirical": emp,
                   "ratio": emp / pred if pred > 0 else float("nan")}
    return out
