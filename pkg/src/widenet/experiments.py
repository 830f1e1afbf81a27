"""Experiment runners: one per named training/kernel diagnostic.

Every run writes manifest.json (full resolved config + content hash)
before any results, then one CSV per recorded series, one SVG per
series, and results.json with headline metrics plus pass/fail checks.
"""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import config as C
from . import data as D
from . import features as F
from . import kernels as K
from . import meanfield as MF
from . import model as M
from . import optim as O
from . import serialize
from . import svgplot
from . import tangent as T

EXPERIMENTS = ("train", "alpha_sweep", "m_sweep", "linearization",
               "break_ntk", "mf_target", "repopulate", "tangent_compare",
               "prune", "kernel_fit")

EXPERIMENT_DESCRIPTIONS = {
    "train": "single training run with trace diagnostics",
    "alpha_sweep": "solution distance to init versus output scaling",
    "m_sweep": "distance to init versus width at alpha = sqrt(m)",
    "linearization": "net versus tangent-model loss gap",
    "break_ntk": "large rate / momentum / He init leave the lazy regime",
    "mf_target": "recover the 4-neuron sigmoid teacher",
    "repopulate": "repopulated features versus fresh random features",
    "tangent_compare": "tangent spaces at init versus at learned features",
    "prune": "importance versus uniform neuron sampling",
    "kernel_fit": "kernel objective fit with primal-dual cross-check",
}


class RunError(RuntimeError):
    pass


def resolve_dataset(cfg, seed=0):
    """Dataset section: kind = synth | digits | mnist."""
    ds = dict(cfg.get("dataset", {}))
    kind = ds.pop("kind", "synth")
    if kind == "synth":
        ds.setdefault("seed", seed)
        return D.synth_classification(
            n=ds.get("n", 2000), d=ds.get("d", 100),
            informative=ds.get("informative", 10),
            classes=ds.get("classes", 2),
            class_sep=ds.get("class_sep", 1.0), seed=ds["seed"])
    if kind == "digits":
        base = D.load_digits_dataset(seed=ds.get("seed", seed))
        if "n_train" in ds:
            base = base.subset(ds["n_train"], ds.get("n_test"),
                               seed=ds.get("seed", seed))
        return base
    if kind == "mnist":
        root = os.environ.get("LAB_DATA_DIR", ds.get("root", "."))
        paths = {key: os.path.join(root, ds[key])
                 for key in ("train_images", "train_labels",
                             "test_images", "test_labels") if key in ds}
        for key in ("train_images", "train_labels"):
            if key not in paths:
                raise RunError(f"dataset.{key}: required for kind=mnist")
            if not os.path.exists(paths[key]):
                raise RunError(f"dataset file not found: {paths[key]}")
        base = D.load_mnist(paths["train_images"], paths["train_labels"],
                            paths.get("test_images"),
                            paths.get("test_labels"))
        if "n_train" in ds:
            base = base.subset(ds["n_train"], ds.get("n_test"),
                               seed=ds.get("seed", seed))
        return base
    raise RunError(f"dataset.kind: unknown kind {kind!r}")


def _train_config(cfg, seed, **overrides):
    body = dict(cfg.get("train", {}))
    body.update(overrides)
    body.setdefault("seed", seed)
    return O.TrainConfig(**body)


def write_manifest(outdir, cfg):
    os.makedirs(outdir, exist_ok=True)
    manifest = {"config": cfg, "hash": C.content_hash(cfg),
                "experiment": cfg.get("experiment")}
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_results(outdir, results):
    with open(os.path.join(outdir, "results.json"), "w") as fh:
        json.dump(results, fh, sort_keys=True, indent=2, default=float)
        fh.write("\n")


def _write_summary_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _model_net(cfg, dataset, seed, m=None, alpha=None):
    mod = dict(cfg.get("model", {}))
    m = m if m is not None else mod.get("m", 100)
    alpha = alpha if alpha is not None else mod.get("alpha", 1.0)
    if alpha == "sqrt_m":
        alpha = float(np.sqrt(m))
    init = M.InitSpec(mod.get("init", "gaussian"), mod.get("sigma2", 1.0),
                      seed)
    return M.init_net(m, dataset.d, dataset.num_classes, float(alpha),
                      mod.get("activation", "relu"), init)


# --- individual runners ---------------------------------------------------

def run_train(cfg, outdir):
    seed = cfg.get("seeds", [0])[0]
    dataset = resolve_dataset(cfg, seed)
    net = _model_net(cfg, dataset, seed)
    loss_spec = M.LossSpec("softmax_ce", dataset.num_classes)
    reg = cfg.get("reg", {})
    reg_spec = M.RegSpec(reg.get("lambda_u", 0.0), reg.get("lambda_theta", 0.0))
    net, trace = O.train(net, dataset, loss_spec, reg_spec,
                         _train_config(cfg, seed))
    trace.write_csv(os.path.join(outdir, "trace.csv"))
    serialize.save_net(net, os.path.join(outdir, "net.bin"))
    svgplot.save(os.path.join(outdir, "loss.svg"),
                 [("train", trace.steps, trace.train_loss),
                  ("test", trace.steps, trace.test_loss)],
                 title="training loss", xlabel="step", ylabel="loss")
    return {"final_train_loss": trace.train_loss[-1],
            "final_accuracy": trace.accuracy[-1]}


def run_alpha_sweep(cfg, outdir):
    seeds = cfg.get("seeds", [0])
    m = cfg.get("model", {}).get("m", 1000)
    alphas = cfg.get("alphas", [1.0, float(np.sqrt(m)), float(m)])
    rows = []
    for seed in seeds:
        dataset = resolve_dataset(cfg, seed)
        res = MF.alpha_sweep(m, dataset, _train_config(cfg, seed), alphas,
                             init_seed=seed)
        for rec in res:
            rows.append([seed, rec["alpha"], rec["dist_u"],
                         rec["dist_theta"], rec["train_loss"]])
    _write_summary_csv(os.path.join(outdir, "alpha_sweep.csv"),
                       ["seed", "alpha", "dist_u", "dist_theta",
                        "train_loss"], rows)
    med = {}
    for a in alphas:
        vals = [r[3] for r in rows if r[1] == float(a)]
        med[float(a)] = float(np.median(vals))
    svgplot.save(os.path.join(outdir, "dist_theta.svg"),
                 [("median dist_theta", sorted(med), [med[a] for a in
                                                      sorted(med)])],
                 title="distance to init vs alpha", xlabel="alpha",
                 ylabel="dist_theta")
    decreasing = all(med[a] > med[b] for a, b in zip(sorted(med),
                                                     sorted(med)[1:]))
    return {"median_dist_theta": med,
            "checks": {"dist_theta_decreases_with_alpha": decreasing}}


def run_m_sweep(cfg, outdir):
    seeds = cfg.get("seeds", [0])
    ms = cfg.get("ms", [100, 1000, 10000])
    couplings = cfg.get("couplings", ["practical", "ntk_equal"])
    rows = []
    for coupling in couplings:
        for m in ms:
            for seed in seeds:
                dataset = resolve_dataset(cfg, seed)
                net = _model_net(cfg, dataset, seed, m=m,
                                 alpha=float(np.sqrt(m)))
                tc = _train_config(cfg, seed, coupling=coupling)
                loss_spec = M.LossSpec("softmax_ce", dataset.num_classes)
                net, trace = O.train(net, dataset, loss_spec, M.RegSpec(), tc)
                rows.append([coupling, m, seed, trace.dist_u[-1],
                             trace.dist_theta[-1], trace.train_loss[-1]])
    _write_summary_csv(os.path.join(outdir, "m_sweep.csv"),
                       ["coupling", "m", "seed", "dist_u", "dist_theta",
                        "train_loss"], rows)
    checks, med = {}, {}
    for coupling in couplings:
        series = []
        for m in ms:
            vals = [r[4] for r in rows if r[0] == coupling and r[1] == m]
            med[(coupling, m)] = float(np.median(vals))
            series.append(med[(coupling, m)])
        checks[f"dist_theta_decreases_{coupling}"] = all(
            a > b for a, b in zip(series, series[1:]))
    svgplot.save(os.path.join(outdir, "dist_theta.svg"),
                 [(c, ms, [med[(c, m)] for m in ms]) for c in couplings],
                 title="distance to init vs width (alpha=sqrt(m))",
                 xlabel="m", ylabel="dist_theta")
    return {"median_dist_theta": {f"{c}:{m}": v
                                  for (c, m), v in med.items()},
            "checks": checks}


def run_linearization(cfg, outdir):
    seed = cfg.get("seeds", [0])[0]
    dataset = resolve_dataset(cfg, seed)
    net = _model_net(cfg, dataset, seed, alpha="sqrt_m")
    loss_spec = M.LossSpec("softmax_ce", dataset.num_classes)
    nn_tr, lin_tr, gaps, _, _ = T.train_pair(net, _train_config(cfg, seed),
                                             dataset, loss_spec)
    gaps.write_csv(os.path.join(outdir, "gap.csv"))
    svgplot.save(os.path.join(outdir, "losses.svg"),
                 [("net", gaps.steps, gaps.loss_nn),
                  ("tangent", gaps.steps, gaps.loss_lin)],
                 title="net vs tangent model", xlabel="step", ylabel="loss")
    return {"terminal_rel_gap": gaps.terminal_rel_gap(),
            "terminal_pred_gap": gaps.pred_gap[-1]}


def run_break_ntk(cfg, outdir):
    seeds = cfg.get("seeds", [0])
    m = cfg.get("model", {}).get("m", 5000)
    body = cfg.get("break_ntk", {})
    reports = []
    for seed in seeds:
        dataset = resolve_dataset(cfg, seed)
        reports.append(T.break_ntk_experiment(
            dataset, m=m, eta=body.get("eta", 0.01),
            steps=body.get("steps", 200),
            batch_size=body.get("batch_size", 64), seed=seed))
    rows = []
    for seed, rep in zip(seeds, reports):
        for tag, rec in rep.items():
            rows.append([seed, tag, rec["dist_theta"],
                         rec["rel_dist_theta"], rec["acc_nn"],
                         rec["acc_lin"], rec["acc_gap"]])
    _write_summary_csv(os.path.join(outdir, "break_ntk.csv"),
                       ["seed", "variation", "dist_theta", "rel_dist_theta",
                        "acc_nn", "acc_lin", "acc_gap"], rows)
    med = {}
    for tag in reports[0]:
        med[tag] = {key: float(np.median([rep[tag][key] for rep in reports]))
                    for key in ("dist_theta", "rel_dist_theta", "acc_gap")}
    checks = {f"{tag}_moves_further": med[tag]["dist_theta"]
              > med["baseline"]["dist_theta"]
              for tag in med if tag != "baseline"}
    return {"median": med, "checks": checks}


def run_mf_target(cfg, outdir):
    seeds = cfg.get("seeds", [0, 1, 2, 3, 4])
    ms = cfg.get("ms", [4, 16, 64, 256])
    body = cfg.get("mf_target", {})
    kwargs = {key: body[key] for key in ("n", "steps", "eta", "lambda_p",
                                         "record_every") if key in body}
    rows = []
    for m in ms:
        for seed in seeds:
            (rec_steps, losses), cloud, _ = MF.target_experiment(
                m, seed=seed, **kwargs)
            path = os.path.join(outdir, f"loss_m{m}_seed{seed}.csv")
            _write_summary_csv(path, ["step", "loss"],
                               list(zip(rec_steps, losses)))
            rows.append([m, seed, losses[-1], MF.wasted_fraction(cloud)])
            if seed == seeds[0]:
                MF.export_cloud_csv(cloud, os.path.join(
                    outdir, f"cloud_m{m}_seed{seed}.csv"))
    _write_summary_csv(os.path.join(outdir, "summary.csv"),
                       ["m", "seed", "terminal_loss", "wasted_fraction"],
                       rows)
    med = {m: float(np.median([r[2] for r in rows if r[0] == m]))
           for m in ms}
    svgplot.save(os.path.join(outdir, "terminal_loss.svg"),
                 [("median terminal loss", ms, [med[m] for m in ms])],
                 title="teacher reproduction", xlabel="m student",
                 ylabel="terminal loss")
    checks = {"loss_nonincreasing_in_m": all(
        med[a] >= med[b] for a, b in zip(ms, ms[1:]))}
    if 4 in med and 256 in med:
        checks["m4_stuck_10x"] = med[4] >= 10 * med[256]
    return {"median_terminal_loss": {str(m): v for m, v in med.items()},
            "checks": checks}


def run_repopulate(cfg, outdir):
    seeds = cfg.get("seeds", [0, 1, 2])
    body = cfg.get("repopulate", {})
    dataset = resolve_dataset(cfg, seeds[0])
    bank = F.build_bank(dataset, runs=body.get("runs", 50),
                        m=body.get("bank_m", 100),
                        steps=body.get("bank_steps", 200),
                        seed=seeds[0])
    bank.write_csv(os.path.join(outdir, "bank.csv"))
    density = F.fit_density(bank, body.get("components", 16), seed=seeds[0])
    rows = []
    for seed in seeds:
        res = F.repopulate_rf(density, body.get("m", 1000), dataset,
                              lam=body.get("lam", 1e-4), seed=seed,
                              k_dim=bank.k)
        rows.append([seed, res["repopulated_accuracy"],
                     res["baseline_accuracy"]])
    _write_summary_csv(os.path.join(outdir, "repopulate.csv"),
                       ["seed", "repopulated_accuracy", "baseline_accuracy"],
                       rows)
    gain = float(np.median([r[1] - r[2] for r in rows]))
    return {"median_gain": gain,
            "checks": {"repopulated_beats_baseline": gain > 0}}


def run_tangent_compare(cfg, outdir):
    seeds = cfg.get("seeds", [0, 1, 2])
    body = cfg.get("tangent_compare", {})
    dataset = resolve_dataset(cfg, seeds[0])
    bank = F.build_bank(dataset, runs=body.get("runs", 20),
                        m=body.get("bank_m", 100),
                        steps=body.get("bank_steps", 200), seed=seeds[0])
    density = F.fit_density(bank, body.get("components", 8), seed=seeds[0])
    rows = []
    for seed in seeds:
        rep = F.tangent_compare(dataset, density, m=body.get("m", 1000),
                                seed=seed, steps=body.get("steps", 400))
        rows.append([seed, rep["init_anchor"]["train_loss"],
                     rep["init_anchor"]["test_accuracy"],
                     rep["learned_anchor"]["train_loss"],
                     rep["learned_anchor"]["test_accuracy"]])
    _write_summary_csv(os.path.join(outdir, "tangent_compare.csv"),
                       ["seed", "init_train_loss", "init_test_accuracy",
                        "learned_train_loss", "learned_test_accuracy"], rows)
    gain = float(np.median([r[4] - r[2] for r in rows]))
    return {"median_accuracy_gain": gain,
            "checks": {"learned_anchor_beats_init": gain > 0}}


def run_prune(cfg, outdir):
    seeds = cfg.get("seeds", [0, 1, 2, 3, 4])
    body = cfg.get("prune", {})
    m = body.get("m", 10000)
    m_keep = body.get("m_keep", 10)
    rows = []
    for seed in seeds:
        dataset = resolve_dataset(cfg, seed)
        net = _model_net(cfg, dataset, seed, m=m, alpha=1.0)
        loss_spec = M.LossSpec("softmax_ce", dataset.num_classes)
        reg_spec = M.RegSpec(lambda_u=body.get("lambda_u", 1e-3))
        cfg_train = _train_config(cfg, seed)
        net, _ = O.train(net, dataset, loss_spec, reg_spec, cfg_train)
        _, acc_imp = F.importance_prune(net, m_keep, "importance", dataset,
                                        seed=seed)
        _, acc_uni = F.importance_prune(net, m_keep, "uniform", dataset,
                                        seed=seed)
        rows.append([seed, acc_imp, acc_uni])
    _write_summary_csv(os.path.join(outdir, "prune.csv"),
                       ["seed", "importance_accuracy", "uniform_accuracy"],
                       rows)
    med_imp = float(np.median([r[1] for r in rows]))
    med_uni = float(np.median([r[2] for r in rows]))
    return {"median_importance_accuracy": med_imp,
            "median_uniform_accuracy": med_uni,
            "checks": {"importance_beats_uniform": med_imp > med_uni}}


def run_kernel_fit(cfg, outdir):
    seed = cfg.get("seeds", [0])[0]
    body = cfg.get("kernel_fit", {})
    dataset = resolve_dataset(cfg, seed)
    Xtr, ytr = dataset.train_xy()
    n = min(body.get("n", 100), Xtr.shape[0])
    m = body.get("m", 500)
    lam = body.get("lam", 1e-3)
    X, y = Xtr[:n], ytr[:n]
    k = dataset.num_classes
    Yoh = np.eye(k)[np.asarray(y).astype(int).ravel()]
    theta = np.random.default_rng(seed).standard_normal((m, dataset.d))
    Km = K.gram_rf(theta, "relu", X)
    dual = K.solve_dual(Km, Yoh, lam, M.LossSpec("squared", k), anchors=X)
    u = K.primal_from_dual(dual.beta, theta, "relu", X)
    net = M.TwoLayerNet(1.0, u, theta, "relu")
    probe = Xtr[n:n + 50] if Xtr.shape[0] >= n + 50 else X
    K_cross = K.gram_rf(theta, "relu", probe, X)
    pred_dual = dual.predict(K_cross)
    pred_primal = M.forward(net, probe)
    rel = float(np.max(np.abs(pred_dual - pred_primal))
                / max(np.max(np.abs(pred_dual)), 1e-300))
    _write_summary_csv(os.path.join(outdir, "kernel_fit.csv"),
                       ["metric", "value"],
                       [["primal_dual_rel_err", rel],
                        ["n", n], ["m", m], ["lam", lam]])
    return {"primal_dual_rel_err": rel,
            "checks": {"primal_dual_match": rel < 1e-9}}


RUNNERS = {
    "train": run_train,
    "alpha_sweep": run_alpha_sweep,
    "m_sweep": run_m_sweep,
    "linearization": run_linearization,
    "break_ntk": run_break_ntk,
    "mf_target": run_mf_target,
    "repopulate": run_repopulate,
    "tangent_compare": run_tangent_compare,
    "prune": run_prune,
    "kernel_fit": run_kernel_fit,
}


def run(cfg, outdir):
    """Validate, write the manifest, then run; returns the results dict."""
    experiment = cfg.get("experiment")
    if experiment not in RUNNERS:
        raise RunError(f"experiment: unknown experiment {experiment!r}; "
                       f"expected one of {EXPERIMENTS}")
    errors = C.validate(cfg, {"experiment": (True, str)})
    if errors:
        raise RunError("; ".join(errors))
    write_manifest(outdir, cfg)
    results = RUNNERS[experiment](cfg, outdir)
    write_results(outdir, results)
    return results


def _run_point(args):
    cfg, outdir = args
    return run(cfg, outdir)


def run_sweep(configs_outdirs, jobs=1):
    """Run independent sweep points, optionally in parallel processes."""
    if jobs <= 1:
        return [_run_point(a) for a in configs_outdirs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_point, configs_outdirs))


def report(output_dir, strict=False):
    """Consolidated markdown summary over all manifests under output_dir.

    Returns (markdown text, exit code); exit code 1 in strict mode when
    any recorded check failed.
    """
    sections = {}
    unreadable = []
    for root, _, files in os.walk(output_dir):
        if "manifest.json" not in files:
            continue
        try:
            with open(os.path.join(root, "manifest.json")) as fh:
                manifest = json.load(fh)
        except (OSError, json.JSONDecodeError):
            unreadable.append(os.path.join(root, "manifest.json"))
            continue
        results = {}
        rpath = os.path.join(root, "results.json")
        if os.path.exists(rpath):
            with open(rpath) as fh:
                results = json.load(fh)
        exp = manifest.get("experiment", "unknown")
        sections.setdefault(exp, []).append((root, manifest, results))
    lines = ["# Experiment report", ""]
    any_fail = False
    for exp in sorted(sections):
        lines.append(f"## {exp}")
        lines.append("")
        lines.append("| run | hash | seeds | headline | checks |")
        lines.append("|---|---|---|---|---|")
        for root, manifest, results in sections[exp]:
            checks = results.get("checks", {})
            fails = [name for name, ok in checks.items() if not ok]
            any_fail = any_fail or bool(fails)
            status = "PASS" if not fails else "FAIL: " + ",".join(fails)
            headline = {key: val for key, val in results.items()
                        if key != "checks"}
            seeds = manifest.get("config", {}).get("seeds", [])
            lines.append(f"| {os.path.relpath(root, output_dir)} "
                         f"| {manifest.get('hash', '')} | {seeds} "
                         f"| {json.dumps(headline, sort_keys=True)[:120]} "
                         f"| {status} |")
        lines.append("")
    if unreadable:
        lines.append("## Unreadable manifests")
        lines.extend(f"- {path}" for path in unreadable)
    code = 1 if (strict and any_fail) else 0
    return "\n".join(lines) + "\n", code
