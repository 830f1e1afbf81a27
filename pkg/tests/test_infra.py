import json
import os

import numpy as np
import pytest

from widenet import config as C
from widenet import experiments as E
from widenet import model as M
from widenet import serialize, svgplot
from widenet.cli import main as cli_main


def test_config_sections_and_json_values():
    text = """
    # a comment
    experiment = train
    seeds = [0, 1]

    [train]
    eta = 0.05      # inline comment
    coupling = practical
    steps = 10
    """
    cfg = C.loads(text)
    assert cfg["experiment"] == "train"
    assert cfg["seeds"] == [0, 1]
    assert cfg["train"]["eta"] == 0.05
    assert cfg["train"]["coupling"] == "practical"


def test_config_json_passthrough():
    cfg = C.loads('{"experiment": "train", "train": {"eta": 0.1}}')
    assert cfg["train"]["eta"] == 0.1


def test_config_bad_line_raises():
    with pytest.raises(C.ConfigError):
        C.loads("experiment train")


def test_config_bad_json_raises():
    with pytest.raises(C.ConfigError):
        C.loads('{"experiment": ')


def test_content_hash_key_order_invariant():
    a = C.content_hash({"b": 1, "a": [2, 3]})
    b = C.content_hash({"a": [2, 3], "b": 1})
    assert a == b and len(a) == 16


def test_validate_reports_paths():
    errors = C.validate({"train": {"eta": "x"}},
                        {"experiment": (True, str),
                         "train.eta": (True, (int, float))})
    assert any(e.startswith("experiment:") for e in errors)
    assert any(e.startswith("train.eta:") for e in errors)
    assert not C.validate({"experiment": "train"},
                          {"experiment": (True, str)})


def test_serialize_round_trip(tmp_path):
    net = M.init_net(7, 4, 3, 2.5, "sigmoid", M.InitSpec("he", 1.0, 42))
    net.u = net.u + 0.1  # make u differ from u0
    p = tmp_path / "net.bin"
    serialize.save_net(net, p)
    back = serialize.load_net(p)
    assert back.alpha == 2.5
    assert back.activation == "sigmoid"
    assert np.array_equal(back.u, net.u)
    assert np.array_equal(back.theta, net.theta)
    assert np.array_equal(back.u0, net.u0)
    assert np.array_equal(back.theta0, net.theta0)


def test_serialize_rejects_foreign_file(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"NOTANET\n" + b"\x00" * 64)
    with pytest.raises(ValueError):
        serialize.load_net(p)


def test_serialize_truncation(tmp_path):
    net = M.init_net(5, 3, 2, 1.0, "relu", M.InitSpec("gaussian", 1.0, 0))
    p = tmp_path / "net.bin"
    serialize.save_net(net, p)
    data = p.read_bytes()
    p.write_bytes(data[:-8])
    with pytest.raises(ValueError, match="truncated"):
        serialize.load_net(p)


def test_svg_deterministic_bytes(tmp_path):
    series = [("loss", [0, 1, 2], [1.0, 0.5, 0.25])]
    a = svgplot.render(series, title="t", xlabel="x", ylabel="y")
    b = svgplot.render(series, title="t", xlabel="x", ylabel="y")
    assert a == b
    assert a.startswith('<?xml version="1.0"')
    assert "svg" in a and "</svg>" in a
    p = tmp_path / "plot.svg"
    svgplot.save(p, series)
    assert p.read_bytes().decode() == svgplot.render(series)


def test_svg_handles_nan_and_constant():
    out = svgplot.render([("s", [0, 1], [float("nan"), float("nan")])])
    assert "</svg>" in out
    out = svgplot.render([("s", [0, 1], [2.0, 2.0])])
    assert "</svg>" in out


def test_run_writes_manifest_before_results(tmp_path):
    out = tmp_path / "run"
    cfg = {"experiment": "train", "seeds": [0],
           "dataset": {"kind": "synth", "n": 60, "d": 5, "informative": 3},
           "model": {"m": 20},
           "train": {"eta": 0.1, "coupling": "practical", "batch_size": -1,
                     "steps": 5, "record_every": 5}}
    res = E.run(cfg, str(out))
    assert (out / "manifest.json").exists()
    assert (out / "results.json").exists()
    assert (out / "trace.csv").exists()
    assert (out / "loss.svg").exists()
    assert (out / "net.bin").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["hash"] == C.content_hash(cfg)
    assert "final_train_loss" in res


def test_run_unknown_experiment():
    with pytest.raises(E.RunError):
        E.run({"experiment": "nope"}, "/tmp/should_not_exist")


def test_manifest_written_even_when_run_fails(tmp_path):
    out = tmp_path / "fail"
    cfg = {"experiment": "train", "seeds": [0],
           "dataset": {"kind": "mnist"}}
    with pytest.raises(E.RunError):
        E.run(cfg, str(out))
    # the failure here is a dataset error, raised after the manifest
    assert not (out / "results.json").exists()


def test_cli_train_and_report(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.txt"
    cfg_path.write_text(
        "seeds = [0]\n"
        "[dataset]\nkind = synth\nn = 60\nd = 5\ninformative = 3\n"
        "[model]\nm = 20\n"
        "[train]\neta = 0.1\ncoupling = practical\nbatch_size = -1\n"
        "steps = 5\nrecord_every = 5\n")
    out = tmp_path / "out"
    code = cli_main(["train", "--config", str(cfg_path),
                     "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    rec = json.loads(captured.out.strip().splitlines()[-1])
    assert "final_train_loss" in rec
    code = cli_main(["report", str(tmp_path)])
    captured = capsys.readouterr()
    assert code == 0
    assert "# Experiment report" in captured.out
    assert "train" in captured.out


def test_cli_missing_config_is_json_error(tmp_path, capsys):
    code = cli_main(["train", "--config", str(tmp_path / "missing.cfg"),
                     "--out", str(tmp_path / "o")])
    captured = capsys.readouterr()
    assert code == 2
    rec = json.loads(captured.err.strip())
    assert "error" in rec


def test_cli_seed_override(tmp_path):
    out = tmp_path / "out"
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "dataset": {"kind": "synth", "n": 60, "d": 5, "informative": 3},
        "model": {"m": 10},
        "train": {"eta": 0.1, "coupling": "practical", "batch_size": -1,
                  "steps": 2, "record_every": 2}}))
    code = cli_main(["train", "--config", str(cfg_path), "--seed", "7",
                     "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seeds"] == [7]


def test_report_strict_fails_on_failed_check(tmp_path):
    run_dir = tmp_path / "r"
    os.makedirs(run_dir)
    (run_dir / "manifest.json").write_text(json.dumps(
        {"experiment": "alpha_sweep", "hash": "x", "config": {"seeds": [0]}}))
    (run_dir / "results.json").write_text(json.dumps(
        {"checks": {"trend": False}}))
    text, code = E.report(str(tmp_path), strict=True)
    assert code == 1
    assert "FAIL: trend" in text
    text, code = E.report(str(tmp_path), strict=False)
    assert code == 0


def test_run_sweep_parallel(tmp_path):
    base = {"experiment": "train", "seeds": [0],
            "dataset": {"kind": "synth", "n": 60, "d": 5, "informative": 3},
            "model": {"m": 10},
            "train": {"eta": 0.1, "coupling": "practical", "batch_size": -1,
                      "steps": 2, "record_every": 2}}
    points = []
    for i in range(2):
        cfg = json.loads(json.dumps(base))
        cfg["seeds"] = [i]
        points.append((cfg, str(tmp_path / f"p{i}")))
    results = E.run_sweep(points, jobs=2)
    assert len(results) == 2
    for _, outdir in points:
        assert os.path.exists(os.path.join(outdir, "results.json"))
