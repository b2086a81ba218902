import csv
import json

import numpy as np
import pytest

from graphonstab.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, builtin_configs, main
from graphonstab.graphon import SBMGraphon
from graphonstab.ratings import generate_synthetic_ratings, write_ratings_csv

SBM_YAML = "graphon: {kind: sbm, boundaries: [0.5], probs: [[0.8, 0.2], [0.2, 0.8]]}\n"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_builtin_configs_listed(capsys):
    assert main(["--list-configs"]) == EXIT_OK
    names = capsys.readouterr().out.split()
    assert "constant_to_sbm" in names and set(names) == set(builtin_configs())


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--bogus"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["sweep"])
    assert exc.value.code == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["sweep", "--config", "builtin:nope", "--out", str(tmp_path)]) == EXIT_USAGE
    bad = write(tmp_path, "bad.yaml", SBM_YAML + "sizes: [64, 32]\n")
    assert main(["sweep", "--config", bad, "--out", str(tmp_path)]) == EXIT_USAGE


def test_sweep_builtin(tmp_path):
    assert main(["sweep", "--config", "builtin:constant_to_sbm", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_rows(tmp_path / "stability.csv")
    cells = {(int(r["n"]), int(r["seed"]), r["mode"]) for r in rows}
    assert cells == {(n, s, m) for n in (64, 128, 256) for s in range(3)
                     for m in ("deterministic", "stochastic")}
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["metadata"]["cells"] == 18
    assert "relative_difference" in summary["metadata"]


def test_sweep_threads_byte_identical(tmp_path):
    cfg = write(tmp_path, "c.yaml", SBM_YAML + "perturbation: {kind: scaled-copy, alpha: 0.1}\n"
                "sizes: [32, 64]\nseeds: 2\nmode: both\nconstants: {A1: 0.0, A3: 0.0}\n")
    outs = []
    for k, threads in enumerate((1, 4, 1)):
        out = tmp_path / f"o{k}"
        assert main(["sweep", "--config", cfg, "--out", str(out), "--threads", str(threads)]) == EXIT_OK
        outs.append((out / "stability.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]
    other = tmp_path / "seed5"
    assert main(["sweep", "--config", cfg, "--out", str(other), "--seed", "5"]) == EXIT_OK
    assert (other / "stability.csv").read_bytes() != outs[0]


def test_bounds_zero_perturbation(tmp_path):
    cfg = write(tmp_path, "c.yaml", SBM_YAML + "perturbation: {kind: additive-constant, a: 0.0}\n"
                "sizes: [64]\nconstants: {A1: 0.0, A3: 0.0}\n")
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["bound_thm1"] == 0.0 and report["epsilon"] == 0.0
    assert report["empirical_l2"] == 0.0
    assert read_rows(tmp_path / "report.csv")[0]["bound_thm1"] == "0"


def test_strict_degenerate_gap(tmp_path):
    cfg = write(tmp_path, "c.yaml",
                "graphon: {kind: sbm, boundaries: [0.5], probs: [[0.5, 0.0], [0.0, 0.5]]}\n"
                "sizes: [32]\nfilter: {form: band, c: 0.2}\nconstants: {A1: 0.0, A3: 0.0}\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert "degenerate-gap" in read_rows(tmp_path / "stability.csv")[0]["flags"]
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--strict"]) == EXIT_NUMERICAL


def test_spectrum_sbm(tmp_path):
    cfg = write(tmp_path, "g.yaml", SBM_YAML)
    assert main(["spectrum", "--config", cfg, "--n", "128", "--out", str(tmp_path), "--vectors"]) == EXIT_OK
    rows = read_rows(tmp_path / "spectrum.csv")
    vals = {int(r["signed_index"]): float(r["eigenvalue"]) for r in rows}
    assert abs(vals[1] - 0.5) <= 1e-9 and abs(vals[2] - 0.3) <= 1e-9
    assert (tmp_path / "eigenvectors.csv").exists()


def test_sample_then_spectrum_of_file(tmp_path):
    cfg = write(tmp_path, "g.yaml", SBM_YAML)
    assert main(["sample", "--config", cfg, "--n", "16", "--out", str(tmp_path)]) == EXIT_OK
    S = np.loadtxt(tmp_path / "graph.csv", delimiter=",")
    assert S.shape == (16, 16) and S[0, 15] == 0.2
    assert (tmp_path / "edges.csv").read_text().startswith("i,j,weight\n")
    out = tmp_path / "spec"
    assert main(["spectrum", "--graph", str(tmp_path / "graph.csv"), "--scale", "graph",
                 "--out", str(out)]) == EXIT_OK
    assert float(read_rows(out / "spectrum.csv")[0]["eigenvalue"]) == pytest.approx(8.0)
    assert main(["sample", "--config", cfg, "--n", "16", "--mode", "stochastic",
                 "--out", str(tmp_path / "s")]) == EXIT_OK
    S = np.loadtxt(tmp_path / "s" / "graph.csv", delimiter=",")
    assert set(np.unique(S)) <= {0.0, 1.0}


def test_homdensity(tmp_path):
    cfg = write(tmp_path, "h.yaml", "graphon: {kind: constant, p: 0.5}\nmotifs: [K2, K3]\n"
                "sizes: [8, 16]\nmode: deterministic\n")
    assert main(["homdensity", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = read_rows(tmp_path / "homdensity.csv")
    assert [(r["motif"], r["n"]) for r in rows] == [("K2", "8"), ("K2", "16"), ("K3", "8"), ("K3", "16")]
    assert float(rows[2]["density_graph"]) == 0.125
    bad = write(tmp_path, "b.yaml", "graphon: {kind: constant, p: 0.5}\nmotifs: [K9]\nsizes: [8]\n")
    assert main(["homdensity", "--config", bad, "--out", str(tmp_path)]) == EXIT_USAGE


def test_ingest_ratings(tmp_path):
    R = generate_synthetic_ratings(SBMGraphon((0.5,), [[0.8, 0.2], [0.2, 0.8]]), 50, 6, seed=0)
    write_ratings_csv(R, tmp_path / "r.csv")
    assert main(["ingest-ratings", "--ratings", str(tmp_path / "r.csv"), "--out", str(tmp_path)]) == EXIT_OK
    S = np.loadtxt(tmp_path / "correlation_graph.csv", delimiter=",")
    assert S.shape == (6, 6) and np.allclose(S, S.T) and S.max() == pytest.approx(1.0)
    assert main(["ingest-ratings", "--out", str(tmp_path)]) == EXIT_USAGE


def test_train_and_divergence(tmp_path):
    base = ("ratings:\n  synthetic:\n    graphon: {kind: sbm, boundaries: [0.5], probs: [[0.8, 0.2], [0.2, 0.8]]}\n"
            "    users: 60\n    items: 10\n    seed: 1\n"
            "architecture: {layers: 2, width: 3, K: 2, nonlinearity: abs}\nsteps: 20\n")
    cfg = write(tmp_path, "t.yaml", base + "lr: 0.02\n")
    assert main(["train", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert set(metrics["rmse"]) == {"train", "test"}
    losses = [float(r["loss"]) for r in read_rows(tmp_path / "loss.csv")]
    assert len(losses) >= 20 and losses[-1] < losses[0]
    assert json.loads((tmp_path / "model.json").read_text())["widths"] == [1, 3, 1]
    hot = write(tmp_path, "hot.yaml", base + "lr: 1000.0\n")
    assert main(["train", "--config", hot, "--out", str(tmp_path / "hot")]) == EXIT_NUMERICAL
