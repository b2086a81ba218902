"""Command-line interface.

Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
numerical failures (training divergence, or cells whose eigengap is
degenerate or undefined when ``--strict`` is given).

Configs are YAML files; ``builtin:<name>`` loads one of the configs shipped
with the package (see ``graphonstab --list-configs``).
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .config import ExperimentConfig, derive_seed, graph_seed
from .errors import ConfigError, DivergenceError, GraphonStabError
from .gnn import random_poly_params, train_mse
from .gnn import write_loss_csv
from .graphlimits import MOTIFS, convergence_table, write_convergence_csv
from .graphon import graphon_from_config
from .ratings import (build_correlation_graph, generate_synthetic_ratings, rating_task,
                      read_ratings_csv, split_rows)
from .sampling import deterministic_graph, read_graph_csv, stochastic_graph, write_edge_list, write_graph_csv
from .spectral import decompose, write_eigenvectors_csv, write_spectrum_csv
from .stability import SpectrumCache, run_stability_cell
from .sweep import sweep_to_dir, write_report_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
TRAIN_TAG = 0x5452414E
STRICT_FLAGS = ("degenerate-gap", "undefined-gap")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def builtin_configs():
    return sorted(p.name[:-5] for p in resources.files("graphonstab").joinpath("configs").iterdir()
                  if p.name.endswith(".yaml"))


def _config_path(name):
    if name.startswith("builtin:"):
        key = name.split(":", 1)[1]
        res = resources.files("graphonstab").joinpath("configs", f"{key}.yaml")
        if not res.is_file():
            raise ConfigError(f"no builtin config {key!r}; available: {', '.join(builtin_configs())}")
        return Path(str(res))
    path = Path(name)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return path


def _read_config(name):
    path = _config_path(name)
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw, path.parent


def _experiment(args):
    raw, base = _read_config(args.config)
    cfg = ExperimentConfig(raw, base)
    if args.seed is not None:
        cfg = cfg.with_master_seed(args.seed)
    return cfg


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _field(raw, key, kind, default=None):
    v = raw.get(key, default)
    if v is None:
        raise ConfigError(f"{key}: field is required")
    if kind is int and (isinstance(v, bool) or not isinstance(v, int) or v < 1):
        raise ConfigError(f"{key}: must be a positive integer")
    return v


def _master_seed(args, raw):
    return args.seed if args.seed is not None else int(raw.get("master_seed", 0))


# --- subcommands -------------------------------------------------------------


def cmd_sample(args):
    raw, base = _read_config(args.config) if args.config else ({}, Path.cwd())
    if "graphon" not in raw:
        raise ConfigError("graphon: field is required")
    W = graphon_from_config(raw["graphon"], base)
    n = args.n or _field(raw, "n", int)
    mode = args.mode or raw.get("mode", "deterministic")
    loops = bool(raw.get("self_loops", True))
    if mode == "deterministic":
        G = deterministic_graph(W, n, loops)
    elif mode == "stochastic":
        G = stochastic_graph(W, n, graph_seed(_master_seed(args, raw), n, 0, mode), loops)
    else:
        raise ConfigError("mode: must be 'deterministic' or 'stochastic'")
    out = _out_dir(args)
    write_graph_csv(G, out / "graph.csv")
    write_edge_list(G, out / "edges.csv")
    return EXIT_OK


def cmd_spectrum(args):
    if args.graph:
        S = read_graph_csv(args.graph).gso
    else:
        if not args.config:
            raise ConfigError("spectrum needs --config or --graph")
        raw, base = _read_config(args.config)
        if "graphon" not in raw:
            raise ConfigError("graphon: field is required")
        W = graphon_from_config(raw["graphon"], base)
        n = args.n or _field(raw, "n", int)
        mode = args.mode or raw.get("mode", "deterministic")
        loops = bool(raw.get("self_loops", True))
        if mode == "stochastic":
            S = stochastic_graph(W, n, graph_seed(_master_seed(args, raw), n, 0, mode), loops).gso
        else:
            S = deterministic_graph(W, n, loops).gso
    spec = decompose(S, args.scale)
    out = _out_dir(args)
    write_spectrum_csv(spec, out / "spectrum.csv")
    if args.vectors:
        write_eigenvectors_csv(spec, out / "eigenvectors.csv")
    return EXIT_OK


def _strict_failure(reports):
    return any(f in STRICT_FLAGS for r in reports for f in r.flags)


def cmd_bounds(args):
    cfg = _experiment(args)
    n = args.n or cfg.sizes[0]
    trial = args.trial if args.trial is not None else cfg.seeds[0]
    mode = args.mode or cfg.modes[0]
    report = run_stability_cell(cfg, n, trial, mode, SpectrumCache())
    out = _out_dir(args)
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
    write_report_csv([report], out / "report.csv")
    if args.strict and _strict_failure([report]):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sweep(args):
    cfg = _experiment(args)
    reports, _, _ = sweep_to_dir(cfg, args.out, max(1, args.threads))
    if args.strict and _strict_failure(reports):
        print("strict: at least one cell has a degenerate or undefined eigengap", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_homdensity(args):
    raw, base = _read_config(args.config)
    if "graphon" not in raw:
        raise ConfigError("graphon: field is required")
    W = graphon_from_config(raw["graphon"], base)
    sizes = raw.get("sizes")
    if not isinstance(sizes, list) or not sizes:
        raise ConfigError("sizes: must be a nonempty list of positive integers")
    mode = raw.get("mode", "deterministic")
    seeds = _field(raw, "seeds", int, 10 if mode == "stochastic" else 1)
    rows = convergence_table(W, raw.get("motifs", list(MOTIFS)), sizes, mode, seeds,
                             _master_seed(args, raw))
    write_convergence_csv(rows, _out_dir(args) / "homdensity.csv")
    return EXIT_OK


def _ratings_from(raw, base, master):
    src = raw.get("ratings")
    if not isinstance(src, dict):
        raise ConfigError("ratings: must be a mapping with 'file' or 'synthetic'")
    if "file" in src:
        path = Path(src["file"])
        path = path if path.is_absolute() else base / path
        if not path.exists():
            raise ConfigError(f"ratings.file: {path} does not exist")
        return read_ratings_csv(path)
    syn = src.get("synthetic")
    if not isinstance(syn, dict) or "graphon" not in syn:
        raise ConfigError("ratings.synthetic.graphon: field is required")
    W = graphon_from_config(syn["graphon"], base)
    seed = syn.get("seed", derive_seed(master, TRAIN_TAG))
    return generate_synthetic_ratings(W, int(syn.get("users", 300)), int(syn.get("items", 40)), seed,
                                      float(syn.get("missing_rate", 0.2)))


def cmd_train(args):
    raw, base = _read_config(args.config)
    master = _master_seed(args, raw)
    R = _ratings_from(raw, base, master)
    G, _ = build_correlation_graph(R, bool(raw.get("co_rated", False)))
    task = rating_task(R, raw.get("target"))
    train_rows, test_rows = split_rows(task.users.size, derive_seed(master, TRAIN_TAG, 1),
                                       float(raw.get("test_fraction", 0.1)))
    arch = raw.get("architecture", {})
    L, F, K = int(arch.get("layers", 2)), int(arch.get("width", 4)), int(arch.get("K", 3))
    rng = np.random.default_rng(derive_seed(master, TRAIN_TAG, 2))
    params = random_poly_params(L, F, K, rng, arch.get("nonlinearity", "relu"))
    m = G.n
    try:
        trained = train_mse(params, task.samples(train_rows), G, m, int(raw.get("steps", 200)),
                            float(raw.get("lr", 0.05)))
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = _out_dir(args)
    trained.save(out / "model.json")
    write_loss_csv(trained.loss_trace, out / "loss.csv")
    from .gnn import gnn_forward
    rmse = {}
    for name, rows in (("train", train_rows), ("test", test_rows)):
        pred = np.array([gnn_forward(trained, G, m, task.inputs[i])[task.target] for i in rows])
        truth = task.targets[rows, task.target]
        rmse[name] = float(np.sqrt(np.mean((pred - truth) ** 2)))
    with open(out / "metrics.json", "w") as fh:
        json.dump({"target_item": task.target + 1, "train_users": int(train_rows.size),
                   "test_users": int(test_rows.size), "rmse": rmse}, fh, indent=1, sort_keys=True)
    return EXIT_OK


def cmd_ingest(args):
    if args.ratings:
        R = read_ratings_csv(args.ratings)
    elif args.config:
        raw, base = _read_config(args.config)
        R = _ratings_from(raw, base, _master_seed(args, raw))
    else:
        raise ConfigError("ingest-ratings needs --ratings or --config")
    G, constant = build_correlation_graph(R, args.co_rated)
    write_graph_csv(G, _out_dir(args) / "correlation_graph.csv")
    if constant.any():
        print(f"{int(constant.sum())} item(s) have zero variance and are disconnected", file=sys.stderr)
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config path or builtin:<name>")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--strict", action="store_true",
                        help="exit 2 when a cell has a degenerate or undefined eigengap")

    p = _Parser(prog="graphonstab", description="Graphon signal processing and GNN stability bounds.")
    p.add_argument("--list-configs", action="store_true", help="list builtin configs and exit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("sample", parents=[common], help="sample a graph from a graphon")
    s.add_argument("--n", type=int)
    s.add_argument("--mode", choices=("deterministic", "stochastic"))
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("spectrum", parents=[common], help="signed spectrum of a graph or sampled graphon")
    s.add_argument("--graph", help="GSO matrix CSV")
    s.add_argument("--n", type=int)
    s.add_argument("--mode", choices=("deterministic", "stochastic"))
    s.add_argument("--scale", choices=("graph", "graphon"), default="graphon")
    s.add_argument("--vectors", action="store_true", help="also write eigenvectors.csv")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("bounds", parents=[common], help="stability report for one cell")
    s.add_argument("--n", type=int)
    s.add_argument("--trial", type=int, help="trial seed within the config")
    s.add_argument("--mode", choices=("deterministic", "stochastic"))
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("sweep", parents=[common], help="run every cell of a config")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("homdensity", parents=[common], help="motif density convergence table")
    s.set_defaults(func=cmd_homdensity)

    s = sub.add_parser("train", parents=[common], help="train a rating-prediction GNN")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("ingest-ratings", parents=[common], help="ratings CSV to correlation graph CSV")
    s.add_argument("--ratings", help="CSV with header user,item,rating")
    s.add_argument("--co-rated", action="store_true", help="correlate over co-rating users only")
    s.set_defaults(func=cmd_ingest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_configs:
        print("\n".join(builtin_configs()))
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if args.command != "spectrum" and args.command != "ingest-ratings" and args.command != "sample" \
            and not args.config:
        parser.exit(EXIT_USAGE, f"graphonstab {args.command}: error: --config is required\n")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GraphonStabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
