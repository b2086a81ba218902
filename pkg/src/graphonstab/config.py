"""Experiment configuration, seed derivation and config (de)serialization.

Configs are YAML (or JSON) mappings. A minimal sweep::

    graphon: {kind: smooth-exp, beta: 1.0}
    perturbation: {kind: additive-constant, a: -0.1}
    sizes: [64, 128, 256]
    seeds: 5
    mode: deterministic
    architecture: {layers: 2, width: 4, nonlinearity: relu}
    filter: {form: band, c: 0.3}
    signal: {kind: cosine, k: 1}

Seeds
-----
Every random draw is keyed by :class:`numpy.random.SeedSequence` entropy
``[master_seed, tag, ...]``: network parameters use
``[master_seed, PARAM_TAG, seed]`` (shared across sizes so that a trial sees
the same network at every ``n``); stochastic graphs use
``[master_seed, GRAPH_TAG, n, seed, mode_code]``. The first 64 bits of the
generated state seed a PCG64 generator.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, DomainError, InvariantError, RangeError, SingularityError
from .gnn import GnnParams, random_band_params, random_poly_params
from .graphon import graphon_from_config, perturb, perturbation_from_config
from .sampling import signal_from_config

MODES = ("deterministic", "stochastic", "both")
MODE_CODES = {"deterministic": 0, "stochastic": 1}
PARAM_TAG = 0x5041524D
GRAPH_TAG = 0x47524150
DEFAULT_RESOLUTION = 1024


def derive_seed(*entropy):
    """Deterministic 64-bit seed from integer entropy."""
    ss = np.random.SeedSequence([int(e) for e in entropy])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def param_seed(master_seed, seed):
    return derive_seed(master_seed, PARAM_TAG, seed)


def graph_seed(master_seed, n, seed, mode):
    return derive_seed(master_seed, GRAPH_TAG, n, seed, MODE_CODES[mode])


DEFAULTS = {
    "perturbation": {"kind": "additive-constant", "a": 0.0},
    "seeds": 1,
    "mode": "deterministic",
    "architecture": {"layers": 2, "width": 4, "nonlinearity": "relu"},
    "filter": {"form": "band", "c": 0.3, "eta": 1e-3},
    "signal": {"kind": "constant", "value": 1.0},
    "xi": 0.05,
    "resolution": DEFAULT_RESOLUTION,
    "master_seed": 0,
    "self_loops": True,
    "constants": {},
    "output": {"csv": "stability.csv", "summary": "summary.json"},
}


@dataclass(eq=False)
class ExperimentConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        cfg = copy.deepcopy(DEFAULTS)
        for k, v in self.raw.items():
            if isinstance(v, dict) and isinstance(cfg.get(k), dict) and k not in ("perturbation", "filter", "signal"):
                cfg[k] = {**cfg[k], **v}
            else:
                cfg[k] = v
        self.cfg = cfg
        self._validate()

    # --- accessors ---

    def _validate(self):
        cfg = self.cfg
        if "graphon" not in cfg:
            raise ConfigError("graphon: field is required")
        self.graphon = graphon_from_config(cfg["graphon"], self.base_dir)
        self.perturbation = perturbation_from_config(cfg["perturbation"])
        try:
            perturb(self.graphon, self.perturbation)
        except (RangeError, SingularityError, InvariantError, DomainError) as exc:
            raise ConfigError(f"perturbation: {exc}") from None
        sizes = cfg.get("sizes")
        if not isinstance(sizes, list) or not sizes:
            raise ConfigError("sizes: must be a nonempty list of positive integers")
        if any(not isinstance(s, int) or s < 1 for s in sizes):
            raise ConfigError("sizes: must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(sizes[:-1], sizes[1:])):
            raise ConfigError("sizes: must be strictly ascending")
        seeds = cfg["seeds"]
        if isinstance(seeds, int):
            if seeds < 1:
                raise ConfigError("seeds: count must be positive")
        elif not (isinstance(seeds, list) and seeds and all(isinstance(s, int) for s in seeds)):
            raise ConfigError("seeds: must be a positive count or a list of integers")
        if cfg["mode"] not in MODES:
            raise ConfigError(f"mode: must be one of {MODES}")
        xi = cfg["xi"]
        if not isinstance(xi, (int, float)) or not 0 < xi < 1:
            raise ConfigError("xi: must lie in (0, 1)")
        arch = cfg["architecture"]
        for key in ("layers", "width"):
            if not isinstance(arch.get(key), int) or arch[key] < 1:
                raise ConfigError(f"architecture.{key}: must be a positive integer")
        filt = cfg["filter"]
        if filt.get("form") not in ("band", "poly"):
            raise ConfigError("filter.form: must be 'band' or 'poly'")
        if filt["form"] == "band" and not 0 < filt.get("c", 0.3) < 1:
            raise ConfigError("filter.c: must lie in (0, 1)")
        if filt["form"] == "poly" and not isinstance(filt.get("K", 3), int):
            raise ConfigError("filter.K: must be an integer")
        if "params_file" in filt:
            path = self.resolve(filt["params_file"])
            if not path.exists():
                raise ConfigError(f"filter.params_file: {path} does not exist")
        c = self.c
        if not 0 < c <= 1:
            raise ConfigError("c: band cutoff must lie in (0, 1]")
        if not isinstance(cfg["resolution"], int) or cfg["resolution"] < 2:
            raise ConfigError("resolution: must be an integer >= 2")
        self.signal = signal_from_config(cfg["signal"])
        for key in ("A1", "A3"):
            v = cfg["constants"].get(key)
            if v is not None and (not isinstance(v, (int, float)) or v < 0):
                raise ConfigError(f"constants.{key}: must be a nonnegative number")

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def sizes(self):
        return list(self.cfg["sizes"])

    @property
    def seeds(self):
        s = self.cfg["seeds"]
        return list(range(s)) if isinstance(s, int) else list(s)

    @property
    def modes(self):
        m = self.cfg["mode"]
        return ["deterministic", "stochastic"] if m == "both" else [m]

    @property
    def c(self):
        return float(self.cfg.get("c", self.cfg["filter"].get("c", 0.3)))

    @property
    def xi(self):
        return float(self.cfg["xi"])

    @property
    def resolution(self):
        return int(self.cfg["resolution"])

    @property
    def master_seed(self):
        return int(self.cfg["master_seed"])

    @property
    def self_loops(self):
        return bool(self.cfg["self_loops"])

    @property
    def constants(self):
        return dict(self.cfg["constants"])

    def build_params(self, seed):
        """Network parameters for trial ``seed`` (independent of ``n``)."""
        filt = self.cfg["filter"]
        if "params_file" in filt:
            return GnnParams.load(self.resolve(filt["params_file"]))
        arch = self.cfg["architecture"]
        rng = np.random.default_rng(param_seed(self.master_seed, seed))
        eta = float(filt.get("eta", 1e-3))
        nl = arch.get("nonlinearity", "relu")
        if filt["form"] == "band":
            return random_band_params(arch["layers"], arch["width"], float(filt.get("c", 0.3)), rng, nl, eta)
        return random_poly_params(arch["layers"], arch["width"], int(filt.get("K", 3)), rng, nl, eta)

    def cells(self):
        """All ``(n, seed, mode)`` cells, sorted."""
        return sorted((n, s, m) for n in self.sizes for s in self.seeds for m in self.modes)

    def with_master_seed(self, seed):
        raw = copy.deepcopy(self.raw)
        raw["master_seed"] = int(seed)
        return ExperimentConfig(raw, self.base_dir)

    def to_dict(self):
        return copy.deepcopy(self.cfg)

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.to_dict() == other.to_dict()


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return ExperimentConfig(raw, path.parent)


def parse_config(text, base_dir=None):
    raw = yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    return ExperimentConfig(raw, Path(base_dir) if base_dir else Path.cwd())
