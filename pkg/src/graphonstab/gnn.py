"""GNN and WNN forward maps with a full-batch gradient-descent trainer.

Layer ``l`` maps ``F_{l-1}`` input features to ``F_l`` outputs through a bank
of filters ``h_l^{fg}``, then applies a pointwise nonlinearity:
``x_l^f = sigma(sum_g h_l^{fg} *_S x_{l-1}^g)``. Signals are arrays of shape
``(n, F)``; the network input and output have a single feature.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError
from .filters import BandFilter, PolyFilter, _poly_sup, band_deviation
from .sampling import Graph, deterministic_graph, induce_signal, sample_signal
from .spectral import decompose

NONLINEARITIES = ("relu", "abs", "tanh")


def activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "abs":
        return np.abs(z)
    if name == "tanh":
        return np.tanh(z)
    raise ConfigError(f"unknown nonlinearity {name!r}")


def activate_grad(name, z):
    # subgradient 0 at the kink
    if name == "relu":
        return (z > 0).astype(float)
    if name == "abs":
        return np.sign(z)
    if name == "tanh":
        return 1.0 - np.tanh(z) ** 2
    raise ConfigError(f"unknown nonlinearity {name!r}")


@dataclass(frozen=True, eq=False)
class PolyBank:
    """Polynomial filters with coefficients ``coeffs[f, g, k]``."""

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != 3:
            raise ConfigError("polynomial bank needs coefficients of shape (F_out, F_in, K)")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def shape(self):
        return self.coeffs.shape[:2]

    def __getitem__(self, fg):
        return PolyFilter(self.coeffs[fg])

    def response(self, lam):
        lam = np.asarray(lam, dtype=float)
        powers = lam[None, :] ** np.arange(self.coeffs.shape[2])[:, None]
        return np.einsum("fgk,kn->fgn", self.coeffs, powers)

    def to_config(self):
        return {"form": "poly", "coeffs": self.coeffs.tolist()}


@dataclass(frozen=True, eq=False)
class BandBank:
    """Band filters sharing the cutoff ``c`` with per-filter ``g0`` and ``gamma``."""

    c: float
    g0: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        g0 = np.array(self.g0, dtype=float)
        gamma = np.array(self.gamma, dtype=float)
        if g0.ndim != 2 or g0.shape != gamma.shape:
            raise ConfigError("band bank needs g0 and gamma of equal shape (F_out, F_in)")
        if not 0 < self.c < 1:
            raise ConfigError("band cutoff c must lie in (0, 1)")
        if np.any(gamma < 0):
            raise ConfigError("band gains must be nonnegative")
        object.__setattr__(self, "g0", g0)
        object.__setattr__(self, "gamma", gamma)

    @property
    def shape(self):
        return self.g0.shape

    def __getitem__(self, fg):
        return BandFilter(self.c, float(self.g0[fg]), float(self.gamma[fg]))

    def response(self, lam):
        lam = np.abs(np.asarray(lam, dtype=float))
        ramp = np.clip((lam - self.c) / (1.0 - self.c), 0.0, 1.0)
        ramp = np.where(lam < self.c, 0.0, ramp)
        return self.g0[:, :, None] + self.gamma[:, :, None] * ramp[None, None, :]

    def to_config(self):
        return {"form": "band", "c": float(self.c), "g0": self.g0.tolist(), "gamma": self.gamma.tolist()}


def bank_from_config(cfg):
    if cfg.get("form") == "poly":
        return PolyBank(np.array(cfg["coeffs"], dtype=float))
    if cfg.get("form") == "band":
        return BandBank(float(cfg["c"]), np.array(cfg["g0"]), np.array(cfg["gamma"]))
    raise ConfigError(f"unknown filter bank form {cfg.get('form')!r}")


@dataclass(eq=False)
class GnnParams:
    layers: list
    nonlinearity: str = "relu"
    loss_trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.nonlinearity not in NONLINEARITIES:
            raise ConfigError(f"nonlinearity must be one of {NONLINEARITIES}")
        if not self.layers:
            raise ConfigError("a GNN needs at least one layer")
        widths = self.widths
        for l, bank in enumerate(self.layers):
            if bank.shape[1] != widths[l]:
                raise ConfigError(f"layer {l + 1} expects {bank.shape[1]} input features, "
                                  f"previous layer gives {widths[l]}")

    @property
    def L(self):
        return len(self.layers)

    @property
    def widths(self):
        return [self.layers[0].shape[1]] + [bank.shape[0] for bank in self.layers]

    @property
    def F(self):
        """Hidden width; 1 for single-layer networks."""
        hidden = self.widths[1:-1]
        return max(hidden) if hidden else 1

    @property
    def form(self):
        return "band" if all(isinstance(b, BandBank) for b in self.layers) else "poly"

    def filters(self):
        for bank in self.layers:
            for f in range(bank.shape[0]):
                for g in range(bank.shape[1]):
                    yield bank[f, g]

    def A2(self, probes=4096):
        """Largest Lipschitz constant over all filter responses on [-1, 1]."""
        out = 0.0
        lam = np.linspace(-1.0, 1.0, probes)
        for bank in self.layers:
            if isinstance(bank, BandBank):
                out = max(out, float(np.max(bank.gamma)) / (1.0 - bank.c))
            else:
                h = bank.response(lam)
                out = max(out, float(np.max(np.abs(np.diff(h, axis=2)))) / (lam[1] - lam[0]))
        return out

    def sup_response(self):
        out = 0.0
        for bank in self.layers:
            if isinstance(bank, BandBank):
                out = max(out, float(np.max(np.maximum(np.abs(bank.g0), np.abs(bank.g0 + bank.gamma)))))
            else:
                for fg in np.ndindex(*bank.shape):
                    out = max(out, _poly_sup(bank.coeffs[fg]))
        return out

    def band_deviation(self, c):
        return max(band_deviation(f, c) for f in self.filters())

    def copy(self):
        layers = [bank_from_config(b.to_config()) for b in self.layers]
        return GnnParams(layers, self.nonlinearity, list(self.loss_trace))

    def to_config(self):
        return {"widths": self.widths, "nonlinearity": self.nonlinearity,
                "layers": [b.to_config() for b in self.layers]}

    @classmethod
    def from_config(cls, cfg):
        params = cls([bank_from_config(b) for b in cfg["layers"]], cfg.get("nonlinearity", "relu"))
        if "widths" in cfg and list(cfg["widths"]) != params.widths:
            raise ConfigError(f"widths {cfg['widths']} do not match the filter banks {params.widths}")
        return params

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_config(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_config(json.load(fh))


def _widths(L, F):
    return [1] + [F] * (L - 1) + [1]


def random_band_params(L, F, c, rng, nonlinearity="relu", eta=1e-3):
    """Band-filter network with random ``g0`` and ``gamma`` satisfying ``|g0| + gamma <= 1 - eta``."""
    widths = _widths(L, F)
    layers = []
    for l in range(L):
        shape = (widths[l + 1], widths[l])
        g0 = rng.uniform(-1.0, 1.0, shape)
        gamma = rng.uniform(0.0, 1.0, shape)
        total = np.abs(g0) + gamma
        scale = np.where(total >= 1.0 - eta, (1.0 - eta) / np.maximum(total, 1e-300), 1.0)
        layers.append(BandBank(c, g0 * scale, gamma * scale))
    return GnnParams(layers, nonlinearity)


def random_poly_params(L, F, K, rng, nonlinearity="relu", eta=1e-3, project=True):
    """Polynomial-filter network with Gaussian coefficients, optionally rescaled to ``sup |h| <= 1 - eta``."""
    widths = _widths(L, F)
    layers = []
    for l in range(L):
        coeffs = rng.normal(0.0, 1.0 / np.sqrt(K), (widths[l + 1], widths[l], K))
        if project:
            for fg in np.ndindex(*coeffs.shape[:2]):
                sup = _poly_sup(coeffs[fg])
                if sup >= 1.0 - eta:
                    coeffs[fg] *= (1.0 - eta) / sup
        layers.append(PolyBank(coeffs))
    return GnnParams(layers, nonlinearity)


def _shift_sequence(P, X, K):
    """``[X, P X, ..., P^{K-1} X]`` stacked on a new leading axis."""
    out = [X]
    for _ in range(K - 1):
        out.append(np.matmul(P, out[-1]))
    return np.stack(out)


def _layer(bank, X, P, spec):
    """Pre-activation of one layer for features ``X`` of shape ``(..., n, F_in)``."""
    if isinstance(bank, PolyBank):
        D = _shift_sequence(P, X, bank.coeffs.shape[2])
        return np.einsum("fgk,k...g->...f", bank.coeffs, D)
    V = spec.vectors
    resp = bank.response(spec.values)
    xhat = np.matmul(V.T, X)
    zhat = np.einsum("fgi,...ig->...if", resp, xhat)
    return np.matmul(V, zhat)


def _operator(G, m):
    S = G.gso if isinstance(G, Graph) else np.asarray(G, dtype=float)
    if not m > 0:
        raise ConfigError("normalization m must be positive")
    return S / m


def _needs_spectrum(params):
    return any(isinstance(b, BandBank) for b in params.layers)


def operator_spectrum(G, m):
    """Eigendecomposition of ``S / m`` for band-filter layers."""
    return decompose(_operator(G, m), "graph")


def gnn_forward(params, G, m, x, spectrum=None):
    """``y = Phi(H; S / m; x)`` for a single-feature input signal.

    ``spectrum`` may pass a precomputed :func:`operator_spectrum` of
    ``(G, m)``; band-filter layers compute it otherwise.
    """
    P = _operator(G, m)
    x = np.asarray(x, dtype=float)
    if params.widths[0] != 1 or params.widths[-1] != 1:
        raise ConfigError("the network must have one input and one output feature")
    if x.shape != (P.shape[0],):
        raise ShapeError(f"signal has shape {x.shape}, graph has {P.shape[0]} nodes")
    if spectrum is None and _needs_spectrum(params):
        spectrum = decompose(P, "graph")
    X = x[:, None]
    for bank in params.layers:
        X = activate(params.nonlinearity, _layer(bank, X, P, spectrum))
    return X[:, 0]


def wnn_forward(params, W, X, N=1024, spectrum=None):
    """WNN output discretized on ``N`` points, as a step graphon signal."""
    G = deterministic_graph(W, N)
    return induce_signal(gnn_forward(params, G, N, sample_signal(X, N), spectrum))


@dataclass(frozen=True)
class OutputDiff:
    l2: float
    l2_graphon: float
    rel: float


def empirical_output_diff(params, G, G_prime, m, x, spectra=(None, None)):
    """``||Phi(H; S'/m; x) - Phi(H; S/m; x)||_2`` and derived quantities.

    ``l2_graphon`` is the same difference for the induced graphon signals
    (division by ``sqrt(n)``); ``rel`` divides by ``||Phi(H; S/m; x)||_2``.
    """
    n = G.n if isinstance(G, Graph) else np.shape(G)[0]
    n2 = G_prime.n if isinstance(G_prime, Graph) else np.shape(G_prime)[0]
    if n != n2:
        raise ShapeError(f"graphs have {n} and {n2} nodes")
    y = gnn_forward(params, G, m, x, spectra[0])
    y2 = gnn_forward(params, G_prime, m, x, spectra[1])
    diff = float(np.linalg.norm(y2 - y))
    base = float(np.linalg.norm(y))
    rel = diff / base if base > 0 else (0.0 if diff == 0 else np.inf)
    return OutputDiff(diff, diff / np.sqrt(n), rel)


# --- training ---------------------------------------------------------------


def _forward_cache(params, P, X):
    """Forward pass on a batch ``X`` of shape ``(B, n, 1)`` keeping intermediates."""
    cache = []
    for bank in params.layers:
        D = _shift_sequence(P, X, bank.coeffs.shape[2])
        Z = np.einsum("fgk,k...g->...f", bank.coeffs, D)
        cache.append((D, Z))
        X = activate(params.nonlinearity, Z)
    return X, cache


def mse_loss_and_grad(params, P, X, T):
    """Mean squared error over all entries and its gradient per coefficient array."""
    Y, cache = _forward_cache(params, P, X)
    R = Y - T
    loss = float(np.mean(R ** 2))
    dX = 2.0 * R / R.size
    grads = [None] * params.L
    for l in range(params.L - 1, -1, -1):
        h = params.layers[l].coeffs
        D, Z = cache[l]
        dZ = dX * activate_grad(params.nonlinearity, Z)
        K = h.shape[2]
        grads[l] = np.einsum("rf,krg->fgk", dZ.reshape(-1, h.shape[0]), D.reshape(K, -1, h.shape[1]))
        if l > 0:
            # adjoint of sum_k h_k P^k (P symmetric) by Horner's rule
            Gk = np.einsum("fgk,...f->k...g", h, dZ)
            acc = Gk[-1]
            for k in range(h.shape[2] - 2, -1, -1):
                acc = np.matmul(P, acc) + Gk[k]
            dX = acc
    return loss, grads


def _stack_samples(samples, n):
    xs, ts = zip(*samples)
    X = np.stack([np.asarray(x, dtype=float) for x in xs])[:, :, None]
    T = np.stack([np.asarray(t, dtype=float) for t in ts])[:, :, None]
    if X.shape[1] != n or T.shape[1] != n:
        raise ShapeError(f"samples must have length {n}")
    return X, T


def train_mse(params, samples, G, m, steps, lr):
    """Full-batch gradient descent on the mean squared error.

    Only polynomial filter banks are trainable. Returns a new
    :class:`GnnParams` whose ``loss_trace`` holds the loss before each step
    followed by the final loss.

    Raises
    ------
    DivergenceError
        When the loss becomes non-finite.
    """
    if not samples:
        raise ConfigError("training needs at least one sample")
    if not all(isinstance(b, PolyBank) for b in params.layers):
        raise ConfigError("only polynomial filter banks can be trained")
    P = _operator(G, m)
    X, T = _stack_samples(samples, P.shape[0])
    out = params.copy()
    trace = []
    for step in range(steps):
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grads = mse_loss_and_grad(out, P, X, T)
        if not np.isfinite(loss):
            raise DivergenceError(step, loss)
        trace.append(loss)
        for bank, g in zip(out.layers, grads):
            bank.coeffs[...] -= lr * g
    if steps:
        with np.errstate(over="ignore", invalid="ignore"):
            final, _ = _forward_cache(out, P, X)
            loss = float(np.mean((final - T) ** 2))
        if not np.isfinite(loss):
            raise DivergenceError(steps, loss)
        trace.append(loss)
    out.loss_trace = trace
    return out


def write_loss_csv(trace, path):
    with open(path, "w") as fh:
        fh.write("step,loss\n")
        for i, v in enumerate(trace):
            fh.write(f"{i},{v:.12g}\n")
