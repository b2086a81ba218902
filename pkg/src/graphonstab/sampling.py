"""Deterministic and stochastic graphs sampled from graphons, and graph signals.

Sampling randomness comes from :class:`numpy.random.Generator` with the PCG64
bit generator seeded by the caller's integer seed. Stochastic graphs draw one
uniform per entry ``i <= j`` in row-major order, so a seed fixes the graph.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, InvariantError, ShapeError
from .graphon import GridGraphon, cell_index, grid_points


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph given by its shift operator (adjacency matrix)."""

    gso: np.ndarray
    weighted: bool = True

    def __post_init__(self):
        gso = np.array(self.gso, dtype=float)
        if gso.ndim != 2 or gso.shape[0] != gso.shape[1]:
            raise InvariantError(f"GSO must be square, got shape {gso.shape}")
        if not np.array_equal(gso, gso.T):
            raise InvariantError("GSO is not exactly symmetric")
        if gso.size and (gso.min() < 0 or gso.max() > 1):
            raise InvariantError("GSO entries must lie in [0, 1]")
        if not self.weighted and not np.all((gso == 0) | (gso == 1)):
            raise InvariantError("unweighted graphs must have 0/1 entries")
        gso.setflags(write=False)
        object.__setattr__(self, "gso", gso)

    @property
    def n(self):
        return self.gso.shape[0]


def deterministic_graph(W, n, self_loops=True):
    """Graph with edge weights ``W(u_i, u_j)`` at ``u_i = (i - 1) / n``."""
    if n < 1:
        raise DomainError("n must be positive")
    gso = W.matrix(n)
    if not self_loops:
        np.fill_diagonal(gso, 0.0)
    return Graph(gso, weighted=True)


def stochastic_graph(W, n, seed, self_loops=True):
    """W-random graph with independent ``Bernoulli(W(u_i, u_j))`` edges.

    The same ``seed`` gives the same graph, and two graphons sampled with the
    same seed share their uniform draws (a coupled pair).
    """
    if n < 1:
        raise DomainError("n must be positive")
    probs = W.matrix(n)
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n)
    draws = rng.random(iu[0].size)
    upper = (draws < probs[iu]).astype(float)
    gso = np.zeros((n, n))
    gso[iu] = upper
    gso.T[iu] = upper
    if not self_loops:
        np.fill_diagonal(gso, 0.0)
    return Graph(gso, weighted=False)


# --- graphon signals ---------------------------------------------------------


class GraphonSignal:
    """Square-integrable function on [0, 1]."""

    kind = "signal"

    def __call__(self, u):
        return self._eval(np.asarray(u, dtype=float))

    def l2_norm(self):
        raise NotImplementedError

    def to_config(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantSignal(GraphonSignal):
    value: float = 1.0
    kind = "constant"

    def _eval(self, u):
        return np.full(np.shape(u), float(self.value))

    def l2_norm(self):
        return abs(float(self.value))

    def to_config(self):
        return {"kind": "constant", "value": float(self.value)}


@dataclass(frozen=True)
class LinearSignal(GraphonSignal):
    """``X(u) = u``."""

    kind = "linear"

    def _eval(self, u):
        return np.array(u, dtype=float)

    def l2_norm(self):
        return float(1.0 / np.sqrt(3.0))

    def to_config(self):
        return {"kind": "linear"}


@dataclass(frozen=True)
class CosineSignal(GraphonSignal):
    """``X(u) = cos(pi k u)``."""

    k: int = 1
    kind = "cosine"

    def _eval(self, u):
        return np.cos(np.pi * self.k * u)

    def l2_norm(self):
        return 1.0 if self.k == 0 else float(np.sqrt(0.5))

    def to_config(self):
        return {"kind": "cosine", "k": int(self.k)}


@dataclass(frozen=True, eq=False)
class StepSignal(GraphonSignal):
    """Piecewise-constant signal on the regular partition of [0, 1]."""

    values: np.ndarray
    kind = "step"

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def _eval(self, u):
        return self.values[cell_index(u, self.values.size)]

    def l2_norm(self):
        return float(np.linalg.norm(self.values) / np.sqrt(self.values.size))

    def to_config(self):
        return {"kind": "step", "values": self.values.tolist()}


def signal_from_config(cfg):
    kind = cfg.get("kind")
    if kind == "constant":
        return ConstantSignal(float(cfg.get("value", 1.0)))
    if kind == "linear":
        return LinearSignal()
    if kind == "cosine":
        return CosineSignal(int(cfg.get("k", 1)))
    if kind == "step":
        return StepSignal(np.array(cfg["values"], dtype=float))
    raise ConfigError(f"signal.kind: unknown signal kind {kind!r}")


def induced_graphon(G):
    """Step graphon equal to ``[S]_ij`` on ``I_i x I_j``.

    Raises
    ------
    InvariantError
        If the matrix is not exactly symmetric or leaves [0, 1].
    """
    S = G.gso if isinstance(G, Graph) else np.asarray(G, dtype=float)
    return GridGraphon(np.array(S, dtype=float))


def sample_signal(X, n):
    """Graph signal ``x_i = X(u_i)``."""
    if n < 1:
        raise DomainError("n must be positive")
    return np.asarray(X(grid_points(n)), dtype=float)


def induce_signal(x):
    """Step graphon signal equal to ``x_i`` on the i-th cell."""
    return StepSignal(np.asarray(x, dtype=float))


def l2_norm(x):
    """Euclidean norm for graph signals, ``L2([0, 1])`` norm for graphon signals."""
    if isinstance(x, GraphonSignal):
        return x.l2_norm()
    return float(np.linalg.norm(np.asarray(x, dtype=float)))


def check_signal(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != n:
        raise ShapeError(f"signal has length {x.shape[0]}, graph has {n} nodes")
    return x


# --- persistence -------------------------------------------------------------


def write_graph_csv(graph, path):
    np.savetxt(path, graph.gso, delimiter=",", fmt="%.12g")


def write_edge_list(graph, path):
    iu, ju = np.nonzero(np.triu(graph.gso))
    with open(path, "w") as fh:
        fh.write("i,j,weight\n")
        for i, j in zip(iu, ju):
            fh.write(f"{i + 1},{j + 1},{graph.gso[i, j]:.12g}\n")


def read_graph_csv(path, weighted=True):
    return Graph(np.loadtxt(path, delimiter=",", ndmin=2), weighted=weighted)


def write_signal_csv(x, path):
    np.savetxt(path, np.asarray(x, dtype=float).reshape(-1, 1), fmt="%.12g")


def read_signal_csv(path):
    return np.loadtxt(path, ndmin=1)
