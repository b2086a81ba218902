"""Homomorphism densities of small motifs into graphs and graphons.

Each motif has a closed trace / quadratic-form expression in the GSO, so a
density costs at most a few dense matrix products. Graphon densities are the
same expressions on the deterministic graph at resolution ``N``, a left-endpoint grid
quadrature of the defining integral.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .config import derive_seed
from .errors import ConfigError, DomainError
from .graphon import DEFAULT_PROBE_POINTS, ConstantGraphon, SBMGraphon, SmoothExpGraphon
from .sampling import Graph, deterministic_graph, stochastic_graph

MOTIFS = ("K2", "K3", "P3", "C4")
MOTIF_TAG = 0x4D4F5446


def _edge(S):
    return float(S.sum()) / S.shape[0] ** 2


def _path(S):
    d = S.sum(axis=1)
    return float(d @ d) / S.shape[0] ** 3


def _triangle(S):
    # tr(S^3) = sum_ij (S^2)_ij S_ji
    return float(np.sum((S @ S) * S.T)) / S.shape[0] ** 3


def _cycle(S):
    S2 = S @ S
    return float(np.sum(S2 * S2.T)) / S.shape[0] ** 4


@dataclass(frozen=True)
class Motif:
    name: str
    nodes: int
    edges: int

    def density(self, S):
        return _FORMULAS[self.name](S)


_FORMULAS = {"K2": _edge, "K3": _triangle, "P3": _path, "C4": _cycle}
CATALOG = {
    "K2": Motif("K2", 2, 1),
    "K3": Motif("K3", 3, 3),
    "P3": Motif("P3", 3, 2),
    "C4": Motif("C4", 4, 4),
}


def get_motif(name):
    if isinstance(name, Motif):
        return name
    try:
        return CATALOG[str(name).upper()]
    except KeyError:
        raise ConfigError(f"unknown motif {name!r}; choose from {MOTIFS}") from None


def hom_density_graph(F, G):
    """Weighted homomorphism density ``t(F, G)`` of a catalog motif."""
    S = G.gso if isinstance(G, Graph) else np.asarray(G, dtype=float)
    return get_motif(F).density(S)


def hom_density_graphon(F, W, N=DEFAULT_PROBE_POINTS):
    """``t(F, W)`` by grid quadrature at resolution ``N``."""
    if N < 2:
        raise DomainError("resolution N must be at least 2")
    return hom_density_graph(F, W.matrix(N))


def reference_density(F, W, N=4 * DEFAULT_PROBE_POINTS):
    """Closed-form ``t(F, W)`` where known, else quadrature at resolution ``N``.

    Closed forms cover every motif of constant and SBM graphons and the
    edge density ``2 (beta - 1 + exp(-beta)) / beta^2`` of the smooth
    exponential family.
    """
    F = get_motif(F)
    if isinstance(W, ConstantGraphon):
        return W.p ** F.edges
    if isinstance(W, SBMGraphon):
        # block sizes act as weights on the block matrix
        w = W.widths
        P = np.asarray(W.probs, dtype=float)
        root = np.sqrt(w)
        return _block_density(F, root[:, None] * P * root[None, :], w)
    if isinstance(W, SmoothExpGraphon) and F.name == "K2":
        b = W.beta
        if b == 0:
            return 1.0
        return 2.0 * (b - 1.0 + math.exp(-b)) / b ** 2
    return hom_density_graphon(F, W, N)


def _block_density(F, M, w):
    # M = D^(1/2) P D^(1/2) with D = diag(block widths)
    root = np.sqrt(w)
    if F.name == "K2":
        return float(root @ M @ root)
    if F.name == "P3":
        v = M @ root
        return float(v @ v)
    if F.name == "K3":
        return float(np.trace(M @ M @ M))
    return float(np.trace(np.linalg.matrix_power(M, 4)))


@dataclass(frozen=True)
class ConvergenceRow:
    motif: str
    n: int
    mode: str
    seed_count: int
    density_graph: float
    density_graphon: float
    gap: float
    gap_std: float = 0.0

    CSV_COLUMNS = ("motif", "n", "mode", "seed_count", "density_graph", "density_graphon", "gap")

    def csv_row(self):
        return [self.motif, str(self.n), self.mode, str(self.seed_count),
                f"{self.density_graph:.12g}", f"{self.density_graphon:.12g}", f"{self.gap:.12g}"]


def convergence_table(W, motifs, sizes, mode="deterministic", seeds=1, master_seed=0,
                      reference=None):
    """``|t(F, G_n) - t(F, W)|`` for each motif and size.

    Parameters
    ----------
    W : Graphon
    motifs : iterable of motif names
    sizes : ascending graph sizes
    mode : ``"deterministic"`` (one graph per size) or ``"stochastic"``
        (``seeds`` graphs per size; density and gap are seed means and
        ``gap_std`` the sample standard deviation of the gap)
    seeds : number of stochastic trials
    reference : optional mapping motif name -> ``t(F, W)``; defaults to
        :func:`reference_density`

    Returns
    -------
    list of ConvergenceRow, ordered by motif then ``n``
    """
    sizes = [int(n) for n in sizes]
    if not sizes or any(b <= a for a, b in zip(sizes[:-1], sizes[1:])):
        raise ConfigError("sizes must be nonempty and strictly ascending")
    if mode not in ("deterministic", "stochastic"):
        raise ConfigError(f"mode must be 'deterministic' or 'stochastic', got {mode!r}")
    motifs = [get_motif(m) for m in motifs]
    reference = dict(reference or {})
    ref = {F.name: reference.get(F.name, None) for F in motifs}
    for F in motifs:
        if ref[F.name] is None:
            ref[F.name] = reference_density(F, W)

    rows = []
    for n in sizes:
        if mode == "deterministic":
            graphs = [deterministic_graph(W, n)]
        else:
            graphs = [stochastic_graph(W, n, derive_seed(master_seed, MOTIF_TAG, n, s))
                      for s in range(seeds)]
        for F in motifs:
            dens = np.array([F.density(G.gso) for G in graphs])
            gaps = np.abs(dens - ref[F.name])
            std = float(gaps.std(ddof=1)) if gaps.size > 1 else 0.0
            rows.append(ConvergenceRow(F.name, n, mode, len(graphs), float(dens.mean()),
                                       float(ref[F.name]), float(gaps.mean()), std))
    rows.sort(key=lambda r: (MOTIFS.index(r.motif), r.n))
    return rows


def write_convergence_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ConvergenceRow.CSV_COLUMNS)
        for r in rows:
            w.writerow(r.csv_row())
