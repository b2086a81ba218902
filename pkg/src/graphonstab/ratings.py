"""Ratings matrices, item-correlation graphs and the rating-prediction task.

A ratings matrix ``R`` is ``U x M`` with ``R[u, m]`` the rating of user ``u``
for item ``m`` and 0 where no rating exists. The item graph weights columns
of ``R`` by their Pearson correlation.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .graphon import grid_points
from .sampling import Graph

MIN_RATING, MAX_RATING = 1, 5


def check_ratings(R):
    R = np.asarray(R, dtype=float)
    if R.ndim != 2:
        raise ConfigError(f"ratings must be a 2-D matrix, got shape {R.shape}")
    if np.any(R < 0) or not np.all(np.isfinite(R)):
        raise ConfigError("ratings must be finite and nonnegative")
    return R


def _pearson_all_rows(R):
    Z = R - R.mean(axis=0)
    sd = np.sqrt(np.sum(Z ** 2, axis=0))
    constant = sd == 0
    sd = np.where(constant, 1.0, sd)
    C = (Z.T @ Z) / np.outer(sd, sd)
    C[constant, :] = 0.0
    C[:, constant] = 0.0
    return C, constant


def _pearson_co_rated(R):
    M = R.shape[1]
    C = np.zeros((M, M))
    obs = R > 0
    for i in range(M):
        for j in range(i + 1, M):
            both = obs[:, i] & obs[:, j]
            if both.sum() < 2:
                continue
            a, b = R[both, i], R[both, j]
            a, b = a - a.mean(), b - b.mean()
            den = np.sqrt((a @ a) * (b @ b))
            if den > 0:
                C[i, j] = C[j, i] = (a @ b) / den
    constant = ~np.any(C != 0, axis=0)
    return C, constant


@dataclass
class CorrelationWeights:
    """Clipped correlations before normalization.

    ``weights`` has zero diagonal and nonnegative entries; ``constant`` marks
    columns with zero variance, which are disconnected.
    """

    weights: np.ndarray
    constant: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def correlation_weights(R, co_rated=False):
    """Pearson correlations between item columns, negatives clipped, zero diagonal.

    By default correlations use every row, with 0 standing for a missing
    rating. ``co_rated=True`` restricts each pair to the users who rated both.
    """
    R = check_ratings(R)
    if R.shape[1] < 2:
        raise ConfigError("need at least two items to correlate")
    C, constant = _pearson_co_rated(R) if co_rated else _pearson_all_rows(R)
    C = np.clip(0.5 * (C + C.T), 0.0, None)
    np.fill_diagonal(C, 0.0)
    return CorrelationWeights(C, constant)


def build_correlation_graph(R, co_rated=False):
    """Item graph with weights in [0, 1]: clipped correlations divided by their maximum.

    Returns
    -------
    graph : Graph
    constant : bool array of zero-variance items (disconnected)
    """
    cw = correlation_weights(R, co_rated)
    if cw.constant.any():
        warnings.warn(f"{int(cw.constant.sum())} item column(s) have zero variance", RuntimeWarning,
                      stacklevel=2)
    W = cw.weights
    top = W.max()
    if top > 0:
        W = W / top
    return Graph(np.clip(W, 0.0, 1.0), weighted=True), cw.constant


def generate_synthetic_ratings(W, U, M, seed, missing_rate=0.2, spread=3.0):
    """Ratings driven by graphon-smoothed user tastes.

    Items sit at ``u_m = (m - 1) / M``. Each user draws a taste vector
    ``t ~ N(0, I_M)``; the score of item ``m`` is
    ``s_m = sum_m' W(u_m, u_m') t_m' / sqrt(M)`` and the rating is
    ``clip(round(3 + spread * s_m), 1, 5)``. Each entry is then hidden
    (set to 0) independently with probability ``missing_rate``.
    """
    if U < 2 or M < 2:
        raise DomainError("need at least two users and two items")
    if not 0 <= missing_rate < 1:
        raise DomainError("missing_rate must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    K = W.matrix(M)
    taste = rng.standard_normal((U, M))
    score = taste @ K / np.sqrt(M)
    R = np.clip(np.rint(3.0 + spread * score), MIN_RATING, MAX_RATING)
    R[rng.random((U, M)) < missing_rate] = 0.0
    return R


def read_ratings_csv(path, shape=None):
    """Read ``user,item,rating`` rows (1-indexed ids) into a dense matrix."""
    users, items, vals = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["user", "item", "rating"]:
            raise ConfigError(f"{path}: header must be 'user,item,rating'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                u, m, r = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError):
                raise ConfigError(f"{path}:{lineno}: malformed row {row!r}") from None
            if u < 1 or m < 1 or r < 0:
                raise ConfigError(f"{path}:{lineno}: ids must be >= 1 and ratings >= 0")
            users.append(u)
            items.append(m)
            vals.append(r)
    U = max(users, default=0) if shape is None else shape[0]
    M = max(items, default=0) if shape is None else shape[1]
    R = np.zeros((U, M))
    R[np.array(users, dtype=int) - 1, np.array(items, dtype=int) - 1] = vals
    return R


def write_ratings_csv(R, path):
    with open(path, "w") as fh:
        fh.write("user,item,rating\n")
        for u, m in zip(*np.nonzero(R)):
            fh.write(f"{u + 1},{m + 1},{R[u, m]:g}\n")


@dataclass
class RatingTask:
    """Predict one item's rating from a user's other ratings.

    ``inputs[i]`` is a user's ratings with the target entry zeroed;
    ``targets[i]`` is zero except for the true rating at the target item.
    """

    target: int
    inputs: np.ndarray
    targets: np.ndarray
    users: np.ndarray

    def samples(self, rows):
        return [(self.inputs[i], self.targets[i]) for i in rows]


def rating_task(R, target=None):
    """Samples for every user who rated ``target`` (default: the most rated item)."""
    R = check_ratings(R)
    counts = np.count_nonzero(R, axis=0)
    if target is None:
        target = int(np.argmax(counts))
    if not 0 <= target < R.shape[1]:
        raise ConfigError(f"target item {target} out of range")
    users = np.flatnonzero(R[:, target] > 0)
    if users.size < 2:
        raise ConfigError(f"target item {target} needs at least two ratings")
    X = R[users].copy()
    X[:, target] = 0.0
    T = np.zeros_like(X)
    T[:, target] = R[users, target]
    return RatingTask(target, X, T, users)


def split_rows(count, seed, test_fraction=0.1):
    """Shuffle row indices and split them into train and test parts."""
    if count < 2:
        raise DomainError("need at least two rows to split")
    perm = np.random.default_rng(seed).permutation(count)
    n_test = min(max(1, int(round(test_fraction * count))), count - 1)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def item_positions(M):
    return grid_points(M)
