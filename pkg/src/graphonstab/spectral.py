"""Signed spectra, band constants and perturbation-theory checks.

Eigenvalues of a symmetric operator are indexed by nonzero integers: positive
eigenvalues at ``1, 2, ...`` in decreasing order, negative eigenvalues at
``-1, -2, ...`` with ``-1`` the most negative. Indices past the stored
spectrum read as 0, where graphon spectra accumulate.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvariantError, UndefinedGapError
from .graphon import DEFAULT_PROBE_POINTS, Kernel

DEGENERATE_GAP = 1e-12


def signed_order(values):
    """Assign signed indices to eigenvalues.

    Returns
    -------
    indices : int array aligned with ``order``
    order : permutation of ``values`` listing positives (descending, zeros
        last) then negatives (most negative first). Ties keep input order.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    pos = np.flatnonzero(values >= 0)
    neg = np.flatnonzero(values < 0)
    pos = pos[np.argsort(-values[pos], kind="stable")]
    neg = neg[np.argsort(values[neg], kind="stable")]
    order = np.concatenate([pos, neg]).astype(np.int64)
    indices = np.concatenate([np.arange(1, pos.size + 1), -np.arange(1, neg.size + 1)]).astype(np.int64)
    return indices, order


@dataclass(frozen=True, eq=False)
class SignedSpectrum:
    """Eigenpairs in signed-index order.

    ``values[k]`` is the eigenvalue at signed index ``indices[k]`` and
    ``vectors[:, k]`` its unit eigenvector. ``scale`` is ``"graph"`` for raw
    eigenvalues or ``"graphon"`` for eigenvalues divided by the dimension.
    """

    indices: np.ndarray
    values: np.ndarray
    vectors: np.ndarray | None
    scale: str = "graph"

    def __post_init__(self):
        lookup = {int(i): float(v) for i, v in zip(self.indices, self.values)}
        object.__setattr__(self, "_lookup", lookup)

    def __len__(self):
        return self.values.size

    def at(self, i):
        """Eigenvalue at signed index ``i``; 0 past the stored spectrum."""
        return self._lookup.get(int(i), 0.0)

    def position(self, i):
        """Column of ``vectors`` holding signed index ``i``."""
        hits = np.flatnonzero(self.indices == i)
        if hits.size == 0:
            raise KeyError(i)
        return int(hits[0])

    @property
    def positive(self):
        return self.values[self.indices > 0]

    @property
    def negative(self):
        return self.values[self.indices < 0]

    def band(self, c):
        """Signed indices with ``|lambda| >= c``."""
        return self.indices[np.abs(self.values) >= c]

    @classmethod
    def from_values(cls, values, scale="graphon"):
        indices, order = signed_order(values)
        return cls(indices, np.asarray(values, dtype=float)[order], None, scale)


def _check_symmetric(M, tol=1e-12):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvariantError(f"matrix must be square, got shape {M.shape}")
    if M.size and np.max(np.abs(M - M.T)) > tol * max(1.0, np.max(np.abs(M))):
        raise InvariantError("matrix is not symmetric")
    return M


def decompose(M, scale="graph"):
    """Dense symmetric eigendecomposition in signed-index order.

    ``scale="graphon"`` divides eigenvalues by the matrix dimension, which
    gives the spectrum of the step graphon induced by ``M``.
    """
    if scale not in ("graph", "graphon"):
        raise DomainError(f"unknown scale {scale!r}")
    M = _check_symmetric(M)
    lam, vec = np.linalg.eigh(0.5 * (M + M.T))
    if scale == "graphon":
        lam = lam / M.shape[0]
    indices, order = signed_order(lam)
    return SignedSpectrum(indices, lam[order], vec[:, order], scale)


def reconstruction_error(spec, M):
    """``||V diag(lambda) V^T - M||_F`` (``M`` on the spectrum's own scale)."""
    approx = (spec.vectors * spec.values) @ spec.vectors.T
    return float(np.linalg.norm(approx - M))


def n_c(spec, c):
    """Number of eigenvalues with ``|lambda| >= c``."""
    if not c > 0:
        raise DomainError("band cutoff c must be positive")
    return int(np.count_nonzero(np.abs(spec.values) >= c))


def delta_c(spec_p, spec_q, c):
    """Cross eigengap between the band of ``spec_q`` and the neighbours in ``spec_p``.

    For each signed index ``i`` with ``|lambda_i^q| >= c`` the candidates are
    ``|lambda_i^p - lambda_{i+sgn i}^q|``, ``|lambda_i^q - lambda_{i+sgn i}^p|``,
    ``|lambda_1^p - lambda_{-1}^q|`` and ``|lambda_1^q - lambda_{-1}^p|``; the
    result is their minimum. Missing indices count as eigenvalue 0.

    Raises
    ------
    UndefinedGapError
        If no eigenvalue of ``spec_q`` reaches the cutoff.
    """
    if not c > 0:
        raise DomainError("band cutoff c must be positive")
    band = spec_q.band(c)
    if band.size == 0:
        raise UndefinedGapError(f"no eigenvalue with |lambda| >= {c}")
    p, q = spec_p.at, spec_q.at
    best = min(abs(p(1) - q(-1)), abs(q(1) - p(-1)))
    for i in band:
        nxt = i + (1 if i > 0 else -1)
        best = min(best, abs(p(i) - q(nxt)), abs(q(i) - p(nxt)))
    return float(best)


def operator_norm(A, N=DEFAULT_PROBE_POINTS):
    """Operator norm of the integral operator with kernel ``A``.

    A matrix is read as a step kernel on its own resolution; a
    :class:`Kernel` is sampled on ``N`` grid points first. Either way the
    result is the largest singular value divided by the resolution.
    """
    if isinstance(A, Kernel):
        A = A.matrix(N)
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        return 0.0
    return float(np.linalg.norm(A, 2) / A.shape[0])


def hilbert_schmidt_norm(A):
    """``sqrt(int int A^2)`` for a step kernel given as a matrix."""
    A = np.asarray(A, dtype=float)
    return float(np.linalg.norm(A) / A.shape[0])


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    lhs: float
    rhs: float

    @property
    def violation(self):
        return max(0.0, self.lhs - self.rhs)


def weyl_check(spec, spec_prime, kernel_dist, tol=1e-9):
    """Check ``|lambda'_i - lambda_i| <= kernel_dist`` at every signed index."""
    idx = set(int(i) for i in spec.indices) | set(int(i) for i in spec_prime.indices)
    worst = max((abs(spec_prime.at(i) - spec.at(i)) for i in idx), default=0.0)
    return CheckResult(worst <= kernel_dist + tol, worst, float(kernel_dist))


def _projector(spec, subset):
    cols = [spec.position(i) for i in subset]
    V = spec.vectors[:, cols]
    return V @ V.T


def davis_kahan_check(M, M_prime, gamma, omega, d, tol=1e-9):
    """Compare spectral projectors against the Davis-Kahan bound.

    ``gamma`` and ``omega`` are signed indices into the spectra of ``M`` and
    ``M_prime``. The separation ``d`` must not exceed the distance from
    ``gamma`` to the complement of ``omega`` (and vice versa).
    Returns a :class:`CheckResult` for
    ``||E(gamma) - E'(omega)|| <= (pi / 2) ||M - M'|| / d``.
    """
    if not d > 0:
        raise DomainError("separation d must be positive")
    s = decompose(M)
    t = decompose(M_prime)
    gamma = [int(i) for i in gamma]
    omega = [int(i) for i in omega]
    g_vals = np.array([s.at(i) for i in gamma])
    o_vals = np.array([t.at(i) for i in omega])
    Gamma = np.array([v for i, v in zip(s.indices, s.values) if int(i) not in gamma])
    Omega = np.array([v for i, v in zip(t.indices, t.values) if int(i) not in omega])
    sep = np.inf
    if g_vals.size and Omega.size:
        sep = min(sep, np.min(np.abs(g_vals[:, None] - Omega[None, :])))
    if o_vals.size and Gamma.size:
        sep = min(sep, np.min(np.abs(o_vals[:, None] - Gamma[None, :])))
    if sep < d - tol:
        raise DomainError(f"spectral subsets are only {sep:.3g} apart, less than d = {d:.3g}")
    lhs = float(np.linalg.norm(_projector(s, gamma) - _projector(t, omega), 2))
    rhs = float(0.5 * np.pi * np.linalg.norm(np.asarray(M) - np.asarray(M_prime), 2) / d)
    return CheckResult(lhs <= rhs + tol, lhs, rhs)


def concentration_bound(n, xi):
    """Spectral-norm threshold ``2 sqrt(n log(2n / xi))`` for ``||S_bar - S||``."""
    if not 0 < xi < 1:
        raise DomainError("failure probability xi must lie in (0, 1)")
    if n < 1:
        raise DomainError("n must be positive")
    return float(2.0 * np.sqrt(n * np.log(2.0 * n / xi)))


def degree_condition(gso, xi):
    """Check the expected-degree condition ``d > 4 log(2n / xi) / 9``.

    ``d`` is the maximum row sum of the expected (deterministic) GSO.
    Returns ``(passed, d, threshold)``.
    """
    if not 0 < xi < 1:
        raise DomainError("failure probability xi must lie in (0, 1)")
    gso = np.asarray(gso, dtype=float)
    n = gso.shape[0]
    d = float(gso.sum(axis=1).max())
    threshold = 4.0 * np.log(2.0 * n / xi) / 9.0
    return d > threshold, d, float(threshold)


def write_spectrum_csv(spec, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["signed_index", "eigenvalue"])
        for i, v in zip(spec.indices, spec.values):
            w.writerow([int(i), f"{v:.12g}"])


def write_eigenvectors_csv(spec, path):
    np.savetxt(path, spec.vectors, delimiter=",", fmt="%.12g")
