"""Graph and graphon convolutional filters.

Two response families are supported:

* :class:`PolyFilter`, the shift-and-sum filter ``sum_k h_k S^k x`` with
  response ``h(lambda) = sum_k h_k lambda^k``;
* :class:`BandFilter`, an explicit response that is exactly constant on
  ``|lambda| < c`` and rises linearly to ``g0 + gamma`` at ``|lambda| = 1``.

Band filters can only be applied through an eigendecomposition.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ShapeError
from .graphon import DEFAULT_PROBE_POINTS
from .sampling import Graph, induce_signal, sample_signal
from .spectral import decompose

DEFAULT_AS1_PROBES = 4096


@dataclass(frozen=True, eq=False)
class PolyFilter:
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        if coeffs.size < 1:
            raise ConfigError("a polynomial filter needs at least one coefficient")
        if not np.all(np.isfinite(coeffs)):
            raise ConfigError("filter coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def K(self):
        return self.coeffs.size

    def response(self, lam):
        return np.polynomial.polynomial.polyval(np.asarray(lam, dtype=float), self.coeffs)

    def sup(self, lo=-1.0, hi=1.0):
        """Exact ``max |h|`` on ``[lo, hi]`` from endpoints and critical points."""
        return _poly_sup(self.coeffs, lo, hi)

    def to_config(self):
        return {"form": "poly", "coeffs": self.coeffs.tolist()}


@dataclass(frozen=True)
class BandFilter:
    """``h(lambda) = g0 + gamma * clip((|lambda| - c) / (1 - c), 0, 1)``."""

    c: float
    g0: float = 0.0
    gamma: float = 0.5

    def __post_init__(self):
        if not 0 < self.c < 1:
            raise ConfigError("band cutoff c must lie in (0, 1)")
        if self.gamma < 0:
            raise ConfigError("band gain must be nonnegative")

    @property
    def A2(self):
        return self.gamma / (1.0 - self.c)

    def response(self, lam):
        lam = np.asarray(lam, dtype=float)
        ramp = np.clip((np.abs(lam) - self.c) / (1.0 - self.c), 0.0, 1.0)
        return np.where(np.abs(lam) < self.c, self.g0, self.g0 + self.gamma * ramp)

    def sup(self):
        return max(abs(self.g0), abs(self.g0 + self.gamma))

    def to_config(self):
        return {"form": "band", "c": float(self.c), "g0": float(self.g0), "gamma": float(self.gamma)}


def filter_from_config(cfg):
    form = cfg.get("form")
    if form == "poly":
        return PolyFilter(np.array(cfg["coeffs"], dtype=float))
    if form == "band":
        return BandFilter(float(cfg["c"]), float(cfg.get("g0", 0.0)), float(cfg.get("gamma", 0.5)))
    raise ConfigError(f"filter.form: unknown filter form {form!r}")


def _poly_sup(coeffs, lo=-1.0, hi=1.0):
    coeffs = np.asarray(coeffs, dtype=float)
    pts = [lo, hi]
    if coeffs.size > 2:
        crit = np.polynomial.polynomial.polyroots(np.polynomial.polynomial.polyder(coeffs))
        crit = crit[np.abs(crit.imag) < 1e-10].real
        pts.extend(crit[(crit >= lo) & (crit <= hi)])
    return float(np.max(np.abs(np.polynomial.polynomial.polyval(np.array(pts), coeffs))))


def _gso(G):
    return G.gso if isinstance(G, Graph) else np.asarray(G, dtype=float)


def apply_poly(f, G, m, x):
    """``y = sum_k h_k (S / m)^k x`` by repeated shifts.

    ``x`` may carry trailing feature columns (shape ``(n,)`` or ``(n, F)``).
    """
    S = _gso(G)
    x = np.asarray(x, dtype=float)
    if not m > 0:
        raise DomainError("normalization m must be positive")
    if x.shape[0] != S.shape[0]:
        raise ShapeError(f"signal has length {x.shape[0]}, GSO is {S.shape[0]}x{S.shape[0]}")
    coeffs = f.coeffs if isinstance(f, PolyFilter) else np.asarray(f, dtype=float)
    y = coeffs[0] * x
    z = x
    for h in coeffs[1:]:
        z = S @ z / m
        y = y + h * z
    return y


def apply_spectral(f, spec, x):
    """``y = V h(Lambda) V^T x`` using the spectrum's (scaled) eigenvalues."""
    x = np.asarray(x, dtype=float)
    V = spec.vectors
    if x.shape[0] != V.shape[0]:
        raise ShapeError(f"signal has length {x.shape[0]}, spectrum has dimension {V.shape[0]}")
    resp = f.response(spec.values)
    xhat = V.T @ x
    if xhat.ndim == 1:
        return V @ (resp * xhat)
    return V @ (resp[:, None] * xhat)


def graphon_convolution(f, W, X, N=DEFAULT_PROBE_POINTS, spec=None):
    """Graphon convolution discretized on ``N`` grid points.

    Returns the step signal induced by filtering the samples of ``X`` on the
    ``N``-node deterministic graph with shift ``S / N``. Band filters use the
    graphon-scale spectrum (computed when ``spec`` is not supplied).
    """
    if N < 2:
        raise DomainError("resolution N must be at least 2")
    S = W.matrix(N)
    x = sample_signal(X, N)
    if isinstance(f, PolyFilter):
        y = apply_poly(f, S, N, x)
    else:
        spec = spec if spec is not None else decompose(S, "graphon")
        y = apply_spectral(f, spec, x)
    return induce_signal(y)


@dataclass(frozen=True)
class AS1Result:
    A2: float
    sup: float
    passed: bool


def estimate_as1(f, probes=DEFAULT_AS1_PROBES):
    """Lipschitz constant and peak of the response on [-1, 1].

    Band filters use their closed form. Otherwise the Lipschitz constant is
    the largest slope between adjacent probes and the peak is the largest
    probed ``|h|``. ``passed`` is the strict ``sup |h| < 1`` test.
    """
    if probes < 2:
        raise DomainError("need at least two probe points")
    if isinstance(f, BandFilter):
        sup = f.sup()
        return AS1Result(f.A2, sup, sup < 1.0)
    lam = np.linspace(-1.0, 1.0, probes)
    h = f.response(lam)
    A2 = float(np.max(np.abs(np.diff(h))) / (lam[1] - lam[0]))
    sup = float(np.max(np.abs(h)))
    return AS1Result(A2, sup, sup < 1.0)


def project_as1(f, eta=1e-3):
    """Rescale a polynomial filter so that ``sup |h| <= 1 - eta`` on [-1, 1]."""
    if not 0 < eta < 1:
        raise DomainError("margin eta must lie in (0, 1)")
    sup = f.sup()
    if sup == 0 or sup < 1.0 - eta:
        return f
    return PolyFilter(f.coeffs * ((1.0 - eta) / sup))


def band_deviation(f, c):
    """``max_{|lambda| <= c} |h(lambda) - h(0)|``; zero for band filters."""
    if isinstance(f, BandFilter):
        return 0.0
    shifted = np.array(f.coeffs, dtype=float)
    shifted[0] = 0.0
    return _poly_sup(shifted, -c, c)
