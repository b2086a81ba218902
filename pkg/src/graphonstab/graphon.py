"""Graphons, perturbation kernels and their structural constants.

A kernel is a symmetric function on the unit square. Graphons are kernels with
values in [0, 1]. Four graphon families are provided (constant, stochastic
block model, ``exp(-beta |u - v|)`` and piecewise-constant grids); a perturbed
graphon ``W + A`` whose sum does not fall back into one of those families is
represented by :class:`PerturbedGraphon`.

All objects are immutable after construction.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, InvariantError, RangeError, SingularityError

RANGE_TOL = 1e-12
DEFAULT_QUAD_POINTS = 2048
DEFAULT_PROBE_POINTS = 1024


def grid_points(n):
    """Left endpoints ``u_i = (i - 1) / n`` of the regular partition."""
    return np.arange(n) / n


def cell_index(u, n):
    """Index of the left-closed cell ``[k/n, (k+1)/n)`` containing ``u``.

    ``u = 1`` falls in the last cell. The boundaries are compared as the
    floats ``k / n`` so that evaluating at :func:`grid_points` of the same
    resolution lands exactly on the intended cell.
    """
    u = np.asarray(u, dtype=float)
    idx = np.floor(u * n).astype(np.int64)
    idx = np.clip(idx, 0, n - 1)
    idx = idx + (((idx + 1) / n <= u) & (idx < n - 1))
    idx = idx - ((idx / n > u) & (idx > 0))
    return idx


def _check_coords(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(~np.isfinite(v)):
        raise DomainError("coordinates must be finite")
    if np.any(u < 0) or np.any(u > 1) or np.any(v < 0) or np.any(v > 1):
        raise DomainError("coordinates must lie in [0, 1]")
    return u, v


def _check_symmetric_grid(values, name="grid"):
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InvariantError(f"{name} matrix must be square, got shape {values.shape}")
    if not np.array_equal(values, values.T):
        raise InvariantError(f"{name} matrix is not exactly symmetric")
    if not np.all(np.isfinite(values)):
        raise InvariantError(f"{name} matrix has non-finite entries")
    return values


class Kernel:
    """Symmetric bounded kernel on ``[0, 1]^2``.

    Subclasses implement ``_eval`` on broadcast arrays. Calling the kernel
    validates the coordinates first.
    """

    kind = "kernel"

    def __call__(self, u, v):
        u, v = _check_coords(u, v)
        out = self._eval(u, v)
        return out if np.ndim(out) else float(out)

    def _eval(self, u, v):
        raise NotImplementedError

    def matrix(self, n):
        """Kernel evaluated at ``(u_i, u_j)`` for the ``n`` left grid points."""
        u = grid_points(n)
        return np.asarray(self._eval(u[:, None], u[None, :]), dtype=float)

    def lipschitz(self):
        """Closed-form Lipschitz constant, or None when unavailable."""
        return None

    def is_step(self):
        """True for piecewise-constant kernels (not Lipschitz unless flat)."""
        return False

    def value_range(self):
        """(min, max) of the kernel; probed on a grid when not closed form."""
        m = self.matrix(DEFAULT_PROBE_POINTS)
        return float(m.min()), float(m.max())

    def to_config(self):
        raise NotImplementedError


class Graphon(Kernel):
    """Kernel with values in [0, 1]."""

    kind = "graphon"


# --- graphon families -------------------------------------------------------


@dataclass(frozen=True)
class ConstantGraphon(Graphon):
    p: float
    kind = "constant"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvariantError(f"constant graphon value {self.p} outside [0, 1]")

    def _eval(self, u, v):
        return np.broadcast_to(np.float64(self.p), np.broadcast(u, v).shape).copy()

    def lipschitz(self):
        return 0.0

    def value_range(self):
        return self.p, self.p

    def to_config(self):
        return {"kind": "constant", "p": float(self.p)}


@dataclass(frozen=True, eq=False)
class SBMGraphon(Graphon):
    """Stochastic block model with blocks ``[b_k, b_{k+1})``.

    ``boundaries`` holds only the interior cut points ``0 < b_1 < ... < 1``.
    """

    boundaries: tuple
    probs: np.ndarray
    kind = "sbm"

    def __post_init__(self):
        bounds = tuple(float(b) for b in self.boundaries)
        probs = np.array(self.probs, dtype=float)
        full = (0.0,) + bounds + (1.0,)
        if any(b1 <= b0 for b0, b1 in zip(full[:-1], full[1:])):
            raise InvariantError("block boundaries must be strictly increasing inside (0, 1)")
        nb = len(bounds) + 1
        if probs.shape != (nb, nb):
            raise InvariantError(f"probability matrix must be {nb}x{nb}, got {probs.shape}")
        _check_symmetric_grid(probs, "probability")
        if probs.min() < 0 or probs.max() > 1:
            raise InvariantError("block probabilities must lie in [0, 1]")
        probs.setflags(write=False)
        object.__setattr__(self, "boundaries", bounds)
        object.__setattr__(self, "probs", probs)

    @property
    def widths(self):
        full = np.array((0.0,) + self.boundaries + (1.0,))
        return np.diff(full)

    def block_of(self, u):
        return np.searchsorted(np.asarray(self.boundaries), u, side="right")

    def _eval(self, u, v):
        return self.probs[self.block_of(u), self.block_of(v)]

    def lipschitz(self):
        return 0.0 if np.ptp(self.probs) == 0 else None

    def is_step(self):
        return True

    def value_range(self):
        return float(self.probs.min()), float(self.probs.max())

    def to_config(self):
        return {"kind": "sbm", "boundaries": list(self.boundaries), "probs": self.probs.tolist()}


@dataclass(frozen=True)
class SmoothExpGraphon(Graphon):
    """``W(u, v) = exp(-beta |u - v|)``, an ``beta``-Lipschitz graphon."""

    beta: float
    kind = "smooth-exp"

    def __post_init__(self):
        if not self.beta >= 0:
            raise InvariantError("beta must be nonnegative")

    def _eval(self, u, v):
        return np.exp(-self.beta * np.abs(u - v))

    def lipschitz(self):
        return float(self.beta)

    def value_range(self):
        return float(np.exp(-self.beta)), 1.0

    def to_config(self):
        return {"kind": "smooth-exp", "beta": float(self.beta)}


@dataclass(frozen=True, eq=False)
class GridGraphon(Graphon):
    """Piecewise-constant graphon on the regular ``N x N`` partition."""

    values: np.ndarray
    source: str | None = None
    kind = "grid"

    def __post_init__(self):
        values = _check_symmetric_grid(np.array(self.values, dtype=float))
        if values.min() < 0 or values.max() > 1:
            raise InvariantError("grid graphon values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def resolution(self):
        return self.values.shape[0]

    def _eval(self, u, v):
        n = self.resolution
        return self.values[cell_index(u, n), cell_index(v, n)]

    def lipschitz(self):
        return 0.0 if np.ptp(self.values) == 0 else None

    def is_step(self):
        return True

    def value_range(self):
        return float(self.values.min()), float(self.values.max())

    def to_config(self):
        if self.source is not None:
            return {"kind": "grid", "file": self.source}
        return {"kind": "grid", "values": self.values.tolist()}


# --- perturbation kernels ---------------------------------------------------


@dataclass(frozen=True)
class ConstantKernel(Kernel):
    a: float
    kind = "constant-kernel"

    def _eval(self, u, v):
        return np.broadcast_to(np.float64(self.a), np.broadcast(u, v).shape).copy()

    def lipschitz(self):
        return 0.0

    def value_range(self):
        return self.a, self.a

    def to_config(self):
        return {"kind": "additive-constant", "a": float(self.a)}


@dataclass(frozen=True, eq=False)
class ScaledKernel(Kernel):
    """``alpha * K``."""

    base: Kernel
    alpha: float
    kind = "scaled"

    def _eval(self, u, v):
        return self.alpha * self.base._eval(u, v)

    def lipschitz(self):
        lip = self.base.lipschitz()
        return None if lip is None else abs(self.alpha) * lip

    def is_step(self):
        return self.base.is_step()

    def value_range(self):
        lo, hi = self.base.value_range()
        return tuple(sorted((self.alpha * lo, self.alpha * hi)))

    def to_config(self):
        return {"kind": "scaled-copy", "alpha": float(self.alpha)}


@dataclass(frozen=True, eq=False)
class PaperExpKernel(Kernel):
    """``(1 - exp(1 / W)) / 10`` for a graphon bounded away from zero."""

    base: Kernel
    kind = "paper-exp"

    def _eval(self, u, v):
        return (1.0 - np.exp(1.0 / self.base._eval(u, v))) / 10.0

    def is_step(self):
        return self.base.is_step()

    def to_config(self):
        return {"kind": "paper-exp"}


@dataclass(frozen=True, eq=False)
class GridKernel(Kernel):
    """Piecewise-constant kernel with arbitrary real values."""

    values: np.ndarray
    kind = "grid-kernel"

    def __post_init__(self):
        values = _check_symmetric_grid(np.array(self.values, dtype=float), "kernel")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def _eval(self, u, v):
        n = self.values.shape[0]
        return self.values[cell_index(u, n), cell_index(v, n)]

    def lipschitz(self):
        return 0.0 if np.ptp(self.values) == 0 else None

    def is_step(self):
        return True

    def value_range(self):
        return float(self.values.min()), float(self.values.max())

    def to_config(self):
        return {"kind": "custom-grid", "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class DifferenceKernel(Kernel):
    """``K1 - K2``; used for the effective perturbation after clipping."""

    first: Kernel
    second: Kernel
    kind = "difference"

    def _eval(self, u, v):
        return self.first._eval(u, v) - self.second._eval(u, v)

    def is_step(self):
        return self.first.is_step() or self.second.is_step()


@dataclass(frozen=True, eq=False)
class PerturbedGraphon(Graphon):
    """``W + A`` for analytic families that are not closed under the perturbation.

    Under the reject policy values outside ``[0, 1]`` by more than
    ``RANGE_TOL`` raise :class:`RangeError` when evaluated; smaller excursions
    are rounded into range. Under the clip policy values are clipped.
    """

    base: Graphon
    delta: Kernel
    policy: str = "reject"
    kind = "perturbed"

    def _eval(self, u, v):
        out = np.asarray(self.base._eval(u, v) + self.delta._eval(u, v), dtype=float)
        if self.policy == "reject" and (out.min() < -RANGE_TOL or out.max() > 1 + RANGE_TOL):
            raise RangeError("perturbed graphon leaves [0, 1]")
        return np.clip(out, 0.0, 1.0)

    def lipschitz(self):
        a = self.base.lipschitz()
        b = self.delta.lipschitz()
        if a is None or b is None:
            return None
        return a + b

    def is_step(self):
        return self.base.is_step() or self.delta.is_step()

    def to_config(self):
        return {"kind": "perturbed", "base": self.base.to_config(), "delta": self.delta.to_config(),
                "policy": self.policy}


# --- perturbations ----------------------------------------------------------


PERTURBATION_KINDS = ("additive-constant", "scaled-copy", "paper-exp", "custom-grid")


@dataclass(frozen=True, eq=False)
class PerturbationSpec:
    """Description of the perturbation kernel ``A`` with ``W' = W + A``.

    kind : one of ``additive-constant`` (``A = a``), ``scaled-copy``
        (``A = alpha * W``), ``paper-exp`` (``A = (1 - exp(1/W)) / 10``) or
        ``custom-grid`` (``A`` given as a symmetric matrix).
    policy : ``reject`` raises when ``W + A`` leaves [0, 1]; ``clip`` clips.
    """

    kind: str
    a: float = 0.0
    alpha: float = 0.0
    values: np.ndarray | None = None
    policy: str = "reject"
    w_min: float = 0.05

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ConfigError(f"unknown perturbation kind {self.kind!r}")
        if self.policy not in ("reject", "clip"):
            raise ConfigError(f"unknown out-of-range policy {self.policy!r}")
        if self.kind == "custom-grid" and self.values is None:
            raise ConfigError("custom-grid perturbation needs values")

    def to_config(self):
        cfg = {"kind": self.kind, "policy": self.policy}
        if self.kind == "additive-constant":
            cfg["a"] = float(self.a)
        elif self.kind == "scaled-copy":
            cfg["alpha"] = float(self.alpha)
        elif self.kind == "paper-exp":
            cfg["w_min"] = float(self.w_min)
        else:
            cfg["values"] = np.asarray(self.values).tolist()
        return cfg


def _nominal_kernel(W, spec):
    if spec.kind == "additive-constant":
        return ConstantKernel(float(spec.a))
    if spec.kind == "scaled-copy":
        return ScaledKernel(W, float(spec.alpha))
    if spec.kind == "paper-exp":
        lo, _ = W.value_range()
        if lo < spec.w_min:
            raise SingularityError(
                f"exponential perturbation needs min W >= {spec.w_min}, kernel reaches {lo:.3g}")
        return PaperExpKernel(W)
    return GridKernel(spec.values)


def _apply_values(values, policy):
    lo, hi = values.min(), values.max()
    if policy == "reject":
        if lo < -RANGE_TOL or hi > 1 + RANGE_TOL:
            raise RangeError(f"perturbed values span [{lo:.6g}, {hi:.6g}], outside [0, 1]")
    return np.clip(values, 0.0, 1.0)


def _structured_sum(W, A):
    """``W + A`` as a graphon of a closed family, or None if not representable."""
    if isinstance(A, ConstantKernel):
        if isinstance(W, ConstantGraphon):
            return "constant", np.array([[W.p + A.a]])
        if isinstance(W, SBMGraphon):
            return "sbm", W.probs + A.a
        if isinstance(W, GridGraphon):
            return "grid", W.values + A.a
    if isinstance(A, (ScaledKernel, PaperExpKernel)) and A.base is W:
        if isinstance(W, ConstantGraphon):
            base = np.array([[W.p]])
            kind = "constant"
        elif isinstance(W, SBMGraphon):
            base, kind = W.probs, "sbm"
        elif isinstance(W, GridGraphon):
            base, kind = W.values, "grid"
        else:
            return None
        if isinstance(A, ScaledKernel):
            return kind, base + A.alpha * base
        return kind, base + (1.0 - np.exp(1.0 / base)) / 10.0
    if isinstance(A, GridKernel) and isinstance(W, GridGraphon) and A.values.shape == W.values.shape:
        return "grid", W.values + A.values
    return None


def perturb(W, spec):
    """Perturb ``W`` by the kernel described in ``spec``.

    Returns
    -------
    (W_prime, A) : the perturbed graphon and the kernel ``A = W' - W``. Under
        the clip policy ``A`` is the effective difference after clipping.
    """
    A = _nominal_kernel(W, spec)
    structured = _structured_sum(W, A)
    if structured is not None:
        kind, values = structured
        values = _apply_values(values, spec.policy)
        if kind == "constant":
            Wp = ConstantGraphon(float(values[0, 0]))
        elif kind == "sbm":
            Wp = SBMGraphon(W.boundaries, values)
        else:
            Wp = GridGraphon(values)
    else:
        Wp = PerturbedGraphon(W, A, spec.policy)
        # fail early on the probe grid rather than at first use
        probe = W.matrix(DEFAULT_PROBE_POINTS) + A.matrix(DEFAULT_PROBE_POINTS)
        _apply_values(probe, spec.policy)
    if spec.policy == "clip":
        A = DifferenceKernel(Wp, W)
    return Wp, A


# --- structural constants ---------------------------------------------------


def max_degree(W, resolution=DEFAULT_QUAD_POINTS):
    """``max_x int_0^1 W(x, y) dy``.

    Exact for constant, block and grid graphons; midpoint quadrature with
    ``resolution`` points otherwise.
    """
    if isinstance(W, ConstantGraphon):
        return float(W.p)
    if isinstance(W, SBMGraphon):
        return float(np.max(W.probs @ W.widths))
    if isinstance(W, GridGraphon):
        return float(np.max(W.values.mean(axis=1)))
    mid = (np.arange(resolution) + 0.5) / resolution
    vals = W._eval(mid[:, None], mid[None, :])
    return float(np.max(vals.mean(axis=1)))


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    estimated: bool
    non_lipschitz: bool = False


def estimate_lipschitz(K, M=DEFAULT_QUAD_POINTS, closed_form=True):
    """Lipschitz constant of ``K`` in the ``|dx| + |dy|`` metric.

    Uses the family's closed form when available (and ``closed_form`` is
    true); otherwise the largest one-step finite-difference ratio on an
    ``M x M`` probe grid over ``[0, 1]^2``. Step kernels get
    ``non_lipschitz=True`` and a :class:`RuntimeWarning`, since their
    estimate grows with ``M``.
    """
    if M < 2:
        raise DomainError("probe resolution must be at least 2")
    if closed_form:
        lip = K.lipschitz()
        if lip is not None:
            return LipschitzEstimate(float(lip), estimated=False)
    u = np.linspace(0.0, 1.0, M)
    h = 1.0 / (M - 1)
    vals = np.asarray(K._eval(u[:, None], u[None, :]), dtype=float)
    ratio = max(np.abs(np.diff(vals, axis=0)).max(), np.abs(np.diff(vals, axis=1)).max()) / h
    non_lip = bool(K.is_step() and ratio > 0)
    if non_lip:
        warnings.warn(f"{K.kind} kernel is a step function and not Lipschitz; "
                      f"finite-difference estimate {ratio:.4g} grows with the probe resolution",
                      RuntimeWarning, stacklevel=2)
    return LipschitzEstimate(float(ratio), estimated=True, non_lipschitz=non_lip)


# --- serialization ----------------------------------------------------------


def load_matrix_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def graphon_from_config(cfg, base_dir=None):
    """Build a graphon from a ``{"kind": ..., ...}`` mapping.

    Grid graphons reference a comma-separated matrix file with ``file`` or
    carry inline ``values``. Relative paths resolve against ``base_dir``.
    """
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("graphon config needs a 'kind' field")
    kind = cfg["kind"]
    try:
        if kind == "constant":
            return ConstantGraphon(float(cfg["p"]))
        if kind == "sbm":
            return SBMGraphon(tuple(cfg["boundaries"]), np.array(cfg["probs"], dtype=float))
        if kind == "smooth-exp":
            return SmoothExpGraphon(float(cfg["beta"]))
        if kind == "grid":
            if "file" in cfg:
                path = Path(cfg["file"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                if not path.exists():
                    raise ConfigError(f"graphon.file: {path} does not exist")
                return GridGraphon(load_matrix_csv(path), source=str(cfg["file"]))
            return GridGraphon(np.array(cfg["values"], dtype=float))
        if kind == "perturbed":
            base = graphon_from_config(cfg["base"], base_dir)
            spec = perturbation_from_config(dict(cfg["delta"], policy=cfg.get("policy", "reject")))
            return perturb(base, spec)[0]
    except KeyError as exc:
        raise ConfigError(f"graphon.{exc.args[0]}: missing field for kind {kind!r}") from None
    except ConfigError:
        raise
    except (InvariantError, DomainError, RangeError, SingularityError, TypeError, ValueError) as exc:
        raise ConfigError(f"graphon: {exc}") from None
    raise ConfigError(f"graphon.kind: unknown graphon kind {kind!r}")


def perturbation_from_config(cfg):
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("perturbation config needs a 'kind' field")
    kind = cfg["kind"]
    values = cfg.get("values")
    return PerturbationSpec(
        kind=kind,
        a=float(cfg.get("a", 0.0)),
        alpha=float(cfg.get("alpha", 0.0)),
        values=None if values is None else np.array(values, dtype=float),
        policy=cfg.get("policy", "reject"),
        w_min=float(cfg.get("w_min", 0.05)),
    )
