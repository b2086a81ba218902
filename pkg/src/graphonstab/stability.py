"""Stability bounds for graphon filters, WNNs and GNNs, and per-cell reports.

Constants follow the usual labelling of the six kernels involved:

====  ==========================================================
 1    graphon ``W``
 2    perturbed graphon ``W' = W + A``
 3    graphon induced by the deterministic graph sampled from ``W``
 4    graphon induced by the deterministic graph sampled from ``W'``
 5    graphon induced by the stochastic graph sampled from ``W``
 6    graphon induced by the stochastic graph sampled from ``W'``
====  ==========================================================

``n_c^(p)`` counts eigenvalues of kernel ``p`` with ``|lambda| >= c`` and
``delta_c^(pq)`` is the cross eigengap of :func:`spectral.delta_c`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, UndefinedGapError
from .spectral import DEGENERATE_GAP, delta_c, n_c


def _spectral_factor(A2, nc, dc):
    if nc == 0:
        return A2
    if dc <= DEGENERATE_GAP:
        return math.inf
    return A2 + math.pi * nc / dc


def _scale(value, factor):
    # 0 * inf is taken as 0: a zero perturbation cannot move the output
    if factor == 0:
        return 0.0
    return value * factor


def bound_thm4(A2, nc, dc, eps, x_norm):
    """Filter-level bound ``(A2 + pi n_c / delta_c) eps ||X||``."""
    return _scale(_spectral_factor(A2, nc, dc), eps * x_norm)


def bound_thm1(L, F, A2, nc, dc, eps, x_norm):
    """WNN bound ``L F^(L-1) (A2 + pi n_c / delta_c) eps ||X||``."""
    return _scale(L * F ** (L - 1) * _spectral_factor(A2, nc, dc), eps * x_norm)


def constant_B(A1, A3):
    """``sqrt(A1) + sqrt(A1 + A3)``."""
    return math.sqrt(A1) + math.sqrt(A1 + A3)


def bound_thm2(L, F, A2, nc_hat, dc_hat, eps, B, n, x_norm):
    """Deterministic-graph bound ``L F^(L-1) (A2 + pi n / delta) (eps + B / sqrt(n)) ||x_n||``."""
    return _scale(L * F ** (L - 1) * _spectral_factor(A2, nc_hat, dc_hat),
                  (eps + B / math.sqrt(n)) * x_norm)


def concentration_term(n, xi):
    """``sqrt(log(2n / xi))``."""
    if not 0 < xi < 1:
        raise DomainError("failure probability xi must lie in (0, 1)")
    return math.sqrt(math.log(2.0 * n / xi))


def bound_thm3(L, F, A2, nc_check, dc_check, eps, B, n, xi, x_norm):
    """Stochastic-graph bound, valid with probability at least ``1 - xi``.

    ``L F^(L-1) (A2 + pi n / delta) (eps + (B + 4 sqrt(log(2n/xi))) / sqrt(n)) ||x_n||``.
    """
    add = (B + 4.0 * concentration_term(n, xi)) / math.sqrt(n)
    return _scale(L * F ** (L - 1) * _spectral_factor(A2, nc_check, dc_check), (eps + add) * x_norm)


def bound_lemma1(L, F, A2, nc_q, dc_pq, n, xi, x_norm):
    """Deterministic-vs-stochastic bound ``L F^(L-1) (A2 + pi n / delta) 2 sqrt(log(2n/xi)) / sqrt(n) ||x_n||``."""
    mult = 2.0 * concentration_term(n, xi) / math.sqrt(n)
    return _scale(L * F ** (L - 1) * _spectral_factor(A2, nc_q, dc_pq), mult * x_norm)


@dataclass(frozen=True)
class AS4Result:
    passed: bool
    margin_W: float
    margin_W_prime: float
    applicable: bool = True


def check_as4(n, xi, d_W, d_Wp, A1, A3):
    """Degree condition ``n - log(2n/xi)/d > 2 A / d`` for ``W`` and ``W'``.

    Margins are left side minus right side. A zero maximum degree makes the
    check not applicable (``applicable=False``, ``passed=False``).
    """
    if not 0 < xi < 1:
        raise DomainError("failure probability xi must lie in (0, 1)")
    if d_W <= 0 or d_Wp <= 0:
        return AS4Result(False, math.nan, math.nan, applicable=False)
    log_term = math.log(2.0 * n / xi)
    m1 = n - log_term / d_W - 2.0 * A1 / d_W
    m2 = n - log_term / d_Wp - 2.0 * (A1 + A3) / d_Wp
    return AS4Result(m1 > 0 and m2 > 0, m1, m2)


# --- band constants over labelled spectra ------------------------------------


def band_constants(spectra, c, count_labels, gap_pairs):
    """``max n_c^(p)`` over ``count_labels`` and ``min delta_c^(pq)`` over ``gap_pairs``.

    ``spectra`` maps labels to :class:`SignedSpectrum`. A pair whose second
    kernel has no band eigenvalue is skipped; if every pair is skipped the gap
    is ``nan`` and ``undefined`` is returned true.
    """
    nc = max(n_c(spectra[p], c) for p in count_labels)
    gaps = []
    for p, q in gap_pairs:
        try:
            gaps.append(delta_c(spectra[p], spectra[q], c))
        except UndefinedGapError:
            continue
    if not gaps:
        return nc, math.nan, True
    return nc, min(gaps), False


@dataclass
class StabilityReport:
    n: int
    seed: int
    mode: str
    filter_form: str
    epsilon: float
    A1: float
    A2: float
    A3: float
    B: float
    n_c_max: int
    delta_c_min: float
    bound_thm1: float
    bound_thm2: float
    bound_thm3: float
    bound_lemma1: float
    empirical_l2: float
    empirical_rel: float
    as1_pass: bool
    as4_pass: bool
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    CSV_COLUMNS = ("n", "seed", "mode", "filter_form", "epsilon", "A1", "A2", "A3", "B", "n_c_max",
                   "delta_c_min", "bound_thm1", "bound_thm2", "bound_thm3", "bound_lemma1",
                   "empirical_l2", "empirical_rel", "as1_pass", "as4_pass", "flags")

    @property
    def native_bound(self):
        """The bound the empirical difference is compared against in this mode."""
        return self.bound_thm3 if self.mode == "stochastic" else self.bound_thm2

    def within_bound(self):
        b = self.native_bound
        return bool(np.isnan(b) or self.empirical_l2 <= b)

    def csv_row(self):
        out = []
        for col in self.CSV_COLUMNS:
            v = getattr(self, col)
            if col == "flags":
                out.append(";".join(v))
            elif isinstance(v, (bool, np.bool_)):
                out.append("true" if v else "false")
            elif isinstance(v, (int, np.integer)):
                out.append(str(int(v)))
            elif isinstance(v, float):
                out.append(format_float(v))
            else:
                out.append(str(v))
        return out

    def to_dict(self):
        d = asdict(self)
        return {k: _jsonable(v) for k, v in d.items()}


def format_float(v):
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return format_float(v)
        return v
    return v


# --- experiment cells ---------------------------------------------------------


class SpectrumCache:
    """Thread-safe memo for spectra and graphs shared between cells."""

    def __init__(self):
        import threading
        self._data = {}
        self._lock = threading.Lock()

    def get(self, key, compute):
        with self._lock:
            if key in self._data:
                return self._data[key]
        value = compute()
        with self._lock:
            return self._data.setdefault(key, value)


def _lipschitz(kernel, supplied):
    """(value, estimated, non_lipschitz) for a user-supplied or estimated constant."""
    import warnings

    from .graphon import estimate_lipschitz
    if supplied is not None:
        # a nominal value for a discontinuous kernel is still only an estimate
        nonlip = kernel.is_step() and kernel.lipschitz() is None
        return float(supplied), nonlip, nonlip
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = estimate_lipschitz(kernel)
    return est.value, est.estimated, est.non_lipschitz


def run_stability_cell(config, n, seed, mode, cache=None):
    """Build both graphs, run both GNNs, and evaluate every applicable bound.

    Parameters
    ----------
    config : ExperimentConfig
    n : graph size
    seed : trial seed; fixes the network parameters and (with ``n`` and
        ``mode``) the stochastic graphs
    mode : ``"deterministic"`` or ``"stochastic"``
    cache : optional :class:`SpectrumCache` shared across cells

    Returns
    -------
    StabilityReport
        Bounds that do not apply to the mode are ``nan``. ``bound_thm1`` is in the
        ``L2([0, 1])`` norm of the graphon signal; the other bounds and
        ``empirical_l2`` use the Euclidean norm of the sampled graph signal.
    """
    import json

    from .graphon import max_degree, perturb
    from .sampling import deterministic_graph, l2_norm, sample_signal, stochastic_graph
    from .spectral import decompose, operator_norm
    from .config import graph_seed
    from .gnn import empirical_output_diff

    if mode not in ("deterministic", "stochastic"):
        raise DomainError(f"unknown mode {mode!r}")
    cache = cache if cache is not None else SpectrumCache()
    flags = []
    W = config.graphon
    Wp, A = perturb(W, config.perturbation)
    N = config.resolution
    c = config.c
    xi = config.xi
    loops = config.self_loops
    gkey = json.dumps([W.to_config(), config.perturbation.to_config(), loops], sort_keys=True)

    def limit_spectra():
        Wm, Wpm = W.matrix(N), Wp.matrix(N)
        return decompose(Wm, "graphon"), decompose(Wpm, "graphon"), operator_norm(Wpm - Wm)

    s1, s2, eps = cache.get(("limit", gkey, N), limit_spectra)

    def det_graphs():
        G, Gp = deterministic_graph(W, n, loops), deterministic_graph(Wp, n, loops)
        return G, Gp, decompose(G.gso, "graphon"), decompose(Gp.gso, "graphon")

    G, Gp, s3, s4 = cache.get(("det", gkey, n), det_graphs)

    consts = config.constants
    A1, est1, nonlip1 = _lipschitz(W, consts.get("A1"))
    A3, est3, nonlip3 = _lipschitz(A, consts.get("A3"))
    if est1 or est3:
        flags.append("estimated-constants")
    if nonlip1 or nonlip3:
        flags.append("non-lipschitz")
    B = constant_B(A1, A3)

    params = config.build_params(seed)
    L, F = params.L, params.F
    A2 = params.A2()
    as1 = params.sup_response() < 1.0
    if not as1:
        flags.append("as1-fail")
    deviation = params.band_deviation(c)
    if deviation > 0:
        flags.append("band-violation")

    X = config.signal
    x = sample_signal(X, n)
    x_norm = l2_norm(x)
    X_norm = l2_norm(X)

    spectra = {1: s1, 2: s2, 3: s3, 4: s4}
    nc1, dc1, undef1 = band_constants(spectra, c, (2,), ((1, 2),))
    thm1 = math.nan if undef1 else bound_thm1(L, F, A2, nc1, dc1, eps, X_norm)
    nc_hat, dc_hat, undef_hat = band_constants(spectra, c, (2, 3, 4), ((1, 2), (1, 3), (2, 4)))
    thm2 = math.nan if undef_hat else bound_thm2(L, F, A2, nc_hat, dc_hat, eps, B, n, x_norm)

    d_W, d_Wp = max_degree(W), max_degree(Wp)
    as4 = check_as4(n, xi, d_W, d_Wp, A1, A3)
    if not as4.passed:
        flags.append("as4-fail")

    extra = {"A2_source": "closed-form" if params.form == "band" else "finite-difference",
             "band_deviation": deviation, "signal_norm_graph": x_norm, "signal_norm_graphon": X_norm,
             "n_c_thm1": nc1, "delta_c_thm1": dc1, "as4_margin_W": as4.margin_W,
             "as4_margin_W_prime": as4.margin_W_prime, "d_W": d_W, "d_W_prime": d_Wp}

    thm3 = lemma1 = math.nan
    if mode == "deterministic":
        diff = empirical_output_diff(params, G, Gp, n, x, (s3, s4))
        nc_rep, dc_rep, undef = nc_hat, dc_hat, undef_hat
    else:
        gs = graph_seed(config.master_seed, n, seed, mode)
        Gs, Gps = stochastic_graph(W, n, gs, loops), stochastic_graph(Wp, n, gs, loops)
        s5, s6 = decompose(Gs.gso, "graphon"), decompose(Gps.gso, "graphon")
        spectra.update({5: s5, 6: s6})
        nc_rep, dc_rep, undef = band_constants(spectra, c, (2, 3, 4, 5, 6),
                                               ((1, 2), (1, 3), (2, 4), (3, 5), (4, 6)))
        if not undef and as4.passed:
            thm3 = bound_thm3(L, F, A2, nc_rep, dc_rep, eps, B, n, xi, x_norm)
        nc_q, dc_pq, undef_l = band_constants(spectra, c, (5,), ((3, 5),))
        if not undef_l and as4.passed:
            lemma1 = bound_lemma1(L, F, A2, nc_q, dc_pq, n, xi, x_norm)
        diff = empirical_output_diff(params, Gs, Gps, n, x, (s5, s6))
        det_vs_sto = empirical_output_diff(params, G, Gs, n, x, (s3, s5))
        extra.update({
            "graph_seed": gs,
            "empirical_lemma1": det_vs_sto.l2,
            "gso_deviation": float(np.linalg.norm(G.gso - Gs.gso, 2)),
            "concentration_threshold": float(2.0 * math.sqrt(n * math.log(2.0 * n / xi))),
        })
    if undef:
        flags.append("undefined-gap")
    elif dc_rep <= DEGENERATE_GAP:
        flags.append("degenerate-gap")
    if any(math.isinf(b) for b in (thm1, thm2, thm3, lemma1)):
        flags.append("infinite-bound")
    extra["empirical_l2_graphon"] = diff.l2_graphon

    return StabilityReport(
        n=n, seed=seed, mode=mode, filter_form=params.form, epsilon=eps, A1=A1, A2=A2, A3=A3, B=B,
        n_c_max=nc_rep, delta_c_min=dc_rep, bound_thm1=thm1, bound_thm2=thm2, bound_thm3=thm3,
        bound_lemma1=lemma1, empirical_l2=diff.l2, empirical_rel=diff.rel, as1_pass=as1,
        as4_pass=as4.passed, flags=flags, extra=extra)
