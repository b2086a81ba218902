import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphonstab.errors import ConfigError
from graphonstab.graphlimits import (MOTIFS, convergence_table, hom_density_graph,
                                     hom_density_graphon, reference_density, write_convergence_csv)
from graphonstab.graphon import ConstantGraphon, SBMGraphon, SmoothExpGraphon
from graphonstab.sampling import deterministic_graph, induced_graphon

SBM2 = SBMGraphon((0.5,), [[0.8, 0.2], [0.2, 0.8]])


def brute_force(motif, S):
    """Homomorphism density by summing over every node map."""
    n = S.shape[0]
    idx = np.arange(n)
    if motif == "K2":
        return S.sum() / n**2
    if motif == "P3":
        return np.einsum("ij,jk->", S, S) / n**3
    if motif == "K3":
        return np.einsum("ij,jk,ki->", S, S, S) / n**3
    return np.einsum("ij,jk,kl,li->", S, S, S, S) / n**4


@pytest.mark.parametrize("motif", MOTIFS)
def test_trivial_graphs(motif):
    assert hom_density_graph(motif, np.ones((7, 7))) == pytest.approx(1.0)
    assert hom_density_graph(motif, np.zeros((7, 7))) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1), st.sampled_from(MOTIFS))
def test_trace_formulas_match_brute_force(n, seed, motif):
    M = np.random.default_rng(seed).random((n, n))
    S = np.triu(M) + np.triu(M, 1).T
    d = hom_density_graph(motif, S)
    assert d == pytest.approx(brute_force(motif, S), rel=1e-12)
    assert 0.0 <= d <= 1.0


def test_constant_graphon_exact():
    G = deterministic_graph(ConstantGraphon(0.5), 33)
    assert hom_density_graph("K2", G) == 0.5
    assert hom_density_graph("K3", G) == 0.125
    assert hom_density_graphon("K2", ConstantGraphon(0.5)) == 0.5
    assert hom_density_graphon("K3", ConstantGraphon(0.5)) == 0.125


def test_sbm_densities():
    assert hom_density_graphon("K2", SBM2, 64) == pytest.approx(0.5, abs=1e-12)
    # t(K3) = (p^3 + 3 p q^2) / 4 for equal blocks
    assert reference_density("K3", SBM2) == pytest.approx((0.8**3 + 3 * 0.8 * 0.04) / 4)
    for motif in MOTIFS:
        assert hom_density_graphon(motif, SBM2, 64) == pytest.approx(reference_density(motif, SBM2), abs=1e-12)


def test_smooth_exp_refinement():
    W = SmoothExpGraphon(1.0)
    for motif in MOTIFS:
        assert abs(hom_density_graphon(motif, W, 512) - hom_density_graphon(motif, W, 1024)) <= 1e-3
    assert reference_density("K2", W) == pytest.approx(2 * math.exp(-1), rel=1e-12)


def test_induced_graphon_density_matches_graph():
    M = np.random.default_rng(3).random((9, 9))
    S = np.triu(M) + np.triu(M, 1).T
    W = induced_graphon(S)
    for motif in MOTIFS:
        assert hom_density_graphon(motif, W, 9) == hom_density_graph(motif, S)


def test_deterministic_table_constant():
    rows = convergence_table(ConstantGraphon(0.5), ["K2", "K3"], [8, 32, 128])
    assert all(r.gap == 0.0 and r.seed_count == 1 for r in rows)
    assert [r.motif for r in rows] == ["K2"] * 3 + ["K3"] * 3


def test_deterministic_gaps_decrease_smooth():
    sizes = [16, 32, 64, 128, 256, 512, 1024]
    for motif in MOTIFS:
        gaps = [r.gap for r in convergence_table(SmoothExpGraphon(1.0), [motif], sizes)]
        inversions = sum(b > a for a, b in zip(gaps, gaps[1:]))
        assert inversions <= 1
        assert gaps[-1] < gaps[0]


def test_stochastic_table_binomial():
    rows = convergence_table(ConstantGraphon(0.5), ["K2"], [64, 256, 1024], "stochastic", seeds=10)
    gaps = [r.gap for r in rows]
    assert gaps[0] > gaps[1] > gaps[2]
    for r in rows:
        # n diagonal draws count once and n(n-1)/2 off-diagonal draws count twice
        sigma = math.sqrt(0.25 * (2 * r.n**2 - r.n)) / r.n**2
        assert r.gap <= 5 * sigma
        assert abs(r.density_graph - 0.5) <= 5 * sigma / math.sqrt(r.seed_count)


def test_table_errors_and_csv(tmp_path):
    with pytest.raises(ConfigError):
        convergence_table(SBM2, ["K2"], [64, 32])
    with pytest.raises(ConfigError):
        convergence_table(SBM2, ["K5"], [64])
    rows = convergence_table(SBM2, ["K2", "C4"], [16, 32])
    write_convergence_csv(rows, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "motif,n,mode,seed_count,density_graph,density_graphon,gap"
    assert lines[1].startswith("K2,16,deterministic,1,0.5,0.5,")
