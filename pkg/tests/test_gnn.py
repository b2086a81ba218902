import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphonstab.errors import ConfigError, DivergenceError, ShapeError
from graphonstab.gnn import (BandBank, GnnParams, PolyBank, empirical_output_diff, gnn_forward,
                             mse_loss_and_grad, random_band_params, random_poly_params, train_mse,
                             wnn_forward, write_loss_csv)
from graphonstab.graphon import ConstantGraphon, SmoothExpGraphon
from graphonstab.sampling import (ConstantSignal, CosineSignal, deterministic_graph, sample_signal,
                                  stochastic_graph)
from graphonstab.stability import bound_thm2

S2 = np.array([[0.0, 1.0], [1.0, 0.0]])


def single(coeffs, nl="relu"):
    return GnnParams([PolyBank(np.array(coeffs, dtype=float).reshape(1, 1, -1))], nl)


def random_graph(rng, n):
    M = rng.random((n, n))
    return np.triu(M) + np.triu(M, 1).T


def test_forward_examples():
    x = np.array([0.2, 1.0, 0.0, 3.0])
    S = random_graph(np.random.default_rng(0), 4)
    assert np.array_equal(gnn_forward(single([1.0]), S, 4, x), x)
    assert np.array_equal(gnn_forward(single([1.0, 0.5], "abs"), S2, 1, np.array([1.0, 0.0])), [1.0, 0.5])
    params = random_poly_params(3, 5, 4, np.random.default_rng(1), project=False)
    assert not np.any(gnn_forward(params, S, 4, np.zeros(4)))


def test_forward_shape_errors():
    with pytest.raises(ShapeError):
        gnn_forward(single([1.0]), S2, 1, np.ones(3))
    with pytest.raises(ConfigError):
        GnnParams([PolyBank(np.ones((2, 1, 2))), PolyBank(np.ones((1, 3, 2)))])
    with pytest.raises(ConfigError):
        GnnParams([PolyBank(np.ones((1, 1, 2)))], "sigmoid")


def test_wnn_examples():
    out = wnn_forward(single([0.0, 1.0]), ConstantGraphon(0.3), ConstantSignal(1.0), N=256)
    assert np.allclose(out.values, 0.3, atol=1e-12)
    params = random_band_params(2, 4, 0.3, np.random.default_rng(2))
    assert not np.any(wnn_forward(params, SmoothExpGraphon(1.0), ConstantSignal(0.0), N=64).values)


@pytest.mark.parametrize("form", ["band", "poly"])
def test_wnn_matches_gnn_bitwise(form):
    rng = np.random.default_rng(3)
    params = random_band_params(2, 3, 0.3, rng) if form == "band" else random_poly_params(2, 3, 3, rng)
    W, X, N = SmoothExpGraphon(1.5), CosineSignal(1), 128
    y = gnn_forward(params, deterministic_graph(W, N), N, sample_signal(X, N))
    assert np.array_equal(wnn_forward(params, W, X, N).values, y)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 25), st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**32 - 1),
       st.sampled_from(["relu", "abs", "tanh"]), st.booleans())
def test_lipschitz_propagation(n, L, F, seed, nl, band):
    rng = np.random.default_rng(seed)
    params = random_band_params(L, F, 0.3, rng, nl) if band else random_poly_params(L, F, 3, rng, nl)
    S = random_graph(rng, n)
    x, z = rng.normal(size=n), rng.normal(size=n)
    diff = np.linalg.norm(gnn_forward(params, S, n, x) - gnn_forward(params, S, n, z))
    assert diff <= params.F ** (L - 1) * np.linalg.norm(x - z) * (1 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1))
def test_permutation_equivariance(n, seed):
    rng = np.random.default_rng(seed)
    params = random_poly_params(2, 3, 3, rng, "tanh")
    S, x = random_graph(rng, n), rng.normal(size=n)
    p = rng.permutation(n)
    y = gnn_forward(params, S, n, x)
    yp = gnn_forward(params, S[np.ix_(p, p)], n, x[p])
    assert np.allclose(yp, y[p], atol=1e-12)


def test_positive_homogeneity():
    rng = np.random.default_rng(4)
    params = random_band_params(2, 4, 0.3, rng)
    S = random_graph(rng, 20)
    x = rng.normal(size=20)
    assert np.allclose(gnn_forward(params, S, 20, 2.5 * x), 2.5 * gnn_forward(params, S, 20, x))


def test_empirical_diff_examples():
    rng = np.random.default_rng(5)
    params = random_band_params(2, 4, 0.3, rng)
    G = deterministic_graph(SmoothExpGraphon(1.0), 32)
    x = sample_signal(CosineSignal(1), 32)
    d = empirical_output_diff(params, G, G, 32, x)
    assert d.l2 == 0 and d.rel == 0
    with pytest.raises(ShapeError):
        empirical_output_diff(params, G, deterministic_graph(SmoothExpGraphon(1.0), 16), 32, x)


def test_constant_pair_positive_and_bounded():
    params = random_band_params(2, 4, 0.3, np.random.default_rng(6))
    n = 256
    G, Gp = deterministic_graph(ConstantGraphon(0.5), n), deterministic_graph(ConstantGraphon(0.6), n)
    x = sample_signal(ConstantSignal(1.0), n)
    d = empirical_output_diff(params, G, Gp, n, x)
    assert d.l2 > 0
    assert d.l2_graphon == pytest.approx(d.l2 / 16)
    # n_c = 1 and delta_c = 0.5 for the pair of rank-one spectra
    bound = bound_thm2(params.L, params.F, params.A2(), 1, 0.5, 0.1, 0.0, n, np.linalg.norm(x))
    assert d.l2 <= bound


def _numeric_grad(params, P, X, T, h=1e-5):
    out = []
    for bank in params.layers:
        g = np.zeros_like(bank.coeffs)
        for idx in np.ndindex(*bank.coeffs.shape):
            old = bank.coeffs[idx]
            bank.coeffs[idx] = old + h
            up, _ = mse_loss_and_grad(params, P, X, T)
            bank.coeffs[idx] = old - h
            down, _ = mse_loss_and_grad(params, P, X, T)
            bank.coeffs[idx] = old
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


@pytest.mark.parametrize("nl", ["relu", "abs", "tanh"])
def test_gradient_matches_finite_differences(nl):
    rng = np.random.default_rng(7)
    n = 32
    P = random_graph(rng, n) / n
    params = random_poly_params(2, 4, 3, rng, nl, project=False)
    X = rng.normal(size=(3, n, 1))
    T = rng.normal(size=(3, n, 1))
    _, grads = mse_loss_and_grad(params, P, X, T)
    numeric = _numeric_grad(params, P, X, T)
    for a, b in zip(grads, numeric):
        assert np.allclose(a, b, rtol=1e-5, atol=1e-9)


def test_train_zero_steps_and_monotone_decrease(tmp_path):
    rng = np.random.default_rng(8)
    n = 24
    S = random_graph(rng, n)
    xs = [np.abs(rng.normal(size=n)) for _ in range(10)]
    samples = [(x, 0.7 * S @ x / n) for x in xs]
    params = GnnParams([PolyBank(np.array([[[0.1, 0.1]]]))], "abs")
    same = train_mse(params, samples, S, n, 0, 0.1)
    assert np.array_equal(same.layers[0].coeffs, params.layers[0].coeffs)
    trained = train_mse(params, samples, S, n, 200, 0.5)
    trace = np.array(trained.loss_trace)
    assert trace.size == 201
    assert np.all(np.diff(trace) <= 1e-15) and trace[-1] < 1e-3 * trace[0]
    assert trained.layers[0].coeffs[0, 0, 1] == pytest.approx(0.7, abs=0.05)
    # the input parameters are untouched
    assert params.layers[0].coeffs[0, 0, 0] == 0.1
    write_loss_csv(trace, tmp_path / "loss.csv")
    assert (tmp_path / "loss.csv").read_text().splitlines()[0] == "step,loss"


def test_train_divergence_and_form():
    rng = np.random.default_rng(9)
    S = random_graph(rng, 10)
    samples = [(rng.normal(size=10), rng.normal(size=10))]
    with pytest.raises(DivergenceError) as info:
        train_mse(random_poly_params(2, 4, 3, rng, "abs"), samples, S, 1, 100, 1e6)
    assert info.value.step >= 0
    with pytest.raises(ConfigError):
        train_mse(random_band_params(2, 2, 0.3, rng), samples, S, 10, 1, 0.1)


def test_params_json_roundtrip(tmp_path):
    rng = np.random.default_rng(10)
    for params in (random_band_params(2, 4, 0.3, rng, "abs"), random_poly_params(3, 2, 5, rng, "tanh")):
        params.save(tmp_path / "p.json")
        back = GnnParams.load(tmp_path / "p.json")
        assert back.to_config() == params.to_config()
        S = random_graph(rng, 8)
        x = rng.normal(size=8)
        assert np.array_equal(gnn_forward(back, S, 8, x), gnn_forward(params, S, 8, x))


def test_random_band_params_satisfy_as1():
    params = random_band_params(3, 8, 0.25, np.random.default_rng(11), eta=1e-3)
    assert params.sup_response() <= 1 - 1e-3 + 1e-15
    assert params.band_deviation(0.25) == 0.0
    assert params.widths == [1, 8, 8, 1] and params.F == 8 and params.form == "band"
    assert isinstance(params.layers[0], BandBank)


def test_stochastic_pair_runs():
    params = random_band_params(2, 2, 0.3, np.random.default_rng(12))
    G = stochastic_graph(SmoothExpGraphon(1.0), 40, 1)
    x = sample_signal(CosineSignal(1), 40)
    assert np.isfinite(gnn_forward(params, G, 40, x)).all()
