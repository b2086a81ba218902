import numpy as np
import pytest

from graphonstab.errors import ConfigError
from graphonstab.graphon import ConstantGraphon, SBMGraphon
from graphonstab.ratings import (build_correlation_graph, correlation_weights,
                                 generate_synthetic_ratings, rating_task, read_ratings_csv,
                                 split_rows, write_ratings_csv)

SBM2 = SBMGraphon((0.5,), [[0.8, 0.2], [0.2, 0.8]])


def test_duplicate_columns_weight_one():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 6, 50).astype(float)
    R = np.column_stack([a, a, rng.integers(0, 6, 50)])
    G, constant = build_correlation_graph(R)
    assert G.gso[0, 1] == pytest.approx(1.0)
    assert np.all(np.diag(G.gso) == 0) and not constant.any()
    assert G.gso.min() >= 0 and G.gso.max() <= 1


def test_orthogonal_columns_weight_zero():
    R = np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]]) + 2.0
    cw = correlation_weights(R)
    assert cw.weights[0, 1] == pytest.approx(0.0, abs=1e-15)


def test_negative_correlations_clipped_and_constant_flagged():
    R = np.array([[1.0, 5.0, 3.0], [2.0, 4.0, 3.0], [3.0, 3.0, 3.0], [4.0, 1.0, 3.0]])
    with pytest.warns(RuntimeWarning):
        G, constant = build_correlation_graph(R)
    assert constant.tolist() == [False, False, True]
    assert G.gso[0, 1] == 0.0 and not np.any(G.gso[2])
    with pytest.raises(ConfigError):
        build_correlation_graph(np.ones((4, 1)))


def test_co_rated_variant():
    R = np.array([[5.0, 4.0], [1.0, 2.0], [0.0, 5.0], [3.0, 0.0], [4.0, 4.0]])
    cw = correlation_weights(R, co_rated=True)
    both = np.array([0, 1, 4])
    expected = np.corrcoef(R[both, 0], R[both, 1])[0, 1]
    assert cw.weights[0, 1] == pytest.approx(expected)


def test_synthetic_ratings_repeatable_and_valid():
    a = generate_synthetic_ratings(SBM2, 30, 12, seed=4)
    b = generate_synthetic_ratings(SBM2, 30, 12, seed=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, generate_synthetic_ratings(SBM2, 30, 12, seed=5))
    assert set(np.unique(a)) <= {0, 1, 2, 3, 4, 5}


def test_missingness_rate():
    U, M, rate = 400, 50, 0.2
    R = generate_synthetic_ratings(SBM2, U, M, seed=1, missing_rate=rate)
    sigma = np.sqrt(rate * (1 - rate) / (U * M))
    assert abs((R == 0).mean() - rate) <= 3 * sigma


def test_block_structure_recovered():
    within, across = [], []
    for seed in range(20):
        G, _ = build_correlation_graph(generate_synthetic_ratings(SBM2, 200, 20, seed))
        S = G.gso
        mask = ~np.eye(10, dtype=bool)
        within.append(0.5 * (S[:10, :10][mask].mean() + S[10:, 10:][mask].mean()))
        across.append(S[:10, 10:].mean())
    assert np.mean(within) > np.mean(across)
    assert all(w > a for w, a in zip(within, across))


def test_zero_graphon_has_no_structure():
    # compared before normalization, which would otherwise map every maximum to 1
    for seed in range(20):
        null = correlation_weights(generate_synthetic_ratings(ConstantGraphon(0.0), 500, 20, seed)).weights
        block = correlation_weights(generate_synthetic_ratings(SBM2, 500, 20, seed)).weights
        mask = ~np.eye(10, dtype=bool)
        assert null.max() < block[:10, :10][mask].mean()


def test_ratings_csv_roundtrip(tmp_path):
    R = generate_synthetic_ratings(SBM2, 10, 6, seed=2)
    write_ratings_csv(R, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().startswith("user,item,rating\n")
    back = read_ratings_csv(tmp_path / "r.csv", shape=R.shape)
    assert np.array_equal(back, R)
    (tmp_path / "bad.csv").write_text("u,i,r\n1,1,3\n")
    with pytest.raises(ConfigError):
        read_ratings_csv(tmp_path / "bad.csv")
    (tmp_path / "bad2.csv").write_text("user,item,rating\n0,1,3\n")
    with pytest.raises(ConfigError):
        read_ratings_csv(tmp_path / "bad2.csv")


def test_rating_task_and_split():
    R = generate_synthetic_ratings(SBM2, 100, 8, seed=3)
    task = rating_task(R, target=2)
    assert np.all(task.inputs[:, 2] == 0)
    assert np.array_equal(task.targets[:, 2], R[task.users, 2])
    assert not np.any(np.delete(task.targets, 2, axis=1))
    train, test = split_rows(task.users.size, seed=0)
    assert len(test) == round(0.1 * task.users.size)
    assert set(train).isdisjoint(test) and len(train) + len(test) == task.users.size
