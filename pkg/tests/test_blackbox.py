import numpy as np
import pytest

from ruleseeker import (
    ConditioningInfeasibleError,
    ContractViolation,
    Distribution,
    Instance,
    constant_model,
    dictator_model,
    monomial_model,
    parity_model,
    random_tree_model,
    sample_conditioned,
    sample_oracle,
    train_builtin,
)
from ruleseeker.blackbox import build_oracle, parse_model_spec
from ruleseeker.core import covers, restrict
from ruleseeker.data import BinaryDataset


def I(bits):
    return Instance.from_bitstring(bits)


def make_dataset(X, y):
    X = np.array(X, dtype=np.uint8)
    y = np.array(y, dtype=np.uint8)
    n = X.shape[0]
    return BinaryDataset(
        dimension=X.shape[1],
        instances=X,
        labels=y,
        feature_names=tuple(f"f{j}" for j in range(X.shape[1])),
        train_indices=np.arange(n, dtype=np.int64),
        test_indices=np.zeros(0, dtype=np.int64),
    )


def test_constant_model_batch():
    h = constant_model(4, 1)
    assert h.predict([I("0000"), I("1111"), I("0101")]) == [1, 1, 1]


def test_monomial_model_definition():
    h = monomial_model(3, [0, 2])
    assert h.predict([I("101")]) == [1]
    assert h.predict([I("011")]) == [0]


def test_parity_and_dictator():
    assert parity_model(3).predict([I("101"), I("111")]) == [0, 1]
    assert dictator_model(3, 1).predict([I("010"), I("101")]) == [1, 0]


def test_query_count_exact_under_batching():
    h = parity_model(4)
    h.predict([I("0000")])
    h.predict([I("0001"), I("0011")])
    h.predict_matrix(np.zeros((5, 4), dtype=np.uint8))
    assert h.query_count == 8


def test_predict_dimension_check():
    h = constant_model(3, 0)
    with pytest.raises(ContractViolation):
        h.predict([I("10")])


def test_random_tree_depth_and_determinism():
    a = random_tree_model(20, 4, seed=5)
    b = random_tree_model(20, 4, seed=5)
    Z = np.random.default_rng(0).integers(0, 2, size=(50, 20), dtype=np.uint8)
    assert np.array_equal(a.predict_matrix(Z), b.predict_matrix(Z))
    assert set(np.unique(a.predict_matrix(Z))) <= {0, 1}


def test_logistic_separable_training_accuracy_one():
    rng = np.random.default_rng(1)
    X = rng.integers(0, 2, size=(40, 4), dtype=np.uint8)
    y = X[:, 0]  # linearly separable
    h = train_builtin(make_dataset(X, y), "logistic")
    assert h.train_accuracy == 1.0


def test_logistic_cannot_beat_linear_bound_on_xor():
    X = [[0, 0], [0, 1], [1, 0], [1, 1]]
    y = [0, 1, 1, 0]
    # brute-force the best linear threshold on the 4 points
    best = 0.0
    grid = np.linspace(-3, 3, 13)
    for w0 in grid:
        for w1 in grid:
            for b in grid:
                preds = [1 if w0 * a + w1 * c + b >= 0 else 0 for a, c in X]
                best = max(best, sum(p == t for p, t in zip(preds, y)) / 4)
    assert best == 0.75
    h = train_builtin(make_dataset(X, y), "logistic")
    assert h.train_accuracy <= best


def test_single_class_data_gives_constant_with_warning():
    X = [[0, 1], [1, 0], [1, 1]]
    h = train_builtin(make_dataset(X, [1, 1, 1]), "logistic")
    assert h.warning is not None
    assert h.predict([I("00"), I("11")]) == [1, 1]


def test_mlp_deterministic_given_seed():
    rng = np.random.default_rng(2)
    X = rng.integers(0, 2, size=(60, 5), dtype=np.uint8)
    y = (X[:, 0] ^ X[:, 1]).astype(np.uint8)
    ds = make_dataset(X, y)
    a = train_builtin(ds, "mlp:8", seed=3)
    b = train_builtin(ds, "mlp:8", seed=3)
    Z = rng.integers(0, 2, size=(40, 5), dtype=np.uint8)
    assert np.array_equal(a.predict_matrix(Z), b.predict_matrix(Z))


def test_tree_learns_conjunction():
    rng = np.random.default_rng(4)
    X = rng.integers(0, 2, size=(80, 4), dtype=np.uint8)
    y = (X[:, 0] & X[:, 2]).astype(np.uint8)
    h = train_builtin(make_dataset(X, y), "tree:3")
    assert h.train_accuracy == 1.0


def test_parse_model_spec():
    assert parse_model_spec("mlp:32") == {"kind": "mlp", "hidden": 32}
    assert parse_model_spec("tree") == {"kind": "tree", "depth": 4}
    with pytest.raises(ContractViolation):
        parse_model_spec("svm")


def test_build_oracle_synthetic_specs():
    assert build_oracle("builtin:parity", dimension=5).predict([I("11111")]) == [1]
    assert build_oracle("builtin:monomial:0,2", dimension=3).predict([I("101")]) == [1]
    assert build_oracle("builtin:constant:0", dimension=2).predict([I("11")]) == [0]
    with pytest.raises(ContractViolation):
        build_oracle("weird:thing")


# -- sampling ------------------------------------------------------------------


def test_sample_oracle_empty():
    h = constant_model(3, 1)
    assert sample_oracle(h, Distribution.uniform(3), 0) == []
    assert h.query_count == 0


def test_sample_oracle_seeded_determinism():
    h = parity_model(6)
    dist = Distribution.uniform(6, seed=9)
    a = sample_oracle(h, dist, 20)
    b = sample_oracle(h, dist, 20)
    assert a == b


def test_sample_oracle_constant_labels():
    h = constant_model(4, 1)
    samples = sample_oracle(h, Distribution.uniform(4, seed=1), 5)
    assert len(samples) == 5
    assert all(s.label == 1 for s in samples)
    assert h.query_count == 5


def test_sample_conditioned_full_set_returns_anchor_copies():
    h = parity_model(4)
    x = I("1010")
    fx = h.predict([x])[0]
    samples = sample_conditioned(h, Distribution.uniform(4, seed=2), x, range(4), 6)
    assert all(s.instance == x for s in samples)
    assert all(s.label == fx for s in samples)


def test_sample_conditioned_empty_set_matches_unconditioned():
    h = parity_model(5)
    dist = Distribution.uniform(5, seed=7)
    a = sample_conditioned(h, dist, I("11111"), [], 15, seed=123)
    b = sample_oracle(h, dist, 15, seed=123)
    assert a == b


def test_sample_conditioned_postcondition():
    h = parity_model(8)
    dist = Distribution.uniform(8, seed=3)
    x = I("10110100")
    S = [1, 3, 4]
    samples = sample_conditioned(h, dist, x, S, 40)
    p = restrict(x, S)
    assert all(covers(p, s.instance) for s in samples)


def test_sample_conditioned_free_marginals_near_half():
    h = constant_model(10, 1)
    dist = Distribution.uniform(10, seed=11)
    x = I("1111100000")
    S = [0, 1, 2]
    m = 4000
    samples = sample_conditioned(h, dist, x, S, m)
    Z = np.array([s.instance.bits for s in samples])
    sigma = 0.5 / np.sqrt(m)
    for j in range(10):
        if j in S:
            assert (Z[:, j] == x.bits[j]).all()
        else:
            assert abs(Z[:, j].mean() - 0.5) <= 3 * sigma + 1e-12


def test_product_bernoulli_extremes():
    dist = Distribution.product_bernoulli([0.0, 1.0, 0.5], seed=5)
    Z = dist.sample_matrix(50)
    assert (Z[:, 0] == 0).all()
    assert (Z[:, 1] == 1).all()


def test_empirical_conditioning_and_infeasibility():
    rows = np.array([[1, 0, 1], [1, 1, 1], [0, 0, 0]], dtype=np.uint8)
    dist = Distribution.empirical(rows, seed=0)
    h = constant_model(3, 1)
    x = I("101")
    samples = sample_conditioned(h, dist, x, [0, 2], 10)
    for s in samples:
        assert s.instance.bits[0] == 1 and s.instance.bits[2] == 1
    with pytest.raises(ConditioningInfeasibleError) as err:
        sample_conditioned(h, dist, I("010"), [0, 1, 2], 5)
    assert err.value.coverage == 0


def test_hamming_ball_stays_in_ball():
    center = I("11110000")
    dist = Distribution.hamming_ball(center, radius=2, seed=4)
    Z = dist.sample_matrix(200)
    dists = (Z != np.array(center.bits)).sum(axis=1)
    assert dists.max() <= 2
    with pytest.raises(ContractViolation):
        dist.sample_conditioned_matrix(center.to_array(), [0], 5)


def test_oracle_is_pure_function_replay():
    h = random_tree_model(12, 4, seed=8)
    Z = np.random.default_rng(1).integers(0, 2, size=(30, 12), dtype=np.uint8)
    assert np.array_equal(h.predict_matrix(Z), h.predict_matrix(Z))
