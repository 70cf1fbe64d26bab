import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nuq.errors import InputError
from nuq.kernels import KernelSpec
from nuq.knn import IndexConfig
from nuq.model import (
    DENSITY_FLOOR,
    EPISTEMIC_COEF,
    ClassProbabilities,
    fit,
    make_dataset,
)


def small_model(points, labels, kind="gaussian", h=1.0, k=None, density="kde", **kwargs):
    dataset = make_dataset(np.asarray(points, dtype=np.float32), labels)
    cfg = IndexConfig(neighbors=k if k is not None else dataset.n)
    return fit(dataset, KernelSpec(kind, h, dataset.dim), cfg, density_mode=density, **kwargs)


def nw_oracle(points, labels, num_classes, x, kind, h):
    """Independent full-sum conditional probabilities, straight from the formula."""
    points = np.asarray(points, dtype=np.float32).astype(np.float64)
    z = (points - np.asarray(x, dtype=np.float64)) / h
    if kind == "gaussian":
        per_dim = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    elif kind == "sigmoid":
        per_dim = (2 / math.pi) / (np.exp(-z) + np.exp(z))
    else:
        per_dim = 1.0 / (np.exp(-z) + 2.0 + np.exp(z))
    w = per_dim.prod(axis=1)
    sums = np.array([w[np.asarray(labels) == c].sum() for c in range(num_classes)])
    return sums / sums.sum()


def test_single_training_point_prob_one():
    model = small_model([[0.0]], [0], h=1.0)
    cp = model.conditional_probs([0.4])
    assert cp.probs.tolist() == [1.0]
    assert model.predict([0.4]) == 0


def test_symmetric_pair_gives_half():
    model = small_model([[-1.0], [1.0]], [0, 1])
    cp = model.conditional_probs([0.0])
    assert cp.probs == pytest.approx([0.5, 0.5], abs=1e-15)
    assert model.predict([0.0]) == 0  # tie goes to the lowest class


def test_three_point_oracle_value():
    pts = [[-1.0], [0.0], [2.0]]
    labels = [0, 0, 1]
    model = small_model(pts, labels)
    cp = model.conditional_probs([0.5])
    expected = nw_oracle(pts, labels, 2, [0.5], "gaussian", 1.0)
    assert cp.probs == pytest.approx(expected, rel=1e-12)
    # full-sum oracle: (K(1.5) + K(0.5)) / (K(1.5) + K(0.5) + K(1.5))
    assert expected[0] == pytest.approx(0.78806, abs=5e-5)


def test_out_of_support_uniform_and_flagged():
    model = small_model([[0.0], [0.1], [0.2]], [0, 1, 2])
    report = model.uncertainties([1e6])
    assert report.out_of_support
    assert report.probs.probs == pytest.approx([1 / 3] * 3)
    assert report.predicted_class == 0
    assert math.isinf(report.epistemic) and math.isinf(report.total)


def test_tau_examples():
    rng = np.random.default_rng(0)
    model = small_model(rng.standard_normal((100, 1)), rng.integers(0, 2, 100))
    one_hot = ClassProbabilities(probs=np.array([1.0, 0.0]), weight_sum=1.0)
    assert model.tau(one_hot, 0.25) == 0.0
    assert model.tau(one_hot, 0.0) == 0.0  # zero variance wins over zero density
    half = ClassProbabilities(probs=np.array([0.5, 0.5]), weight_sum=1.0)
    assert model.tau(half, 0.0) == math.inf
    # N = 100, h = 1, d = 1, gaussian, p = 0.25
    expected = math.sqrt(0.2820947917738781 * 0.25 / (100 * 0.25))
    assert model.tau(half, 0.25) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.053113, abs=5e-7)


def test_uncertainty_identities_and_frozen_value():
    rng = np.random.default_rng(1)
    model = small_model(rng.standard_normal((100, 1)), rng.integers(0, 2, 100))
    half = ClassProbabilities(probs=np.array([0.5, 0.5]), weight_sum=1.0)
    tau = model.tau(half, 0.25)
    assert EPISTEMIC_COEF * tau == pytest.approx(0.0847554, abs=5e-7)
    report = model.uncertainties([0.2])
    assert report.total == report.aleatoric + report.epistemic
    assert report.epistemic == EPISTEMIC_COEF * report.tau
    assert 0.0 <= report.aleatoric <= 0.5


def test_one_hot_region_all_zero():
    pts = np.array([[0.0], [0.1], [-0.1]], dtype=np.float32)
    model = small_model(pts, [1, 1, 1])
    report = model.uncertainties([0.0])
    assert report.aleatoric == 0.0
    assert report.epistemic == 0.0
    assert report.total == 0.0
    assert report.predicted_class == 1


def test_single_class_dataset():
    model = small_model([[0.0], [1.0]], [0, 0])
    report = model.uncertainties([0.5])
    assert report.predicted_class == 0
    assert report.aleatoric == 0.0


def reports_equal(a, b):
    return (
        a.predicted_class == b.predicted_class
        and np.array_equal(a.probs.probs, b.probs.probs)
        and a.probs.weight_sum == b.probs.weight_sum
        and a.aleatoric == b.aleatoric
        and a.epistemic == b.epistemic
        and a.total == b.total
        and a.tau == b.tau
        and a.density == b.density
        and a.out_of_support == b.out_of_support
    )


def test_score_batch_matches_loop_exactly():
    rng = np.random.default_rng(2)
    model = small_model(rng.standard_normal((80, 3)), rng.integers(0, 3, 80), k=16)
    queries = rng.standard_normal((50, 3))
    batch = model.score_batch(queries)
    for row, rep in zip(queries, batch):
        assert reports_equal(model.uncertainties(row), rep)
    assert model.score_batch(np.zeros((0, 3))) == []
    lone = model.score_batch(queries[:1])
    assert len(lone) == 1 and reports_equal(lone[0], model.uncertainties(queries[0]))


def test_training_row_permutation_invariance():
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((60, 2)).astype(np.float32)
    labels = rng.integers(0, 3, 60)
    model_a = small_model(pts, labels, k=60)
    perm = rng.permutation(60)
    model_b = small_model(pts[perm], labels[perm], k=60)
    for q in rng.standard_normal((20, 2)):
        ra, rb = model_a.uncertainties(q), model_b.uncertainties(q)
        assert np.array_equal(ra.probs.probs, rb.probs.probs)
        assert ra.aleatoric == rb.aleatoric
        assert ra.epistemic == rb.epistemic
        assert ra.density == rb.density


def test_weight_scale_invariance_of_probs():
    rng = np.random.default_rng(4)
    model = small_model(rng.standard_normal((30, 2)), rng.integers(0, 2, 30))
    ids = np.arange(30)
    w = rng.random(30)
    base = model._probs_from_weights(ids, w)
    scaled = model._probs_from_weights(ids, 3.0 * w)
    assert scaled.probs == pytest.approx(base.probs, rel=1e-15)
    assert np.argmax(scaled.probs) == np.argmax(base.probs)


def test_full_sum_truncation_consistency():
    rng = np.random.default_rng(5)
    for kind in ("gaussian", "sigmoid", "logistic"):
        pts = rng.standard_normal((120, 4)).astype(np.float32)
        labels = rng.integers(0, 3, 120)
        model = small_model(pts, labels, kind=kind, h=0.8, k=120)
        for q in rng.standard_normal((5, 4)):
            cp = model.conditional_probs(q)
            oracle = nw_oracle(pts, labels, 3, q, kind, 0.8)
            assert cp.probs == pytest.approx(oracle, rel=1e-12)


def test_probs_sum_to_one_property():
    rng = np.random.default_rng(6)
    model = small_model(rng.standard_normal((200, 2)), rng.integers(0, 4, 200), h=0.5, k=32)
    for q in rng.standard_normal((100, 2)) * 2:
        cp = model.conditional_probs(q)
        if cp.weight_sum > 0:
            assert abs(cp.probs.sum() - 1.0) < 1e-9
            assert np.all(cp.probs >= 0) and np.all(cp.probs <= 1)


def test_epistemic_shrinks_with_sample_size():
    grid = np.linspace(-1.5, 1.5, 40)[:, None]
    means = []
    for n in (500, 2000, 8000):
        rng = np.random.default_rng(1000 + n)
        pts = rng.standard_normal((n, 1))
        labels = rng.integers(0, 2, n)
        model = small_model(pts, labels, h=0.3, k=n)
        values = [model.uncertainties(x).epistemic for x in grid]
        means.append(np.mean(values))
    assert means[0] > means[1] > means[2]


@given(
    p=st.floats(min_value=0.5, max_value=1.0 - 1e-9),
    d1=st.floats(min_value=1e-6, max_value=1e3),
    d2=st.floats(min_value=1e-6, max_value=1e3),
)
@settings(max_examples=200)
def test_tau_strictly_decreasing_in_density(p, d1, d2):
    model = small_model([[0.0], [1.0]], [0, 1])
    probs = ClassProbabilities(probs=np.array([p, 1 - p]), weight_sum=1.0)
    lo, hi = sorted((d1, d2))
    if hi > lo * (1 + 1e-12):  # below one ulp of separation sqrt can tie
        assert model.tau(probs, lo) > model.tau(probs, hi)
    else:
        assert model.tau(probs, lo) >= model.tau(probs, hi)


def test_binary_two_readings_identical():
    # the binary form min(eta, 1 - eta) applied to eta = prob_1 must match
    # the multiclass form min_c(1 - prob_c); the normalization leaves the
    # pair summing to 1 only up to float epsilon
    rng = np.random.default_rng(7)
    model = small_model(rng.standard_normal((50, 1)), rng.integers(0, 2, 50))
    for q in rng.standard_normal(20):
        cp = model.conditional_probs([q])
        eta = float(cp.probs[1])
        binary = min(eta, 1 - eta)
        multi = float(np.min(1.0 - cp.probs))
        assert binary == pytest.approx(multi, abs=1e-15)
        assert model.uncertainties([q]).aleatoric == pytest.approx(binary, abs=1e-15)


def test_dimension_and_finiteness_errors():
    model = small_model([[0.0, 0.0]], [0])
    with pytest.raises(InputError):
        model.uncertainties([1.0])
    with pytest.raises(InputError):
        model.uncertainties([np.nan, 0.0])
    with pytest.raises(InputError):
        model.score_batch(np.zeros((2, 3)))
    with pytest.raises(InputError):
        fit(make_dataset(np.zeros((2, 2), dtype=np.float32)),
            KernelSpec("gaussian", 1.0, 2))


def test_gmm_mode_far_query_still_out_of_support():
    rng = np.random.default_rng(8)
    model = small_model(rng.standard_normal((40, 2)), rng.integers(0, 2, 40),
                        density="gmm", ridge=1e-6)
    report = model.uncertainties([500.0, 500.0])
    assert report.out_of_support
    assert math.isinf(report.epistemic)


def test_density_floor_constant():
    assert DENSITY_FLOOR == 1e-300


@pytest.mark.parametrize("backend", ["exact", "hnsw"])
def test_concurrent_scoring_matches_sequential(backend):
    from concurrent.futures import ThreadPoolExecutor

    rng = np.random.default_rng(13)
    dataset = make_dataset(rng.standard_normal((200, 4)).astype(np.float32),
                           rng.integers(0, 3, 200))
    model = fit(dataset, KernelSpec("gaussian", 1.0, 4),
                IndexConfig(neighbors=16, backend=backend))
    queries = rng.standard_normal((64, 4))
    sequential = [model.uncertainties(q) for q in queries]
    with ThreadPoolExecutor(max_workers=8) as pool:
        threaded = list(pool.map(model.uncertainties, queries))
    for a, b in zip(sequential, threaded):
        assert reports_equal(a, b)
