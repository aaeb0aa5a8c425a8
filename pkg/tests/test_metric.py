import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_curved_sq, random_metric
from curvedlabel.errors import DimensionError, MetricValidationError
from curvedlabel.metric import (
    Metric,
    class_pair_sq_distance,
    curved_sq_distance,
    distance_report,
    euclidean_sq_distance,
    identity_metric,
    load_metric,
    metric_from_array,
    one_hot,
    save_metric_csv,
    save_metric_json,
)


def test_identity_metric():
    np.testing.assert_array_equal(identity_metric(3).g, np.eye(3))
    np.testing.assert_array_equal(identity_metric(2).g, [[1, 0], [0, 1]])
    with pytest.raises(DimensionError):
        identity_metric(1)


@pytest.mark.parametrize(
    "g, err",
    [
        ([[1, 0.2], [0.3, 1]], MetricValidationError),
        ([[1, 0.2], [0.2, 0.9]], MetricValidationError),
        ([[1, -0.1], [-0.1, 1]], MetricValidationError),
        ([[1, np.nan], [np.nan, 1]], MetricValidationError),
        ([[1, 0, 0]], DimensionError),
    ],
)
def test_metric_rejects_invalid(g, err):
    with pytest.raises(err):
        Metric(np.array(g, dtype=float))


def test_metric_is_immutable_copy():
    src = np.eye(3)
    m = Metric(src)
    src[0, 1] = 5.0
    assert m.g[0, 1] == 0.0
    with pytest.raises(ValueError):
        m.g[0, 1] = 1.0


def test_indefinite_metric_accepted():
    g = np.full((3, 3), 3.0)
    np.fill_diagonal(g, 1.0)
    m = Metric(g)
    assert m.min_eigenvalue < 0


def test_euclidean_examples():
    assert euclidean_sq_distance(one_hot(0, 3), one_hot(1, 3)) == 2.0
    v = np.array([0.1, 0.7, 0.2])
    assert euclidean_sq_distance(v, v) == 0.0
    assert euclidean_sq_distance(one_hot(0, 3), [0.5, 0.3, 0.2]) == pytest.approx(0.38, abs=1e-15)
    with pytest.raises(DimensionError):
        euclidean_sq_distance([1, 0], [1, 0, 0])


def test_curved_examples(metric3):
    y, yhat = one_hot(0, 3), np.array([0.5, 0.3, 0.2])
    expected = oracle_curved_sq(metric3.g, y, yhat)
    assert expected == pytest.approx(0.648, abs=1e-15)
    assert curved_sq_distance(metric3, y, yhat) == pytest.approx(expected, abs=1e-15)
    assert curved_sq_distance(metric3, yhat, yhat) == 0.0
    with pytest.raises(DimensionError):
        curved_sq_distance(metric3, [1, 0], [0, 1])


def test_class_pair_examples(metric3):
    assert class_pair_sq_distance(metric3, 1, 1) == 0.0
    assert class_pair_sq_distance(identity_metric(3), 0, 2) == 2.0
    m = Metric(np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert class_pair_sq_distance(m, 0, 1) == 3.0
    with pytest.raises(IndexError):
        class_pair_sq_distance(metric3, 0, 3)


def test_distance_report():
    np.testing.assert_allclose(distance_report(identity_metric(2)),
                               [[0, math.sqrt(2)], [math.sqrt(2), 0]], atol=1e-15)
    m = Metric(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert distance_report(m)[0, 1] == 2.0


def test_distance_report_symmetric(rng):
    for k in (2, 5, 9):
        table = distance_report(random_metric(rng, k))
        np.testing.assert_array_equal(table, table.T)
        assert np.all(np.diag(table) == 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_flat_reduction(k, seed):
    rng = np.random.default_rng(seed)
    y, yhat = rng.normal(size=k), rng.normal(size=k)
    assert curved_sq_distance(identity_metric(k), y, yhat) == pytest.approx(
        euclidean_sq_distance(y, yhat), abs=1e-12
    )


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_argument_symmetry_and_nonnegativity(k, seed):
    rng = np.random.default_rng(seed)
    m = random_metric(rng, k, high=3.0)
    y, yhat = rng.normal(size=k), rng.normal(size=k)
    d1 = curved_sq_distance(m, y, yhat)
    assert d1 == curved_sq_distance(m, yhat, y)
    assert d1 >= 0


def test_one_hot_consistency(rng):
    for _ in range(200):
        k = int(rng.integers(2, 10))
        m = random_metric(rng, k)
        a, b = rng.integers(0, k, size=2)
        assert curved_sq_distance(m, one_hot(a, k), one_hot(b, k)) == class_pair_sq_distance(m, a, b)


def test_monotone_ordering(rng):
    for _ in range(200):
        m = random_metric(rng, 4)
        a, b, c = 0, 1, 2
        if m.g[a, b] < m.g[a, c]:
            assert class_pair_sq_distance(m, a, b) < class_pair_sq_distance(m, a, c)


def test_curved_accepts_arbitrary_vectors(metric3):
    # distances are not restricted to the simplex
    assert curved_sq_distance(metric3, [2.0, -1.0, 0.0], [0.0, 0.0, 0.0]) == pytest.approx(
        oracle_curved_sq(metric3.g, [2.0, -1.0, 0.0], [0.0, 0.0, 0.0])
    )


# --- file formats -----------------------------------------------------------


def test_csv_round_trip_exact(tmp_path, rng):
    m = random_metric(rng, 6)
    save_metric_csv(m, tmp_path / "g.csv")
    assert load_metric(tmp_path / "g.csv") == m


def test_json_round_trip_exact(tmp_path, rng):
    m = Metric(random_metric(rng, 5).g, provenance={"source": "test", "note": 1})
    save_metric_json(m, tmp_path / "g.json")
    back = load_metric(tmp_path / "g.json")
    assert back == m
    assert back.provenance == {"source": "test", "note": 1}
    doc = json.loads((tmp_path / "g.json").read_text())
    assert doc["k"] == 5


def test_file_import_tolerance(tmp_path):
    g = np.array([[1.0, 0.3], [0.3 + 5e-13, 1.0 - 5e-13]])
    m = metric_from_array(g)
    np.testing.assert_array_equal(m.g, m.g.T)
    assert m.g[1, 1] == 1.0
    with pytest.raises(MetricValidationError):
        metric_from_array(np.array([[1.0, 0.3], [0.31, 1.0]]))


def test_csv_ragged_rejected(tmp_path):
    (tmp_path / "bad.csv").write_text("1,0\n0\n")
    with pytest.raises(ValueError):
        load_metric(tmp_path / "bad.csv")

