import numpy as np
import pytest

from rampcast.core import ClassScheme, DataError, RampClass
from rampcast.imbalance import (
    EasyConfig, EnsembleModel, balanced_subsets, fit_easy_ensemble, fit_easy_ensemble_arrays,
    fit_majority_baseline, fit_transition_baseline, fit_transition_pairs, majority_class,
    predict_baseline, predict_baseline_codes, predict_easy,
)
from rampcast.learners import TreeConfig, fit_adaboost
from rampcast.preprocess import WindowSpec, extract_instances
from rampcast.synth import SynthConfig, generate

TREE = TreeConfig(max_depth=3, criterion="gini", min_samples_split=0.05, min_samples_leaf=0.02)


def imbalanced(rng, n_major=880, n_minor=(60, 60)):
    y = np.concatenate([np.full(n_major, 1)] + [np.full(k, c) for c, k in zip((0, 2), n_minor)])
    X = rng.normal(size=(y.size, 5))
    X[:, 0] += 2.0 * (y - 1)
    return X, y


def test_member_subset_sizes(rng):
    X, y = imbalanced(rng)
    maj, members, subsets = fit_easy_ensemble_arrays(X, y, 3, EasyConfig(5, 4, TREE, seed=3))
    assert maj == 1
    assert len(members) == 5
    for rows in subsets:
        assert rows.size == 240
        assert (y[rows] != 1).sum() == 120
        assert np.unique(rows).size == rows.size


def test_subsets_differ_and_are_reproducible(rng):
    _, y = imbalanced(rng)
    _, a = balanced_subsets(y, 3, 4, seed=11)
    _, b = balanced_subsets(y, 3, 4, seed=11)
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra, rb)
    assert not np.array_equal(a[0], a[1])


def test_single_full_subset_equals_plain_boosting(rng):
    # majority no larger than the rest: the undersample keeps every majority row
    y = np.repeat([0, 1, 2], [100, 90, 80])
    X = rng.normal(size=(y.size, 4)) + y[:, None] * 0.5
    cfg = EasyConfig(1, 6, TREE, learning_rate=0.8, seed=5)
    _, members, subsets = fit_easy_ensemble_arrays(X, y, 3, cfg)
    np.testing.assert_array_equal(subsets[0], np.arange(y.size))
    plain = fit_adaboost(X, y, 3, TREE, 6, 0.8)
    np.testing.assert_array_equal(members[0].predict(X), plain.predict(X))
    np.testing.assert_array_equal(members[0].decision_scores(X), plain.decision_scores(X))


def test_parallel_training_is_bit_identical(rng):
    X, y = imbalanced(rng)
    cfg = EasyConfig(4, 3, TREE, seed=9)
    _, serial, _ = fit_easy_ensemble_arrays(X, y, 3, cfg, jobs=1)
    _, parallel, _ = fit_easy_ensemble_arrays(X, y, 3, cfg, jobs=2)
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.decision_scores(X), b.decision_scores(X))
        np.testing.assert_array_equal(a.alphas, b.alphas)


def test_majority_tie_goes_to_lowest_code():
    assert majority_class(np.array([2, 2, 0, 0, 1]), 3) == 0


def test_single_class_cannot_be_balanced():
    with pytest.raises(DataError):
        balanced_subsets(np.ones(10, dtype=int), 3, 2, 0)


@pytest.fixture(scope="module")
def small_model():
    series = generate(SynthConfig(n_samples=3000, seed=4))
    matrix = extract_instances(series, WindowSpec(4), ClassScheme.THREE)
    return matrix, fit_easy_ensemble(matrix, EasyConfig(6, 4, TREE, seed=2), labeling={"note": "x"})


def test_model_save_load(tmp_path, small_model):
    matrix, model = small_model
    model.save(tmp_path / "m.json")
    back = EnsembleModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.decision_scores(matrix.X), model.decision_scores(matrix.X))
    assert back.labeling == {"note": "x"}
    assert back.config == model.config
    label, scores = predict_easy(model, matrix.X[0])
    assert label in ClassScheme.THREE.classes and scores.shape == (3,)
    with pytest.raises(DataError):
        model.decision_scores(matrix.X[:, :-1])
    imp = model.feature_importance()
    assert imp.sum() == pytest.approx(1.0, abs=1e-9)


def test_load_rejects_other_documents(tmp_path):
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(DataError):
        EnsembleModel.load(tmp_path / "bad.json")
    (tmp_path / "broken.json").write_text("{")
    with pytest.raises(DataError):
        EnsembleModel.load(tmp_path / "broken.json")


def test_tuned_defaults():
    three = EasyConfig.tuned_defaults(ClassScheme.THREE)
    assert (three.n_subsets, three.tree.max_depth, three.learning_rate) == (199, 7, 1.035)
    five = EasyConfig.tuned_defaults(ClassScheme.FIVE)
    assert (five.n_subsets, five.tree.max_depth, five.learning_rate) == (90, 4, 1.006)
    assert EasyConfig.from_dict(three.to_dict()) == three


def test_transition_matrix_counts():
    D, N, U = RampClass.RAMP_DOWN_STAR, RampClass.NO_RAMP, RampClass.RAMP_UP_STAR
    b = fit_transition_baseline([N, U, N, D, N, U], ClassScheme.THREE)
    np.testing.assert_allclose(b.matrix[1], [1 / 3, 0, 2 / 3])
    np.testing.assert_allclose(b.matrix[2], [0, 1, 0])
    np.testing.assert_allclose(b.row(-1), [1 / 3] * 3)
    assert predict_baseline(b, U, "argmax") is N
    with pytest.raises(DataError):
        fit_transition_baseline([N], ClassScheme.THREE)


def test_unseen_row_is_uniform_and_sampling_converges():
    b = fit_transition_pairs(np.array([0, 0, 0, 0, -1]), np.array([1, 1, 1, 2, 0]), ClassScheme.THREE, seed=1)
    np.testing.assert_allclose(b.matrix[0], [0, 0.75, 0.25])
    np.testing.assert_allclose(b.matrix[2], [1 / 3] * 3)
    draws = predict_baseline_codes(b, np.zeros(20_000, dtype=int))
    freq = np.bincount(draws, minlength=3) / draws.size
    np.testing.assert_allclose(freq, [0, 0.75, 0.25], atol=0.02)


def test_majority_baseline():
    base = fit_majority_baseline(np.array([1, 1, 0, 2, 1]), ClassScheme.THREE)
    np.testing.assert_array_equal(base.predict(3), [1, 1, 1])
