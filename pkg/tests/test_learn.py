"""Classifier training: gradients, invariances, CV fold hygiene, persistence."""

from __future__ import annotations

import numpy as np
import pytest

from reachlearn.features import FeatureSetId
from reachlearn.learn import (
    CONTROL_CLASSES,
    DEFAULT_GRIDS,
    Dataset,
    Standardization,
    cross_validate,
    cv_predictions,
    fit_family,
    load_model,
    penalized_loglik_and_grad,
    predict_labels,
    save_model,
    task_labels,
    train_logistic,
    train_svm,
    train_tree,
)


def _blob_dataset(n_per=30, seed=0, n_traj=6, spread=0.4) -> Dataset:
    """Three well-separated blobs in the first two feature dimensions."""
    rng = np.random.default_rng(seed)
    centers = {-0.5: (-3.0, 0.0), 0.0: (0.0, 3.0), 0.5: (3.0, 0.0)}
    rows, labels = [], []
    for cls, (cx, cy) in centers.items():
        pts = rng.normal([cx, cy], spread, size=(n_per, 2))
        rest = rng.normal(0.0, 0.1, size=(n_per, 3))
        rows.append(np.hstack([pts, rest]))
        labels.append(np.full(n_per, cls))
    X = np.vstack(rows)
    y = np.concatenate(labels)
    order = rng.permutation(len(y))
    tids = np.array([f"t{i % n_traj}" for i in range(len(y))])
    return Dataset(X[order], y[order], tids, FeatureSetId.B, subject_id="synth")


def test_dataset_validation():
    X = np.zeros((4, 5))
    tids = np.array(["a"] * 4)
    with pytest.raises(ValueError):
        Dataset(X, np.array([0.0, 0.0, 0.0, 0.3]), tids, FeatureSetId.B)
    with pytest.raises(ValueError):
        Dataset(X[:, :3], np.zeros(4), tids, FeatureSetId.B)
    with pytest.raises(ValueError):
        Dataset(X, np.zeros(3), tids, FeatureSetId.B)


def test_task_labels():
    labels = np.array([0.0, 0.5, -0.5, 0.0])
    y, classes = task_labels(labels, "exact")
    assert np.array_equal(y, labels) and np.array_equal(classes, CONTROL_CLASSES)
    y, classes = task_labels(labels, "avoid")
    assert np.array_equal(y, [0.0, 1.0, 1.0, 0.0])
    assert np.array_equal(classes, [0.0, 1.0])
    with pytest.raises(ValueError):
        task_labels(labels, "both")


def test_logistic_gradient_matches_finite_differences():
    """Analytic gradient against central differences at random points."""
    rng = np.random.default_rng(11)
    Xb = np.hstack([rng.normal(size=(40, 5)), np.ones((40, 1))])
    y_idx = rng.integers(0, 3, size=40)
    for trial in range(10):
        W = rng.normal(scale=0.7, size=(3, 6))
        _, G = penalized_loglik_and_grad(W, Xb, y_idx, l2=0.05)
        h = 1e-6
        fd = np.zeros_like(W)
        for i in range(W.shape[0]):
            for j in range(W.shape[1]):
                Wp, Wm = W.copy(), W.copy()
                Wp[i, j] += h
                Wm[i, j] -= h
                lp, _ = penalized_loglik_and_grad(Wp, Xb, y_idx, l2=0.05)
                lm, _ = penalized_loglik_and_grad(Wm, Xb, y_idx, l2=0.05)
                fd[i, j] = (lp - lm) / (2 * h)
        rel = np.linalg.norm(G - fd) / max(np.linalg.norm(fd), 1e-12)
        assert rel < 1e-5, f"trial {trial}: relative error {rel:.2e}"


def test_logistic_learns_separable_blobs():
    data = _blob_dataset()
    model = train_logistic(data)
    preds = predict_labels(model, data.features)
    assert (preds == data.labels).mean() == 1.0
    P = model.predict_proba(data.features)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert model.training_meta["hypers"]["lr"] < model.training_meta["lr_stability_bound"]


def test_logistic_loss_is_monotone_below_stability_bound():
    data = _blob_dataset()
    model = train_logistic(data, lr=0.3)
    hist = np.array(model.training_meta["loss_history"])
    assert np.all(np.diff(hist) <= 1e-10)


def test_training_is_duplication_invariant():
    data = _blob_dataset()
    doubled = Dataset(
        np.vstack([data.features, data.features]),
        np.concatenate([data.labels, data.labels]),
        np.concatenate([data.traj_ids, data.traj_ids]),
        data.layout,
    )
    for train in (train_logistic, train_tree, train_svm):
        a = train(data)
        b = train(doubled)
        assert np.array_equal(
            predict_labels(a, data.features), predict_labels(b, data.features)
        )
    assert np.allclose(train_logistic(data).weights, train_logistic(doubled).weights)


def test_tree_recovers_single_threshold():
    X = np.zeros((40, 5))
    X[:, 2] = np.concatenate([np.linspace(-2, -0.1, 20), np.linspace(0.1, 2, 20)])
    y = np.concatenate([np.full(20, -0.5), np.full(20, 0.5)])
    data = Dataset(X, y, np.array([f"t{i % 4}" for i in range(40)]), FeatureSetId.B)
    model = train_tree(data, max_depth=1, min_leaf=1)
    assert model.root["feature"] == 2
    assert (predict_labels(model, X) == y).all()


def test_tree_split_tie_breaks_to_lowest_feature():
    rng = np.random.default_rng(4)
    col = rng.normal(size=40)
    X = np.zeros((40, 5))
    X[:, 1] = col
    X[:, 3] = col  # identical predictive power, higher index
    y = np.where(col > 0, 0.5, -0.5)
    data = Dataset(X, y, np.array([f"t{i % 4}" for i in range(40)]), FeatureSetId.B)
    model = train_tree(data, max_depth=1, min_leaf=1)
    assert model.root["feature"] == 1


def test_tree_split_between_adjacent_floats_keeps_both_leaves():
    # The midpoint of two consecutive doubles can round up to the
    # upper one; a <= threshold on that value would leave the right
    # child empty and its class frequencies NaN.
    a = np.nextafter(3.0, 4.0)
    b = np.nextafter(a, 4.0)
    assert 0.5 * (a + b) == b
    X = np.zeros((4, 5))
    X[:, 0] = [a, a, b, b]
    y = np.array([-0.5, -0.5, 0.5, 0.5])
    data = Dataset(X, y, np.array(["t0", "t0", "t1", "t1"]), FeatureSetId.B)
    with np.errstate(invalid="raise"):
        model = train_tree(data, max_depth=1, min_leaf=1)
    assert model.root["feature"] == 0
    assert model.root["threshold"] == a
    assert (predict_labels(model, X) == y).all()


def test_svm_learns_separable_blobs():
    data = _blob_dataset()
    model = train_svm(data)
    assert (predict_labels(model, data.features) == data.labels).mean() == 1.0
    P = model.predict_proba(data.features)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)


def test_constant_feature_column_is_harmless():
    data = _blob_dataset()
    data.features[:, 4] = 7.0
    std = Standardization.fit(data.features)
    assert np.isfinite(std.apply(data.features)).all()
    model = train_logistic(data)
    assert np.isfinite(model.weights).all()


def test_single_class_data_falls_back_to_constant_model():
    X = np.random.default_rng(0).normal(size=(20, 5))
    y = np.zeros(20)
    data = Dataset(X, y, np.array([f"t{i % 4}" for i in range(20)]), FeatureSetId.B)
    model = fit_family("logreg", data, {}, seed=0, task="exact")
    assert (predict_labels(model, X) == 0.0).all()


def test_unknown_family_raises():
    with pytest.raises(ValueError):
        fit_family("forest", _blob_dataset(), {}, seed=0, task="exact")


@pytest.mark.parametrize("family", ["logreg", "tree", "svm"])
def test_save_load_roundtrip(tmp_path, family):
    data = _blob_dataset()
    model = fit_family(family, data, dict(DEFAULT_GRIDS[family][0]), 0, "exact")
    path = tmp_path / f"{family}.json"
    save_model(model, path)
    clone = load_model(path)
    probe = np.random.default_rng(1).normal(size=(30, 5))
    assert np.array_equal(predict_labels(model, probe), predict_labels(clone, probe))
    save_model(clone, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_cross_validate_reports_grid_and_best():
    data = _blob_dataset(n_traj=10)
    res = cross_validate(data, "logreg", folds=5)
    assert res.best_hypers in [dict(h) for h in DEFAULT_GRIDS["logreg"]]
    assert len(res.fold_accuracies) == 5
    assert res.mean_accuracy == pytest.approx(np.mean(res.fold_accuracies))
    assert len(res.table) == len(DEFAULT_GRIDS["logreg"])
    # separable data should be essentially solved
    assert res.mean_accuracy > 0.95


def test_cv_ties_resolve_to_smaller_capacity():
    data = _blob_dataset(n_traj=10)
    grid = [{"max_depth": 2, "min_leaf": 1}, {"max_depth": 9, "min_leaf": 1}]
    res = cross_validate(data, "tree", hyper_grid=grid, folds=5)
    # blobs are separable at depth 2; deeper trees tie and must not win
    assert res.best_hypers == grid[0]


def test_cv_predictions_cover_every_trajectory_once():
    data = _blob_dataset(n_traj=10)
    preds = cv_predictions(data, "tree", {"max_depth": 3, "min_leaf": 5}, folds=5)
    tids = [t for t, _, _ in preds]
    assert sorted(tids) == sorted(set(data.traj_ids.tolist()))
    for tid, y_hat, y_true in preds:
        rows = data.traj_ids == tid
        assert y_hat.shape == y_true.shape == (rows.sum(),)
        assert np.array_equal(y_true, data.labels[rows])


def test_cv_needs_enough_trajectories():
    data = _blob_dataset(n_traj=3)
    with pytest.raises(ValueError):
        cross_validate(data, "logreg", folds=5)
