"""Classifiers over avoidance features, written against a fixed contract:

* deterministic given data and seed (model files are byte-stable),
* full-batch optimisers, so duplicating every sample leaves the learned
  decision function untouched,
* trajectory-blocked cross-validation: whole trajectories stay inside a
  fold, since consecutive samples of one run are nowhere near i.i.d.

Three families: multinomial logistic regression, a CART-style decision
tree, and a linear one-vs-rest SVM.  The label space is either the
three-element turn-rate set ("exact" task) or its binary collapse into
avoid / no-avoid ("avoid" task, models retrained on the remapped
labels).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .features import FeatureSetId

CONTROL_CLASSES = (-0.5, 0.0, 0.5)
AVOID_CLASSES = (0.0, 1.0)
TASKS = ("exact", "avoid")

DEFAULT_GRIDS: dict[str, list[dict[str, Any]]] = {
    # Ordered small capacity -> large; ties during model selection keep
    # the earlier (smaller-capacity) entry.
    "logreg": [{"l2": l2} for l2 in (1.0, 0.1, 0.01, 0.001)],
    "tree": [
        {"max_depth": d, "min_leaf": m}
        for d in range(2, 11)
        for m in (10, 5, 1)
    ],
    "svm": [{"c": c} for c in (0.01, 0.1, 1.0, 10.0)],
}


@dataclass
class Dataset:
    """Feature rows with control labels and trajectory provenance."""

    features: np.ndarray
    labels: np.ndarray
    traj_ids: np.ndarray
    layout: FeatureSetId
    subject_id: str = "anon"
    clamped: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        self.traj_ids = np.asarray(self.traj_ids)
        n = self.features.shape[0]
        if n == 0:
            raise ValueError("dataset is empty")
        if self.features.ndim != 2 or self.features.shape[1] != len(self.layout):
            raise ValueError(
                f"feature matrix must be (n, {len(self.layout)}) for layout "
                f"{self.layout.value}, got {self.features.shape}"
            )
        if self.labels.shape != (n,) or self.traj_ids.shape != (n,):
            raise ValueError("labels and traj_ids must align with features")
        if not np.isfinite(self.features).all():
            raise ValueError("features must be finite")
        bad = ~np.isin(self.labels, CONTROL_CLASSES)
        if bad.any():
            raise ValueError(
                f"labels must come from {CONTROL_CLASSES}; "
                f"offenders {np.unique(self.labels[bad])}"
            )

    def __len__(self) -> int:
        return self.features.shape[0]


def task_labels(labels: np.ndarray, task: str) -> tuple[np.ndarray, np.ndarray]:
    """Map control labels to the task's label space; returns (y, classes)."""
    if task == "exact":
        return labels.copy(), np.array(CONTROL_CLASSES)
    if task == "avoid":
        return (labels != 0.0).astype(float), np.array(AVOID_CLASSES)
    raise ValueError(f"task must be one of {TASKS}, got {task!r}")


@dataclass
class Standardization:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardization":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        # Constant features pass through unscaled.
        std = np.where(std < 1e-12, 1.0, std)
        return cls(mean, std)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


def _softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def _class_indices(y: np.ndarray, classes: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(classes, y)
    if not np.array_equal(classes[idx], y):
        raise ValueError("labels outside the model's class set")
    return idx


def penalized_loglik_and_grad(
    W: np.ndarray, Xb: np.ndarray, y_idx: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """Mean log-likelihood with L2 on non-bias weights, and its gradient.

    ``Xb`` already carries the trailing bias column.  Exposed separately
    so the gradient can be checked against finite differences.
    """
    n = Xb.shape[0]
    Z = Xb @ W.T
    Zs = Z - Z.max(axis=1, keepdims=True)
    logp = Zs - np.log(np.exp(Zs).sum(axis=1, keepdims=True))
    ll = logp[np.arange(n), y_idx].mean() - 0.5 * l2 * float(
        (W[:, :-1] ** 2).sum()
    )
    P = np.exp(logp)
    Y = np.zeros_like(P)
    Y[np.arange(n), y_idx] = 1.0
    G = (Y - P).T @ Xb / n
    G[:, :-1] -= l2 * W[:, :-1]
    return ll, G


@dataclass
class LogisticModel:
    weights: np.ndarray  # (n_classes, n_features + 1), last column bias
    classes: np.ndarray
    layout: FeatureSetId
    standardization: Standardization
    task: str
    training_meta: dict = field(default_factory=dict)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        Xs = self.standardization.apply(np.atleast_2d(X))
        return _softmax(Xs @ self.weights[:, :-1].T + self.weights[:, -1])


def train_logistic(
    data: Dataset,
    l2: float = 0.01,
    lr: float = 0.3,
    epochs: int = 400,
    seed: int = 0,
    task: str = "exact",
) -> LogisticModel:
    """Full-batch gradient ascent from zero weights.

    The iteration is deterministic (the seed is recorded for provenance
    only).  Also records a step-size stability bound from the data's
    Gram spectrum; below it the penalised loss is non-increasing.
    """
    y, classes = task_labels(data.labels, task)
    present = np.unique(y)
    if present.size < 2:
        raise ValueError("need at least two classes to fit a classifier")
    std = Standardization.fit(data.features)
    Xs = std.apply(data.features)
    Xb = np.concatenate([Xs, np.ones((len(data), 1))], axis=1)
    y_idx = _class_indices(y, classes)
    W = np.zeros((classes.size, Xb.shape[1]))
    # Softmax Hessian is bounded by half the Gram spectral radius.
    lam_max = float(np.linalg.eigvalsh(Xb.T @ Xb / len(data)).max())
    lr_bound = 2.0 / (0.5 * lam_max + l2)
    history = []
    for _ in range(epochs):
        ll, G = penalized_loglik_and_grad(W, Xb, y_idx, l2)
        history.append(-ll)
        W = W + lr * G
        if not np.isfinite(W).all():
            raise ValueError(f"training diverged (lr={lr}, bound {lr_bound:.3g})")
    final_ll, _ = penalized_loglik_and_grad(W, Xb, y_idx, l2)
    return LogisticModel(
        weights=W,
        classes=classes,
        layout=data.layout,
        standardization=std,
        task=task,
        training_meta={
            "family": "logreg",
            "seed": seed,
            "hypers": {"l2": l2, "lr": lr, "epochs": epochs},
            "final_loss": -final_ll,
            "loss_history": history,
            "lr_stability_bound": lr_bound,
        },
    )


# ---------------------------------------------------------------------------
# Decision tree


@dataclass
class DecisionTree:
    root: dict
    classes: np.ndarray
    layout: FeatureSetId
    task: str
    training_meta: dict = field(default_factory=dict)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.empty((X.shape[0], self.classes.size))
        self._walk(self.root, X, np.arange(X.shape[0]), out)
        return out

    def _walk(self, node: dict, X: np.ndarray, rows: np.ndarray, out: np.ndarray):
        if not rows.size:
            return
        if "freqs" in node:
            out[rows] = node["freqs"]
            return
        left = X[rows, node["feature"]] <= node["threshold"]
        self._walk(node["left"], X, rows[left], out)
        self._walk(node["right"], X, rows[~left], out)


def _gini_best_split(X: np.ndarray, y_idx: np.ndarray, n_classes: int, min_leaf: int):
    """Best (feature, threshold, weighted impurity) or None.

    Thresholds are midpoints between distinct consecutive sorted values.
    Ties on impurity keep the lowest feature index, then the lowest
    threshold, so refits reproduce the identical tree.
    """
    n = y_idx.size
    best = None
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_idx] = 1.0
    total = onehot.sum(axis=0)
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cum = np.cumsum(onehot[order], axis=0)
        # Valid split after position i keeps i+1 left rows, n-i-1 right.
        pos = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (pos >= min_leaf) & (n - pos >= min_leaf)
        if not valid.any():
            continue
        pos = pos[valid]
        left = cum[pos - 1]
        right = total - left
        nl = pos.astype(float)
        nr = n - nl
        gl = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
        gr = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
        weighted = (nl * gl + nr * gr) / n
        k = int(np.argmin(weighted))
        if best is None or weighted[k] < best[2] - 1e-15:
            thr = 0.5 * (xs[pos[k] - 1] + xs[pos[k]])
            # For adjacent floats the midpoint can round up to the
            # right value, which would send both sides left; the lower
            # value always partitions the sorted block properly.
            if thr >= xs[pos[k]]:
                thr = xs[pos[k] - 1]
            best = (f, float(thr), float(weighted[k]))
    return best


def _grow_tree(
    X: np.ndarray,
    y_idx: np.ndarray,
    n_classes: int,
    depth: int,
    max_depth: int,
    min_leaf: int,
) -> dict:
    counts = np.bincount(y_idx, minlength=n_classes).astype(float)
    node_freqs = counts / counts.sum()
    pure = (counts > 0).sum() <= 1
    if depth >= max_depth or pure or y_idx.size < 2 * min_leaf:
        return {"freqs": node_freqs.tolist(), "n": int(y_idx.size)}
    split = _gini_best_split(X, y_idx, n_classes, min_leaf)
    if split is None:
        return {"freqs": node_freqs.tolist(), "n": int(y_idx.size)}
    f, thr, _ = split
    left = X[:, f] <= thr
    return {
        "feature": f,
        "threshold": thr,
        "left": _grow_tree(X[left], y_idx[left], n_classes, depth + 1, max_depth, min_leaf),
        "right": _grow_tree(X[~left], y_idx[~left], n_classes, depth + 1, max_depth, min_leaf),
    }


def train_tree(
    data: Dataset,
    max_depth: int = 6,
    min_leaf: int = 5,
    seed: int = 0,
    task: str = "exact",
) -> DecisionTree:
    """Gini-impurity CART on the raw (unstandardised) features.

    Trees are invariant to monotone feature maps, so no standardisation;
    leaves store class frequencies over the task's full class set.
    """
    if max_depth < 1 or min_leaf < 1:
        raise ValueError("max_depth and min_leaf must be positive")
    y, classes = task_labels(data.labels, task)
    y_idx = _class_indices(y, classes)
    root = _grow_tree(data.features, y_idx, classes.size, 0, max_depth, min_leaf)
    return DecisionTree(
        root=root,
        classes=classes,
        layout=data.layout,
        task=task,
        training_meta={
            "family": "tree",
            "seed": seed,
            "hypers": {"max_depth": max_depth, "min_leaf": min_leaf},
        },
    )


# ---------------------------------------------------------------------------
# Linear SVM


@dataclass
class LinearSvm:
    weights: np.ndarray  # (n_classes, n_features + 1) one-vs-rest, bias last
    classes: np.ndarray
    layout: FeatureSetId
    standardization: Standardization
    task: str
    training_meta: dict = field(default_factory=dict)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        Xs = self.standardization.apply(np.atleast_2d(X))
        return Xs @ self.weights[:, :-1].T + self.weights[:, -1]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        # Softmax over margins; a ranking surrogate, not calibrated.
        return _softmax(self.decision_function(X))


def train_svm(
    data: Dataset,
    c: float = 1.0,
    lr: float = 0.1,
    epochs: int = 200,
    seed: int = 0,
    task: str = "exact",
) -> LinearSvm:
    """One-vs-rest hinge loss by full-batch subgradient descent.

    Full-batch (averaged) subgradients make the optimiser invariant to
    duplicating the dataset, which per-sample stochastic passes are
    not.  Step sizes decay harmonically; the seed is recorded only.
    """
    y, classes = task_labels(data.labels, task)
    if np.unique(y).size < 2:
        raise ValueError("need at least two classes to fit a classifier")
    std = Standardization.fit(data.features)
    Xs = std.apply(data.features)
    Xb = np.concatenate([Xs, np.ones((len(data), 1))], axis=1)
    n = Xb.shape[0]
    W = np.zeros((classes.size, Xb.shape[1]))
    for cls_i, cls in enumerate(classes):
        sign = np.where(y == cls, 1.0, -1.0)
        w = np.zeros(Xb.shape[1])
        for t in range(epochs):
            margins = sign * (Xb @ w)
            active = margins < 1.0
            sub = -(sign[active, None] * Xb[active]).sum(axis=0) / n
            reg = np.concatenate([w[:-1] / c, [0.0]])
            w = w - (lr / (1.0 + 0.02 * t)) * (sub + reg)
        W[cls_i] = w
    return LinearSvm(
        weights=W,
        classes=classes,
        layout=data.layout,
        standardization=std,
        task=task,
        training_meta={
            "family": "svm",
            "seed": seed,
            "hypers": {"c": c, "lr": lr, "epochs": epochs},
        },
    )


# ---------------------------------------------------------------------------
# Shared prediction / persistence / cross-validation

FAMILIES = {
    "logreg": train_logistic,
    "tree": train_tree,
    "svm": train_svm,
}


@dataclass
class _ConstantModel:
    """Degenerate fold fallback when training labels are single-class."""

    classes: np.ndarray
    freqs: np.ndarray

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.tile(self.freqs, (np.atleast_2d(X).shape[0], 1))


def predict_labels(model, X: np.ndarray) -> np.ndarray:
    probs = model.predict_proba(X)
    return np.asarray(model.classes)[probs.argmax(axis=1)]


def fit_family(family: str, data: Dataset, hypers: dict, seed: int, task: str):
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    try:
        return FAMILIES[family](data, seed=seed, task=task, **hypers)
    except ValueError as e:
        if "two classes" not in str(e):
            raise
        y, classes = task_labels(data.labels, task)
        freqs = np.array([(y == cls).mean() for cls in classes])
        return _ConstantModel(classes=classes, freqs=freqs)


@dataclass
class CvResult:
    family: str
    task: str
    best_hypers: dict
    fold_accuracies: list[float]
    mean_accuracy: float
    table: list[dict]


def _fold_blocks(traj_ids: np.ndarray, folds: int) -> list[np.ndarray]:
    """Contiguous trajectory blocks; returns a row mask per fold."""
    unique = list(dict.fromkeys(traj_ids.tolist()))
    if len(unique) < folds:
        raise ValueError(
            f"need at least {folds} trajectories for {folds}-fold CV, "
            f"got {len(unique)}"
        )
    masks = []
    for chunk in np.array_split(np.array(unique, dtype=traj_ids.dtype), folds):
        masks.append(np.isin(traj_ids, chunk))
    return masks


def _subset(data: Dataset, mask: np.ndarray) -> Dataset:
    return Dataset(
        features=data.features[mask],
        labels=data.labels[mask],
        traj_ids=data.traj_ids[mask],
        layout=data.layout,
        subject_id=data.subject_id,
        clamped=None if data.clamped is None else data.clamped[mask],
    )


def cross_validate(
    data: Dataset,
    family: str,
    hyper_grid: Sequence[dict] | None = None,
    folds: int = 5,
    seed: int = 0,
    task: str = "exact",
) -> CvResult:
    """Grid search by trajectory-blocked K-fold accuracy.

    The grid is walked in its given order (defaults run small capacity
    first), and only a strictly better mean accuracy replaces the
    incumbent, so ties resolve to the smaller-capacity model.
    """
    if hyper_grid is None:
        hyper_grid = DEFAULT_GRIDS[family]
    masks = _fold_blocks(data.traj_ids, folds)
    best = None
    table = []
    for hypers in hyper_grid:
        fold_accs = []
        for m in masks:
            train = _subset(data, ~m)
            test = _subset(data, m)
            model = fit_family(family, train, hypers, seed, task)
            y_true, _ = task_labels(test.labels, task)
            acc = float((predict_labels(model, test.features) == y_true).mean())
            fold_accs.append(acc)
        mean = float(np.mean(fold_accs))
        table.append({"hypers": dict(hypers), "mean": mean, "folds": fold_accs})
        if best is None or mean > best[1]:
            best = (dict(hypers), mean, fold_accs)
    return CvResult(
        family=family,
        task=task,
        best_hypers=best[0],
        fold_accuracies=best[2],
        mean_accuracy=best[1],
        table=table,
    )


def cv_predictions(
    data: Dataset,
    family: str,
    hypers: dict,
    folds: int = 5,
    seed: int = 0,
    task: str = "exact",
) -> list[tuple[Any, np.ndarray, np.ndarray]]:
    """Out-of-fold (traj_id, predicted, true) label sequences per trajectory.

    Every trajectory is predicted by the model whose training folds
    excluded it, which is what the timing-error metrics expect.
    """
    masks = _fold_blocks(data.traj_ids, folds)
    out = []
    for m in masks:
        model = fit_family(family, _subset(data, ~m), hypers, seed, task)
        test = _subset(data, m)
        y_true, _ = task_labels(test.labels, task)
        y_hat = predict_labels(model, test.features)
        for tid in dict.fromkeys(test.traj_ids.tolist()):
            rows = test.traj_ids == tid
            out.append((tid, y_hat[rows], y_true[rows]))
    return out


def _np_to_json(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def save_model(model, path: str | Path) -> None:
    """Write a model as deterministic (sorted, repr-float) JSON."""
    family = model.training_meta.get("family")
    payload = {
        "family": family,
        "task": model.task,
        "layout": model.layout.value,
        "classes": np.asarray(model.classes).tolist(),
        "training_meta": model.training_meta,
    }
    if family == "tree":
        payload["root"] = model.root
    else:
        payload["weights"] = model.weights.tolist()
        payload["standardization"] = {
            "mean": model.standardization.mean.tolist(),
            "std": model.standardization.std.tolist(),
        }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, default=_np_to_json) + "\n"
    )


def load_model(path: str | Path):
    payload = json.loads(Path(path).read_text())
    family = payload["family"]
    layout = FeatureSetId(payload["layout"])
    classes = np.array(payload["classes"])
    meta = payload["training_meta"]
    if family == "tree":
        return DecisionTree(
            root=payload["root"],
            classes=classes,
            layout=layout,
            task=payload["task"],
            training_meta=meta,
        )
    std = Standardization(
        mean=np.array(payload["standardization"]["mean"]),
        std=np.array(payload["standardization"]["std"]),
    )
    cls = LogisticModel if family == "logreg" else LinearSvm
    return cls(
        weights=np.array(payload["weights"]),
        classes=classes,
        layout=layout,
        standardization=std,
        task=payload["task"],
        training_meta=meta,
    )
