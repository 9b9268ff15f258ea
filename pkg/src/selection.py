#!/usr/bin/env python3
"""
Two-stage feature selection for feedwatch
1-norm SVM candidate screening followed by wrapper forward selection
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from crossval import CrossValError, cv_accuracy, stratified_folds
from feature_registry import FEATURE_NAMES
from svm_core import Scaler, solve_l1svm, train_ssvm

logger = logging.getLogger(__name__)


class SelectionError(ValueError):
    pass


@dataclass
class FeatureSubset:
    indices: tuple
    provenance: str
    cv_accuracy: float
    weights: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def names(self, feature_names=None):
        feature_names = feature_names or FEATURE_NAMES
        return [feature_names[i] for i in self.indices]


def standardize(X):
    return Scaler.fit(np.asarray(X, dtype=float)).transform(np.asarray(X, dtype=float))


def ssvm_trainer(hp, kernel=None, opts=None, feature_indices=None):
    """Trainer callable for the cross-validation helpers."""
    def trainer(X, y):
        return train_ssvm(X, y, hp, kernel=kernel, opts=opts, feature_indices=feature_indices)
    return trainer


def candidate_features(X, y, C_l1=1.0, eps=1e-8):
    """Indices whose 1-norm SVM weight is non-zero (|w_j| > eps).

    ``cv_accuracy`` on the result is the screening model's training accuracy.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    result = solve_l1svm(X, y, C_l1)
    keep = tuple(int(j) for j in np.flatnonzero(np.abs(result.w) > eps))
    predictions = np.where(X @ result.w + result.b >= 0, 1, -1)
    accuracy = float(np.mean(predictions == y))
    logger.info("Screening kept %d of %d features (objective %.6g, %d pivots)",
                len(keep), X.shape[1], result.objective, result.pivots)
    return FeatureSubset(
        indices=keep,
        provenance="candidate",
        cv_accuracy=accuracy,
        weights={j: float(result.w[j]) for j in keep},
    )


def forward_select(X, y, candidates, hp, folds=10, seed=0, kernel=None, opts=None,
                   oversample_seed=None, n_jobs=None):
    """Greedy forward selection scored by stratified k-fold SSVM accuracy.

    Each round adds the candidate with the best cross-validated accuracy
    (lowest index on ties) if it strictly beats the current subset; round 0
    scores the empty set as the majority-class rate.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    remaining = sorted(set(int(c) for c in candidates))
    if not remaining:
        raise SelectionError("forward selection needs at least one candidate")
    try:
        stratified_folds(y, folds, seed)
    except CrossValError as e:
        raise SelectionError(str(e)) from None

    _, counts = np.unique(y, return_counts=True)
    best = float(counts.max() / counts.sum())
    history = [best]
    selected = []
    trainer = ssvm_trainer(hp, kernel=kernel, opts=opts)

    while remaining:
        scored = []
        for j in remaining:
            columns = sorted(selected + [j])
            accuracy = cv_accuracy(X[:, columns], y, trainer, folds, seed,
                                   oversample_seed=oversample_seed, n_jobs=n_jobs)
            scored.append((accuracy, j))
        top = max(acc for acc, _ in scored)
        winner = min(j for acc, j in scored if acc == top)
        if not top > best:
            logger.info("Forward selection stops: best addition %.4f does not beat %.4f", top, best)
            break
        selected.append(winner)
        remaining.remove(winner)
        best = top
        history.append(best)
        logger.info("Round %d: added feature %d (cv accuracy %.4f)", len(selected), winner, best)

    return FeatureSubset(indices=tuple(sorted(selected)), provenance="forward",
                         cv_accuracy=best, history=history)


def screening_report(subset, feature_names=None):
    """Selected features with their screening weights, largest magnitude first."""
    feature_names = feature_names or FEATURE_NAMES
    rows = [{"index": j, "name": feature_names[j], "weight": subset.weights.get(j, 0.0)}
            for j in subset.indices]
    frame = pd.DataFrame(rows, columns=["index", "name", "weight"])
    order = frame["weight"].abs().sort_values(ascending=False, kind="stable").index
    return frame.loc[order].reset_index(drop=True)
