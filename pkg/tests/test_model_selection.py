#!/usr/bin/env python3
"""
Model selection tests for feedwatch
Uniform designs and the nested (C, gamma) search
"""

import numpy as np
import pandas as pd
import pytest

from crossval import cv_accuracy
from model_selection import (
    TRACE_COLUMNS,
    SearchDomain,
    glp_generator,
    trace_frame,
    tune,
    ud_points,
    write_trace,
)
from svm_core import Hyperparams, KernelSpec, train_ssvm


def circles(n=60, seed=4):
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0, 2 * np.pi, n)
    radii = np.where(np.arange(n) % 2 == 0, 1.0, 3.0) + rng.normal(0, 0.1, n)
    X = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    y = np.where(np.arange(n) % 2 == 0, 1, -1)
    return X, y


class TestUniformDesign:
    """Good-lattice-point designs"""

    def test_latin_property(self):
        points = ud_points(13)
        assert len(points) == 13
        assert len({u for u, _ in points}) == 13
        assert len({v for _, v in points}) == 13

    def test_nine_run_levels(self):
        levels = [round(v * 9 - 0.5) for _, v in ud_points(9)]
        assert levels == [0, 4, 8, 3, 7, 2, 6, 1, 5]

    def test_generators(self):
        assert glp_generator(13) == 5
        assert glp_generator(9) == 4
        assert glp_generator(7) == 3
        assert glp_generator(12) == 5

    def test_points_distinct_and_scaled(self):
        points = ud_points(11, ((-6.0, 12.0), (-12.0, 4.0)))
        for i, a in enumerate(points):
            assert -6.0 <= a[0] <= 12.0 and -12.0 <= a[1] <= 4.0
            for b in points[i + 1:]:
                assert np.hypot(a[0] - b[0], a[1] - b[1]) > 0

    def test_too_few_runs(self):
        with pytest.raises(ValueError):
            ud_points(1)


class TestTune:
    """Nested uniform-design search"""

    @pytest.fixture(scope="class")
    def circle_result(self):
        X, y = circles()
        return X, y, tune(X, y, folds=5, seed=1)

    def test_circles_separable(self, circle_result):
        X, y, result = circle_result
        assert result.cv_accuracy >= 0.95
        default = Hyperparams(C=1.0, gamma=1.0 / X.shape[1])

        def trainer(X_train, y_train):
            return train_ssvm(X_train, y_train, default, kernel=KernelSpec.rbf(default.gamma))

        assert result.cv_accuracy >= cv_accuracy(X, y, trainer, 5, 1)

    def test_accuracy_is_best_in_trace(self, circle_result):
        _, _, result = circle_result
        assert len(result.trace) == 13 + 9
        assert result.cv_accuracy == max(p.cv_accuracy for p in result.trace)

    def test_second_stage_near_incumbent(self, circle_result):
        _, _, result = circle_result
        stage_one = [p for p in result.trace if p.stage == 1]
        best = min(stage_one, key=lambda p: (-p.cv_accuracy, p.log2C, p.log2gamma))
        for p in (p for p in result.trace if p.stage == 2):
            assert abs(p.log2C - best.log2C) <= 18.0 / 4 + 1e-12
            assert abs(p.log2gamma - best.log2gamma) <= 16.0 / 4 + 1e-12
            assert -6.0 <= p.log2C <= 12.0
            assert -12.0 <= p.log2gamma <= 4.0

    def test_deterministic(self, circle_result):
        X, y, result = circle_result
        again = tune(X, y, folds=5, seed=1)
        assert again.hyperparams == result.hyperparams
        assert again.trace == result.trace

    def test_collapsed_domain(self):
        X, y = circles(30)
        domain = SearchDomain(log2C=(3.0, 3.0), log2gamma=(-2.0, -2.0), stage_sizes=(13, 9))
        result = tune(X, y, domain, folds=3, seed=0)
        assert result.hyperparams.C == 8.0
        assert result.hyperparams.gamma == 0.25

    def test_trace_file(self, circle_result, temp_dir):
        _, _, result = circle_result
        path = temp_dir / "trace.csv"
        write_trace(result, path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == TRACE_COLUMNS
        assert len(frame) == len(trace_frame(result)) == 22

    def test_bad_domain(self):
        with pytest.raises(ValueError):
            SearchDomain(log2C=(2.0, 1.0))
        with pytest.raises(ValueError):
            SearchDomain(stage_sizes=(1,))
