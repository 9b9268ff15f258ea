#!/usr/bin/env python3
"""
Training pipeline tests for feedwatch
Selection toggles, tuning fallbacks and determinism of fit_pipeline
"""

import numpy as np
import pytest

from model_selection import SearchDomain
from pipeline import PipelineConfig, choose_hyperparams, fit_pipeline
from svm_core import Hyperparams, decision

TINY_DOMAIN = SearchDomain(log2C=(-2.0, 6.0), log2gamma=(-6.0, 0.0), stage_sizes=(5, 3))


@pytest.fixture
def signal_data():
    """Column 1 carries the label; the other five columns are noise."""
    rng = np.random.default_rng(31)
    y = np.array([1] * 24 + [-1] * 16)
    X = rng.normal(size=(40, 6))
    X[:, 1] += 2.0 * y
    return X, y


class TestFitPipeline:
    """End-to-end training on a feature matrix"""

    def test_full_chain(self, signal_data):
        X, y = signal_data
        result = fit_pipeline(X, y, PipelineConfig(folds=4, domain=TINY_DOMAIN), seed=3)
        assert 1 in result.indices
        assert result.candidates is not None and result.subset is not None
        assert len(result.tuning.trace) == 8
        assert result.model.input_dim == 6
        assert np.mean(np.where(decision(result.model, X) >= 0, 1, -1) == y) >= 0.9

    def test_no_selection_keeps_every_column(self, signal_data):
        X, y = signal_data
        result = fit_pipeline(X, y, PipelineConfig(select=False, folds=4, domain=TINY_DOMAIN))
        assert result.indices == tuple(range(6))
        assert result.candidates is None

    def test_linear_kernel_skips_tuning(self, signal_data):
        X, y = signal_data
        result = fit_pipeline(X, y, PipelineConfig(kernel="linear", folds=4))
        assert result.tuning is None
        assert result.model.kernel.kind == "linear"
        assert result.hyperparams.C == 1.0

    def test_oversampling_is_seeded(self, signal_data):
        X, y = signal_data
        config = PipelineConfig(oversample=True, folds=4, domain=TINY_DOMAIN)
        a = fit_pipeline(X, y, config, seed=5)
        b = fit_pipeline(X, y, config, seed=5)
        assert a.indices == b.indices
        assert a.hyperparams == b.hyperparams
        assert np.array_equal(decision(a.model, X), decision(b.model, X))
        assert a.model.coefficients.shape[0] == 2 * 24

    def test_describe_is_plain_data(self):
        described = PipelineConfig(domain=TINY_DOMAIN).describe()
        assert described["domain"]["stage_sizes"] == [5, 3]
        assert described["kernel"] == "rbf"


class TestChooseHyperparams:
    def test_default_gamma_is_inverse_dimension(self, signal_data):
        X, y = signal_data
        hp, tuning = choose_hyperparams(X, y, (0, 1, 2, 3), PipelineConfig(tune=False), seed=0)
        assert tuning is None
        assert hp == Hyperparams(C=1.0, gamma=0.25)

    def test_explicit_default(self, signal_data):
        X, y = signal_data
        fixed = Hyperparams(C=4.0, gamma=0.1)
        hp, _ = choose_hyperparams(X, y, (1,), PipelineConfig(tune=False, default_hp=fixed), seed=0)
        assert hp == fixed
