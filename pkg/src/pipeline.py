#!/usr/bin/env python3
"""
Training pipeline for feedwatch
Candidate screening -> forward selection -> (C, gamma) tuning -> final SSVM
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from crossval import oversample
from model_selection import SearchDomain, TuningResult, tune
from seeding import derive_seed
from selection import FeatureSubset, candidate_features, forward_select, standardize
from svm_core import ConvergenceOpts, Hyperparams, KernelSpec, SsvmModel, train_ssvm

logger = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    select: bool = True
    oversample: bool = False
    tune: bool = True
    kernel: str = "rbf"
    folds: int = 10
    C_l1: float = 1.0
    alpha: float = 5.0
    domain: SearchDomain = field(default_factory=SearchDomain)
    opts: ConvergenceOpts = field(default_factory=ConvergenceOpts)
    selection_hp: Optional[Hyperparams] = None
    default_hp: Optional[Hyperparams] = None

    def describe(self):
        return {
            "select": self.select,
            "oversample": self.oversample,
            "tune": self.tune,
            "kernel": self.kernel,
            "folds": self.folds,
            "C_l1": self.C_l1,
            "alpha": self.alpha,
            "domain": {"log2C": list(self.domain.log2C), "log2gamma": list(self.domain.log2gamma),
                       "stage_sizes": list(self.domain.stage_sizes)},
        }


@dataclass
class PipelineResult:
    model: SsvmModel
    indices: tuple
    hyperparams: Hyperparams
    candidates: Optional[FeatureSubset] = None
    subset: Optional[FeatureSubset] = None
    tuning: Optional[TuningResult] = None


def _kernel(config, hp):
    return KernelSpec.linear() if config.kernel == "linear" else KernelSpec.rbf(hp.gamma)


def fixed_trainer(indices, hp, config):
    """Trainer with frozen feature subset and hyperparameters, for outer CV loops."""
    kernel = _kernel(config, hp)

    def trainer(X, y):
        return train_ssvm(X, y, hp, kernel=kernel, opts=config.opts, feature_indices=indices)
    return trainer


def choose_features(X, y, config, seed):
    """Run both selection stages; returns (indices, candidates, subset)."""
    all_indices = tuple(range(X.shape[1]))
    if not config.select:
        return all_indices, None, None
    oversample_seed = derive_seed(seed, "select", "oversample") if config.oversample else None
    candidates = candidate_features(standardize(X), y, C_l1=config.C_l1)
    if not candidates.indices:
        logger.warning("Screening removed every feature; keeping all %d", X.shape[1])
        return all_indices, candidates, None
    hp = config.selection_hp or Hyperparams(C=1.0, gamma=1.0 / len(candidates.indices),
                                            alpha=config.alpha)
    kernel = KernelSpec.linear() if config.kernel == "linear" else KernelSpec.rbf(hp.gamma)
    subset = forward_select(X, y, candidates.indices, hp, folds=config.folds,
                            seed=derive_seed(seed, "select"), kernel=kernel, opts=config.opts,
                            oversample_seed=oversample_seed)
    indices = subset.indices or candidates.indices
    return indices, candidates, subset


def choose_hyperparams(X, y, indices, config, seed):
    """Tune (C, gamma) on the chosen columns, or fall back to C=1, gamma=1/d."""
    default = config.default_hp or Hyperparams(C=1.0, gamma=1.0 / max(len(indices), 1),
                                               alpha=config.alpha)
    if not config.tune or config.kernel == "linear":
        return default, None
    oversample_seed = derive_seed(seed, "tune", "oversample") if config.oversample else None
    tuning = tune(X[:, list(indices)], y, config.domain, folds=config.folds,
                  seed=derive_seed(seed, "tune"), alpha=config.alpha, opts=config.opts,
                  oversample_seed=oversample_seed)
    return tuning.hyperparams, tuning


def fit_pipeline(X, y, config=None, seed=0):
    """Full training chain on (X, y); X carries every registry column."""
    config = config or PipelineConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    indices, candidates, subset = choose_features(X, y, config, seed)
    hp, tuning = choose_hyperparams(X, y, indices, config, seed)
    X_fit, y_fit = X, y
    if config.oversample:
        X_fit, y_fit = oversample(X, y, derive_seed(seed, "train", "oversample"))
    model = fixed_trainer(indices, hp, config)(X_fit, y_fit)
    logger.info("Trained SSVM on %d features (C=%.4g, gamma=%.4g)", len(indices), hp.C, hp.gamma)
    return PipelineResult(model=model, indices=tuple(indices), hyperparams=hp,
                          candidates=candidates, subset=subset, tuning=tuning)
