#!/usr/bin/env python3
"""
Uniform-design model selection for feedwatch
Nested good-lattice-point designs over (log2 C, log2 gamma) scored by k-fold accuracy
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from crossval import cv_accuracy
from svm_core import Hyperparams, KernelSpec, train_ssvm

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["stage", "point_index", "log2C", "log2gamma", "cv_accuracy"]
_GENERATORS = {13: 5, 9: 4}


@dataclass(frozen=True)
class SearchDomain:
    log2C: tuple = (-6.0, 12.0)
    log2gamma: tuple = (-12.0, 4.0)
    stage_sizes: tuple = (13, 9)

    def __post_init__(self):
        for name in ("log2C", "log2gamma"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is empty: [{lo}, {hi}]")
        if not self.stage_sizes or any(n < 2 for n in self.stage_sizes):
            raise ValueError(f"stage sizes must be >= 2, got {self.stage_sizes}")


@dataclass(frozen=True)
class TuningPoint:
    stage: int
    point_index: int
    log2C: float
    log2gamma: float
    cv_accuracy: float


@dataclass
class TuningResult:
    hyperparams: Hyperparams
    cv_accuracy: float
    trace: list = field(default_factory=list)


def glp_generator(n):
    if n in _GENERATORS:
        return _GENERATORS[n]
    g = int(n // 3) + 1
    while math.gcd(g, n) != 1:
        g += 1
    return g


def ud_points(n, rect=((0.0, 1.0), (0.0, 1.0))):
    """Good-lattice-point uniform design of ``n`` runs mapped into ``rect``."""
    if n < 2:
        raise ValueError(f"a uniform design needs at least 2 runs, got {n}")
    g = glp_generator(n)
    (c_lo, c_hi), (g_lo, g_hi) = rect
    points = []
    for i in range(n):
        u = (i + 0.5) / n
        v = (((i * g) % n) + 0.5) / n
        points.append((c_lo + u * (c_hi - c_lo), g_lo + v * (g_hi - g_lo)))
    return points


def _shrink(rect, center, domain):
    shrunk = []
    for (lo, hi), c, (d_lo, d_hi) in zip(rect, center, (domain.log2C, domain.log2gamma)):
        half = (hi - lo) / 4.0
        shrunk.append((max(d_lo, c - half), min(d_hi, c + half)))
    return tuple(shrunk)


def _better(candidate, incumbent):
    """Higher accuracy wins; ties prefer smaller C, then smaller gamma."""
    if incumbent is None:
        return True
    return (-candidate.cv_accuracy, candidate.log2C, candidate.log2gamma) < (
        -incumbent.cv_accuracy, incumbent.log2C, incumbent.log2gamma)


def tune(X, y, domain=None, folds=10, seed=0, alpha=5.0, opts=None,
         oversample_seed=None, n_jobs=None):
    """Search (C, gamma) by nested uniform designs; returns the best point seen."""
    domain = domain or SearchDomain()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    rect = (tuple(domain.log2C), tuple(domain.log2gamma))
    cache = {}
    trace = []
    best = None

    for stage, size in enumerate(domain.stage_sizes, 1):
        if stage > 1:
            rect = _shrink(rect, (best.log2C, best.log2gamma), domain)
        for index, (log2C, log2gamma) in enumerate(ud_points(size, rect)):
            key = (log2C, log2gamma)
            if key not in cache:
                hp = Hyperparams(C=2.0 ** log2C, gamma=2.0 ** log2gamma, alpha=alpha)
                kernel = KernelSpec.rbf(hp.gamma)

                def trainer(X_train, y_train, hp=hp, kernel=kernel):
                    return train_ssvm(X_train, y_train, hp, kernel=kernel, opts=opts)

                cache[key] = cv_accuracy(X, y, trainer, folds, seed,
                                         oversample_seed=oversample_seed, n_jobs=n_jobs)
            point = TuningPoint(stage, index, log2C, log2gamma, cache[key])
            trace.append(point)
            if _better(point, best):
                best = point
        logger.info("Tuning stage %d: best log2C=%.3f log2gamma=%.3f accuracy=%.4f",
                    stage, best.log2C, best.log2gamma, best.cv_accuracy)

    hp = Hyperparams(C=2.0 ** best.log2C, gamma=2.0 ** best.log2gamma, alpha=alpha)
    return TuningResult(hyperparams=hp, cv_accuracy=best.cv_accuracy, trace=trace)


def trace_frame(result):
    return pd.DataFrame([vars(p) for p in result.trace], columns=TRACE_COLUMNS)


def write_trace(result, path):
    trace_frame(result).to_csv(path, index=False, float_format="%.17g")
