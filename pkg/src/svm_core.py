#!/usr/bin/env python3
"""
SVM core for feedwatch
Smooth SVM trained by Newton's method with Armijo backtracking, RBF/linear
kernels, and the 1-norm SVM solved as a linear program with a dense simplex
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1
NEWTON_RIDGE = 1e-8
MAX_BACKTRACKS = 30


class TrainingError(RuntimeError):
    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class SolverError(RuntimeError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    C: float
    gamma: float = 1.0
    alpha: float = 5.0

    def __post_init__(self):
        for name in ("C", "gamma", "alpha"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel '{self.kind}'")
        if self.kind == "rbf" and not (self.gamma is not None and self.gamma > 0):
            raise ValueError("RBF kernel needs gamma > 0")

    @classmethod
    def linear(cls):
        return cls("linear", None)

    @classmethod
    def rbf(cls, gamma):
        return cls("rbf", float(gamma))

    def to_dict(self):
        return {"type": self.kind, "gamma": self.gamma}


@dataclass(frozen=True)
class ConvergenceOpts:
    grad_tol: float = 1e-6
    max_iters: int = 100
    armijo_sigma: float = 0.05
    armijo_shrink: float = 0.5

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.armijo_sigma < 0.5:
            raise ValueError("armijo_sigma must lie in (0, 0.5)")
        if not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_shrink must lie in (0, 1)")


@dataclass
class Scaler:
    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, X):
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        stds = np.where((stds > 0) & np.isfinite(stds), stds, 1.0)
        return cls(means, stds)

    @classmethod
    def identity(cls, d):
        return cls(np.zeros(d), np.ones(d))

    def transform(self, X):
        return (X - self.means) / self.stds


@dataclass
class SsvmModel:
    kernel: KernelSpec
    coefficients: np.ndarray
    bias: float
    scaler: Scaler
    feature_indices: np.ndarray
    input_dim: int
    support_points: Optional[np.ndarray] = None
    training_meta: dict = field(default_factory=dict)

    def decision(self, x):
        return decision(self, x)

    def predict(self, x):
        return predict(self, x)


def smooth_plus(x, alpha):
    """p(x, a) = x + log(1 + exp(-a x)) / a, evaluated without overflow."""
    value = np.logaddexp(0.0, alpha * np.asarray(x, dtype=float)) / alpha
    return float(value) if np.ndim(value) == 0 else value


def _sigmoid(t):
    return np.exp(-np.logaddexp(0.0, -t))


def gram_matrix(A, B, kernel):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    inner = A @ B.T
    if kernel.kind == "linear":
        return inner
    sq = np.einsum("ij,ij->i", A, A)[:, None] + np.einsum("ij,ij->i", B, B)[None, :] - 2.0 * inner
    return np.exp(-kernel.gamma * np.maximum(sq, 0.0))


def ssvm_objective(z, K, y, C, alpha, hessian=True):
    """Objective, gradient and (optionally) Hessian of the smooth SVM.

    ``K`` is the n x m design: the standardized inputs for the linear kernel or
    the Gram matrix for a kernel model. ``z`` stacks the m coefficients and the
    bias. F(z) = C/2 sum p(r_i)^2 + |z|^2 / 2 with r = 1 - y (K u + b).
    """
    u, b = z[:-1], z[-1]
    r = 1.0 - y * (K @ u + b)
    p = np.logaddexp(0.0, alpha * r) / alpha
    F = 0.5 * C * float(p @ p) + 0.5 * float(z @ z)
    s = _sigmoid(alpha * r)
    weighted = y * p * s
    g = np.empty_like(z)
    g[:-1] = -C * (K.T @ weighted) + u
    g[-1] = -C * weighted.sum() + b
    if not hessian:
        return F, g, None
    curvature = C * (s * s + p * alpha * s * (1.0 - s))
    E = np.hstack([K, np.ones((K.shape[0], 1))])
    H = (E * curvature[:, None]).T @ E
    H[np.diag_indices_from(H)] += 1.0
    return F, g, H


def _check_labels(y):
    y = np.asarray(y)
    values = set(np.unique(y).tolist())
    if not values <= {-1, 1}:
        raise TrainingError(f"labels must be -1/+1, got {sorted(values)}")
    if len(values) < 2:
        raise TrainingError("training data holds a single class")
    return y.astype(float)


def train_ssvm(X, y, hp, kernel=None, opts=None, feature_indices=None, standardize=True):
    """Fit a smooth SVM; ``feature_indices`` picks the columns of X the model uses."""
    opts = opts or ConvergenceOpts()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_labels(y)
    if X.shape[0] != y.shape[0]:
        raise DimensionError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all(np.isfinite(X)):
        raise TrainingError("non-finite feature values")
    if kernel is None:
        kernel = KernelSpec.rbf(hp.gamma)
    indices = np.arange(X.shape[1]) if feature_indices is None else np.asarray(feature_indices, dtype=int)
    Xs = X[:, indices]
    scaler = Scaler.fit(Xs) if standardize else Scaler.identity(Xs.shape[1])
    Z = scaler.transform(Xs)
    K = Z if kernel.kind == "linear" else gram_matrix(Z, Z, kernel)

    z = np.zeros(K.shape[1] + 1)
    F, g, H = ssvm_objective(z, K, y, hp.C, hp.alpha)
    trace = [F]
    iteration = 0
    converged = False
    for iteration in range(opts.max_iters):
        if np.max(np.abs(g)) < opts.grad_tol:
            converged = True
            break
        H[np.diag_indices_from(H)] += NEWTON_RIDGE
        direction = np.linalg.solve(H, -g)
        slope = float(g @ direction)
        step = 1.0
        for _ in range(MAX_BACKTRACKS):
            F_new, _, _ = ssvm_objective(z + step * direction, K, y, hp.C, hp.alpha, hessian=False)
            if F_new <= F + opts.armijo_sigma * step * slope and F_new < F:
                break
            step *= opts.armijo_shrink
        else:
            if iteration == 0:
                raise TrainingError("no descent step found", iteration=iteration)
            logger.warning("Armijo backtracking failed at iteration %d; keeping best iterate", iteration)
            break
        z = z + step * direction
        F, g, H = ssvm_objective(z, K, y, hp.C, hp.alpha)
        trace.append(F)
        logger.debug("newton iter %d: F=%.10g step=%g |g|=%.3g", iteration, F, step, np.max(np.abs(g)))
    else:
        iteration = opts.max_iters
        converged = bool(np.max(np.abs(g)) < opts.grad_tol)

    meta = {
        "C": hp.C,
        "alpha": hp.alpha,
        "iterations": int(iteration),
        "final_gradient_norm": float(np.max(np.abs(g))),
        "converged": converged,
        "objective_trace": trace,
    }
    return SsvmModel(
        kernel=kernel,
        coefficients=z[:-1].copy(),
        bias=float(z[-1]),
        scaler=scaler,
        feature_indices=indices,
        input_dim=X.shape[1],
        support_points=None if kernel.kind == "linear" else Z,
        training_meta=meta,
    )


def decision(model, x):
    """Decision value f(x) for one input (scalar) or a batch of rows (vector)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.input_dim:
        raise DimensionError(f"model expects {model.input_dim} features, got {X.shape[1]}")
    Z = model.scaler.transform(X[:, model.feature_indices])
    if model.kernel.kind == "linear":
        f = Z @ model.coefficients + model.bias
    else:
        f = gram_matrix(Z, model.support_points, model.kernel) @ model.coefficients + model.bias
    return float(f[0]) if single else f


def predict(model, x):
    """Sign of the decision value; a tie at 0 counts as +1 (stalker)."""
    f = decision(model, x)
    if np.ndim(f) == 0:
        return 1 if f >= 0 else -1
    return np.where(f >= 0, 1, -1)


# ---- 1-norm SVM ----

@dataclass
class L1SvmResult:
    w: np.ndarray
    b: float
    slacks: np.ndarray
    objective: float
    pivots: int


def _bland_simplex(T, basis, n_vars, max_pivots, tol=1e-10):
    """Maximize over a feasible tableau in place; Bland's rule prevents cycling."""
    m = T.shape[0] - 1
    pivots = 0
    while True:
        reduced = T[-1, :n_vars]
        eligible = np.flatnonzero(reduced < -tol)
        if eligible.size == 0:
            return pivots
        if pivots >= max_pivots:
            raise SolverError(f"simplex iteration cap of {max_pivots} pivots exceeded")
        j = int(eligible[0])
        column = T[:m, j]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            raise SolverError("linear program is unbounded")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol * max(1.0, abs(best))]
        i = int(min(tied, key=lambda r: basis[r]))

        T[i] /= T[i, j]
        factors = T[:, j].copy()
        factors[i] = 0.0
        T -= np.outer(factors, T[i])
        T[:, j] = 0.0
        T[i, j] = 1.0
        basis[i] = j
        pivots += 1


def solve_l1svm(X, y, C, max_pivots=None):
    """1-norm SVM: min |w|_1 + C sum xi  s.t.  y_i (w.x_i + b) + xi_i >= 1, xi >= 0.

    The primal is written with split variables w = w+ - w-, b = b+ - b-. Its
    dual, max sum(lambda) s.t. A^T lambda <= c, starts feasible at the origin,
    so a single simplex phase suffices; the primal solution is read off the
    reduced costs of the dual's slack columns.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_labels(y)
    if not (math.isfinite(C) and C > 0):
        raise ValueError(f"C must be positive, got {C}")
    n, d = X.shape
    Yx = (y[:, None] * X).T
    M = np.vstack([Yx, -Yx, y[None, :], -y[None, :], np.eye(n)])
    c = np.concatenate([np.ones(2 * d), np.zeros(2), np.full(n, float(C))])
    m = M.shape[0]

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = M
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = c
    T[-1, :n] = -1.0
    basis = list(range(n, n + m))
    if max_pivots is None:
        max_pivots = 50 * (n + m)
    pivots = _bland_simplex(T, basis, n + m, max_pivots)

    primal = np.maximum(T[-1, n:n + m], 0.0)
    w = primal[:d] - primal[d:2 * d]
    b = float(primal[2 * d] - primal[2 * d + 1])
    slacks = primal[2 * d + 2:]
    logger.debug("1-norm SVM solved in %d pivots, objective %.10g", pivots, T[-1, -1])
    return L1SvmResult(w=w, b=b, slacks=slacks, objective=float(T[-1, -1]), pivots=pivots)


def train_l1svm(X, y, C):
    result = solve_l1svm(X, y, C)
    return result.w, result.b


# ---- model files ----

def _floats(values):
    return [float(v) for v in np.ravel(values)]


def save_model(model, path):
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kernel": model.kernel.to_dict(),
        "C": float(model.training_meta.get("C", 0.0)),
        "alpha": float(model.training_meta.get("alpha", 5.0)),
        "input_dim": int(model.input_dim),
        "feature_indices": [int(i) for i in model.feature_indices],
        "scaler": {"means": _floats(model.scaler.means), "stds": _floats(model.scaler.stds)},
        "coefficients": _floats(model.coefficients),
        "bias": float(model.bias),
        "training_meta": model.training_meta,
    }
    if model.support_points is not None:
        doc["support_points"] = [_floats(row) for row in model.support_points]
    # json writes floats with repr(), the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_model(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Model file not found at {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise TrainingError(f"{path} is not a model file: {e.msg}") from None
    required = ["schema_version", "kernel", "C", "alpha", "feature_indices",
                "scaler", "coefficients", "bias", "training_meta", "input_dim"]
    missing = [k for k in required if k not in doc]
    if missing:
        raise TrainingError(f"{path} is missing model fields {missing}")
    if doc["schema_version"] != MODEL_SCHEMA_VERSION:
        raise TrainingError(f"unsupported model schema {doc['schema_version']}")
    kernel = KernelSpec(doc["kernel"]["type"], doc["kernel"].get("gamma"))
    indices = np.asarray(doc["feature_indices"], dtype=int)
    coefficients = np.asarray(doc["coefficients"], dtype=float)
    support = doc.get("support_points")
    if kernel.kind == "rbf":
        if support is None:
            raise TrainingError("kernel model without support_points")
        support = np.asarray(support, dtype=float).reshape(len(support), indices.size)
        expected = support.shape[0]
    else:
        support = None
        expected = indices.size
    if coefficients.size != expected:
        raise TrainingError(f"model has {coefficients.size} coefficients, expected {expected}")
    return SsvmModel(
        kernel=kernel,
        coefficients=coefficients,
        bias=float(doc["bias"]),
        scaler=Scaler(np.asarray(doc["scaler"]["means"], dtype=float),
                      np.asarray(doc["scaler"]["stds"], dtype=float)),
        feature_indices=indices,
        input_dim=int(doc["input_dim"]),
        support_points=support,
        training_meta=doc["training_meta"],
    )
