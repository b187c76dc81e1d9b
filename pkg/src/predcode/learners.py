"""L2-regularized logistic regression and linear SVM, trained in the primal/dual.

Both minimize ``0.5 * ||w||^2 + C * sum(loss(y_i, w.x_i + b))`` with an
unregularized bias:

* logistic regression: ``log(1 + exp(-y f))``, solved by a truncated Newton
  (conjugate gradient) method with Armijo backtracking;
* SVM: hinge ``max(0, 1 - y f)``, solved through its dual with SMO
  (second-order working-set selection), so the bias is exact.
"""

from __future__ import annotations

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .features import SparseVector, vectors_to_csr


class AlgorithmChoice(str, Enum):
    SVM = "svm"
    LOGISTIC_REGRESSION = "logistic_regression"

    @classmethod
    def parse(cls, value) -> "AlgorithmChoice":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        key = {"lr": "logistic_regression", "logistic": "logistic_regression"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown algorithm {value!r} (expected svm or logistic_regression)") from None

    def __str__(self):
        return self.value


DEFAULT_C = 1.0
DEFAULT_MAX_ITER = 1000
DEFAULT_TOL = {
    AlgorithmChoice.LOGISTIC_REGRESSION: 1e-4,  # gradient norm
    AlgorithmChoice.SVM: 1e-3,                  # relative objective change per epoch
}
# SMO stops early once the maximal KKT violation drops below this.
SVM_KKT_EPS = 1e-3
_TAU = 1e-12


def default_tol(algorithm) -> float:
    return DEFAULT_TOL[AlgorithmChoice.parse(algorithm)]


@dataclass(frozen=True)
class TrainingDiagnostics:
    objective: float
    # gradient norm for LR, duality gap for SVM
    optimality: float
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class TrainedModel:
    weights: np.ndarray
    bias: float
    algorithm: AlgorithmChoice
    C: float
    diagnostics: TrainingDiagnostics

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TrainedModel):
            return NotImplemented
        return (self.weights.dtype == other.weights.dtype
                and self.weights.tobytes() == other.weights.tobytes()
                and self.bias == other.bias and self.algorithm == other.algorithm
                and self.C == other.C and self.diagnostics == other.diagnostics)

    __hash__ = None


class TrainingError(ValueError):
    pass


def _as_matrix(X, n_features: int | None) -> sp.csr_matrix:
    if sp.issparse(X):
        X = sp.csr_matrix(X, dtype=float)
        if n_features is not None and X.shape[1] != n_features:
            raise TrainingError(f"matrix has {X.shape[1]} columns, expected {n_features}")
        return X
    vectors = list(X)
    if n_features is None:
        n_features = 1 + max((max(v.entries, default=-1) for v in vectors), default=-1)
    return vectors_to_csr(vectors, n_features)


def _as_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.dtype == bool:
        y = np.where(y, 1.0, -1.0)
    else:
        y = y.astype(float)
    if y.shape != (n,):
        raise TrainingError(f"expected {n} labels, got shape {y.shape}")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise TrainingError("labels must be +1 or -1")
    return y


def _check_finite(*arrays):
    for a in arrays:
        data = a.data if sp.issparse(a) else np.asarray(a)
        if not np.all(np.isfinite(data)):
            raise TrainingError("non-finite values encountered")


def objective_and_gradient(weights, bias: float, X, y, algorithm, C: float):
    """Exact objective and (sub)gradient at ``(weights, bias)``.

    The gradient is returned as one array of length ``d + 1`` with the bias
    component last. For the hinge loss a margin of exactly 1 takes the zero
    branch.
    """
    algorithm = AlgorithmChoice.parse(algorithm)
    w = np.asarray(weights, dtype=float)
    X = _as_matrix(X, w.shape[0])
    y = _as_labels(y, X.shape[0])
    _check_finite(w, [bias], X)
    margins = y * (X @ w + bias)
    if algorithm is AlgorithmChoice.LOGISTIC_REGRESSION:
        loss = np.logaddexp(0.0, -margins).sum()
        coef = -y * expit(-margins)
    else:
        active = margins < 1.0
        loss = np.sum(1.0 - margins[active])
        coef = np.where(active, -y, 0.0)
    f = 0.5 * float(w @ w) + C * float(loss)
    grad = np.empty(w.shape[0] + 1)
    grad[:-1] = w + C * (X.T @ coef)
    grad[-1] = C * coef.sum()
    return f, grad


def train(vectors, labels, algorithm, C: float = DEFAULT_C, tol: float | None = None,
          max_iterations: int = DEFAULT_MAX_ITER, n_features: int | None = None) -> TrainedModel:
    """Fit a linear model.

    ``vectors`` is a sequence of SparseVector or a sparse matrix;
    ``n_features`` fixes the weight length (the reduced vocabulary size).
    The convergence flag is set only if the stopping rule fired before
    ``max_iterations``.
    """
    algorithm = AlgorithmChoice.parse(algorithm)
    if not C > 0 or not math.isfinite(C):
        raise TrainingError(f"C must be a positive real, got {C}")
    if tol is None:
        tol = DEFAULT_TOL[algorithm]
    if not tol > 0:
        raise TrainingError(f"tolerance must be positive, got {tol}")
    if max_iterations < 1:
        raise TrainingError(f"max_iterations must be >= 1, got {max_iterations}")
    X = _as_matrix(vectors, n_features)
    if X.shape[1] == 0:
        raise TrainingError("empty feature space")
    y = _as_labels(labels, X.shape[0])
    if not (np.any(y > 0) and np.any(y < 0)):
        raise TrainingError("training data must contain both classes")
    _check_finite(X)
    if algorithm is AlgorithmChoice.LOGISTIC_REGRESSION:
        w, b, diag = _train_lr(X, y, C, tol, max_iterations)
    else:
        w, b, diag = _train_svm(X, y, C, tol, max_iterations)
    if not (np.all(np.isfinite(w)) and math.isfinite(b)):
        raise TrainingError("non-finite values encountered during training")
    return TrainedModel(weights=w, bias=b, algorithm=algorithm, C=float(C), diagnostics=diag)


# logistic regression

def _conjugate_gradient(hess_vec, rhs, rtol, max_steps):
    x = np.zeros_like(rhs)
    r = rhs.copy()
    p = r.copy()
    rr = r @ r
    stop = (rtol * math.sqrt(rr)) ** 2
    for _ in range(max_steps):
        if rr <= stop:
            break
        hp = hess_vec(p)
        php = p @ hp
        if php <= 0:
            break
        alpha = rr / php
        x += alpha * p
        r -= alpha * hp
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def _train_lr(X, y, C, tol, max_iter):
    n, d = X.shape
    XT = X.T.tocsr()
    theta = np.zeros(d + 1)

    def evaluate(theta):
        z = X @ theta[:-1] + theta[-1]
        m = y * z
        f = 0.5 * theta[:-1] @ theta[:-1] + C * np.logaddexp(0.0, -m).sum()
        s = expit(-m)
        coef = -y * s
        g = np.empty(d + 1)
        g[:-1] = theta[:-1] + C * (XT @ coef)
        g[-1] = C * coef.sum()
        return f, g, s * (1.0 - s)

    f, g, curv = evaluate(theta)
    gnorm = float(np.linalg.norm(g))
    it = 0
    converged = gnorm <= tol
    while not converged and it < max_iter:
        it += 1
        cw = C * curv

        def hess_vec(v, cw=cw):
            u = cw * (X @ v[:-1] + v[-1])
            out = np.empty(d + 1)
            out[:-1] = v[:-1] + XT @ u
            out[-1] = u.sum()
            return out

        step = _conjugate_gradient(hess_vec, -g, min(0.5, math.sqrt(gnorm)), 2 * (d + 1))
        slope = g @ step
        if slope >= 0:
            step, slope = -g, -gnorm ** 2
        t = 1.0
        while True:
            cand = theta + t * step
            f_new, g_new, curv_new = evaluate(cand)
            if f_new <= f + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                break
        if f_new > f:
            break
        theta, f, g, curv = cand, f_new, g_new, curv_new
        gnorm = float(np.linalg.norm(g))
        converged = gnorm <= tol
    diag = TrainingDiagnostics(objective=float(f), optimality=gnorm, iterations=it,
                               converged=bool(converged))
    return theta[:-1].copy(), float(theta[-1]), diag


# SVM

class _Gram:
    """Rows of K = X X^T; dense when small, otherwise computed on demand with an LRU cache."""

    def __init__(self, X: sp.csr_matrix, dense_limit: int = 6000, cache_rows: int = 2000):
        self.X = X
        n = X.shape[0]
        if n <= dense_limit:
            self.K = (X @ X.T).toarray()
            self.diag = np.diag(self.K).copy()
        else:
            self.K = None
            self.diag = np.asarray(X.multiply(X).sum(axis=1)).ravel()
            self._cache: OrderedDict = OrderedDict()
            self._cache_rows = cache_rows

    def row(self, i: int) -> np.ndarray:
        if self.K is not None:
            return self.K[i]
        r = self._cache.get(i)
        if r is None:
            r = (self.X @ self.X[i].T).toarray().ravel()
            self._cache[i] = r
            if len(self._cache) > self._cache_rows:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(i)
        return r


def _svm_rho(alpha, G, y, C):
    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yG[free].mean())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2)


def _svm_primal_dual(alpha, G, y, C):
    u = y * (G + 1.0)  # sum_t alpha_t y_t K_it
    w2 = float(alpha @ (G + 1.0))
    b = -_svm_rho(alpha, G, y, C)
    hinge = np.maximum(0.0, 1.0 - y * (u + b)).sum()
    primal = 0.5 * w2 + C * hinge
    dual = alpha.sum() - 0.5 * w2
    return primal, dual, b


def _train_svm(X, y, C, tol, max_iter):
    n = X.shape[0]
    gram = _Gram(X)
    QD = gram.diag
    alpha = np.zeros(n)
    G = -np.ones(n)
    pos = y > 0
    neg = ~pos
    primal_prev, _, _ = _svm_primal_dual(alpha, G, y, C)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        optimal = False
        for _ in range(n):
            below_c = alpha < C
            above_0 = alpha > 0
            up = (pos & below_c) | (neg & above_0)
            low = (pos & above_0) | (neg & below_c)
            minus_yG = -y * G
            cand = np.where(up, minus_yG, -np.inf)
            i = int(np.argmax(cand))
            g_max = cand[i]
            low_vals = np.where(low, -minus_yG, -np.inf)
            if g_max + low_vals.max() < SVM_KKT_EPS:
                optimal = True
                break
            Ki = gram.row(i)
            grad_diff = g_max - minus_yG
            quad = QD[i] + QD - 2.0 * Ki
            quad = np.where(quad > 0, quad, _TAU)
            obj = np.where(low & (grad_diff > 0), -(grad_diff * grad_diff) / quad, np.inf)
            j = int(np.argmin(obj))
            if not np.isfinite(obj[j]):
                optimal = True
                break
            Kj = gram.row(j)
            yi, yj = y[i], y[j]
            ai_old, aj_old = alpha[i], alpha[j]
            ai, aj = _smo_pair(ai_old, aj_old, yi, yj, G[i], G[j], QD[i], QD[j], Ki[j], C)
            alpha[i], alpha[j] = ai, aj
            G += y * (yi * (ai - ai_old) * Ki + yj * (aj - aj_old) * Kj)
        primal, _, _ = _svm_primal_dual(alpha, G, y, C)
        if optimal or abs(primal_prev - primal) <= tol * max(abs(primal_prev), 1e-12):
            converged = True
            break
        primal_prev = primal
    coef = alpha * y
    w = np.asarray(X.T @ coef).ravel()
    _, dual, b = _svm_primal_dual(alpha, G, y, C)
    f, _ = objective_and_gradient(w, b, X, y, AlgorithmChoice.SVM, C)
    diag = TrainingDiagnostics(objective=float(f), optimality=float(max(f - dual, 0.0)),
                               iterations=it, converged=converged)
    return w, b, diag


def _smo_pair(ai, aj, yi, yj, Gi, Gj, Kii, Kjj, Kij, C):
    """Analytic two-variable update (box [0, C], equality y.alpha fixed)."""
    quad = Kii + Kjj - 2.0 * Kij
    if quad <= 0:
        quad = _TAU
    if yi != yj:
        delta = (-Gi - Gj) / quad
        diff = ai - aj
        ai += delta
        aj += delta
        if diff > 0:
            if aj < 0:
                aj = 0.0
                ai = diff
        elif ai < 0:
            ai = 0.0
            aj = -diff
        if diff > 0:
            if ai > C:
                ai = C
                aj = C - diff
        elif aj > C:
            aj = C
            ai = C + diff
    else:
        delta = (Gi - Gj) / quad
        total = ai + aj
        ai -= delta
        aj += delta
        if total > C:
            if ai > C:
                ai = C
                aj = total - C
        elif aj < 0:
            aj = 0.0
            ai = total
        if total > C:
            if aj > C:
                aj = C
                ai = total - C
        elif ai < 0:
            ai = 0.0
            aj = total
    return ai, aj


# scoring

def decision_function(model: TrainedModel, X) -> np.ndarray:
    X = _as_matrix(X, model.n_features)
    return X @ model.weights + model.bias


def score(model: TrainedModel, vector: SparseVector) -> float:
    """Raw margin ``w.x + b``."""
    total = model.bias
    d = model.n_features
    for idx, val in vector.entries.items():
        if not 0 <= idx < d:
            raise IndexError(f"feature index {idx} out of bounds for {d} features")
        total += model.weights[idx] * val
    return float(total)


def write_model_csv(model: TrainedModel, path, tokens: Sequence[str] | None = None) -> None:
    """Audit dump: ``#``-prefixed bias/diagnostic lines, then index, token, weight."""
    diag = model.diagnostics
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# algorithm={model.algorithm.value} C={model.C!r} bias={model.bias!r}\n")
        fh.write(f"# objective={diag.objective!r} optimality={diag.optimality!r} "
                 f"iterations={diag.iterations} converged={diag.converged}\n")
        writer = csv.writer(fh)
        writer.writerow(["index", "token", "weight"])
        for i, wi in enumerate(model.weights):
            writer.writerow([i, tokens[i] if tokens is not None else "", repr(float(wi))])
