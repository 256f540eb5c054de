"""Soft-margin kernel SVM on precomputed Gram matrices, solved by SMO."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from .kernels import KernelMatrix, psd_repair

TAU = 1e-12


class SvmError(ValueError):
    pass


@dataclass
class SvmModel:
    dual_coef: np.ndarray          # alpha_i * y_i over support vectors
    bias: float
    support: np.ndarray            # indices into the training set
    support_ids: list
    C: float
    kernel_kind: str | None = None
    alpha: np.ndarray = field(default=None, repr=False)
    n_iter: int = 0
    converged: bool = True


def _check_labels(labels) -> np.ndarray:
    y = np.asarray(labels, dtype=float).reshape(-1)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SvmError("labels must be +1/-1")
    if len(np.unique(y)) < 2:
        raise SvmError("training labels contain a single class")
    return y


def dual_objective(alpha, K, labels) -> float:
    """``sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`` (to be maximized)."""
    a = np.asarray(alpha, dtype=float)
    y = np.asarray(labels, dtype=float)
    ay = a * y
    return float(a.sum() - 0.5 * ay @ np.asarray(K, dtype=float) @ ay)


def smo_train(K, labels, C: float = 1.0, tol: float = 1e-3, max_iter: int | None = None,
              sample_ids=None) -> SvmModel:
    """Sequential minimal optimization with maximal-violating-pair selection.

    Ties in the pair selection go to the lowest index, so the result depends only
    on the inputs and their order.
    """
    kind = K.kind if isinstance(K, KernelMatrix) else None
    if isinstance(K, KernelMatrix):
        sample_ids = sample_ids or K.sample_ids
        K = K.values
    K = np.asarray(K, dtype=float)
    y = _check_labels(labels)
    n = len(y)
    if K.shape != (n, n):
        raise SvmError(f"kernel shape {K.shape} does not match {n} labels")
    if C <= 0:
        raise SvmError("C must be positive")
    max_iter = max_iter if max_iter is not None else max(10_000_000 // max(n, 1), 100 * n)
    Q = np.outer(y, y) * K
    qd = np.diag(Q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    it = 0
    converged = False
    while it < max_iter:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        viol = -y * grad
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, viol, -np.inf)))
        j = int(np.argmin(np.where(low, viol, np.inf)))
        if viol[i] - viol[j] < tol:
            converged = True
            break
        it += 1
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = qd[i] + qd[j] + 2 * Q[i, j]
            delta = (-grad[i] - grad[j]) / (quad if quad > 0 else TAU)
            diff = ai - aj
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            quad = qd[i] + qd[j] - 2 * Q[i, j]
            delta = (grad[i] - grad[j]) / (quad if quad > 0 else TAU)
            total = ai + aj
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
            elif alpha[j] < 0:
                alpha[j], alpha[i] = 0.0, total
            if total > C:
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, total
        grad += Q[:, i] * (alpha[i] - ai) + Q[:, j] * (alpha[j] - aj)
    if not converged:
        warnings.warn(f"SMO stopped after {it} iterations without meeting tol={tol}",
                      ConvergenceWarning, stacklevel=2)
    bias = _bias(alpha, grad, y, C)
    support = np.flatnonzero(alpha > 0)
    ids = list(sample_ids) if sample_ids else [str(i) for i in range(n)]
    return SvmModel(alpha[support] * y[support], bias, support, [ids[s] for s in support],
                    C, kind, alpha, it, converged)


def _bias(alpha, grad, y, C) -> float:
    yg = y * grad
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = yg[free].mean()
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = 0.5 * (ub + lb)
    return float(-rho)


def decision_function(model: SvmModel, cross, col_ids=None) -> np.ndarray:
    """Decision values for kernel rows ``K(test_i, train_j)``.

    Columns are matched to support vectors by id when ``col_ids`` (or a
    :class:`KernelMatrix` with ``col_ids``) is given, otherwise by position.
    """
    if isinstance(cross, KernelMatrix):
        col_ids = col_ids or cross.col_ids or cross.sample_ids
        cross = cross.values
    cross = np.atleast_2d(np.asarray(cross, dtype=float))
    if col_ids is not None:
        where = {str(c): k for k, c in enumerate(col_ids)}
        missing = [s for s in model.support_ids if str(s) not in where]
        if missing:
            raise SvmError(f"kernel columns lack support vectors {missing[:5]}")
        cols = np.array([where[str(s)] for s in model.support_ids], dtype=int)
    else:
        cols = model.support
        if cols.size and cross.shape[1] <= cols.max():
            raise SvmError("kernel has fewer columns than the training set")
    return cross[:, cols] @ model.dual_coef + model.bias


def predict(model: SvmModel, cross, col_ids=None) -> np.ndarray:
    """Sign of the decision function; ties go to +1."""
    return np.where(decision_function(model, cross, col_ids) >= 0, 1, -1)


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold index per sample; classes are shuffled then dealt round-robin."""
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if k < 2:
        raise SvmError("need at least 2 folds")
    if counts.min() < k:
        raise SvmError(f"class {classes[counts.argmin()]!r} has fewer than {k} members")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in classes])
    folds = np.empty(len(labels), dtype=int)
    folds[order] = np.arange(len(order)) % k
    return folds


def evaluate(predictions, truth) -> dict:
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise SvmError("predictions and truth differ in length")
    out = {"accuracy": float(np.mean(predictions == truth)) if truth.size else 0.0,
           "n": int(truth.size), "classes": {}}
    for c in (1, -1):
        tp = int(np.sum((predictions == c) & (truth == c)))
        fp = int(np.sum((predictions == c) & (truth != c)))
        fn = int(np.sum((predictions != c) & (truth == c)))
        out["classes"][str(c)] = {
            "precision": tp / (tp + fp) if tp + fp else 0.0,
            "recall": tp / (tp + fn) if tp + fn else 0.0,
            "tp": tp, "fp": fp, "fn": fn,
        }
    out["confusion"] = {f"{t}->{p}": int(np.sum((truth == t) & (predictions == p)))
                        for t in (1, -1) for p in (1, -1)}
    return out


@dataclass
class CvReport:
    fold_accuracy: list
    folds: np.ndarray
    seed: int
    kernel_kind: str | None

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracy))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_accuracy))


def cross_validate(K: KernelMatrix, labels, k: int = 5, seed: int = 0, C: float = 1.0,
                   tol: float = 1e-3, psd_policy: str | None = None, folds=None) -> CvReport:
    """Stratified k-fold accuracy; the training block of each fold is PSD-repaired."""
    y = np.asarray(labels)
    folds = stratified_kfold(y, k, seed) if folds is None else np.asarray(folds)
    kind = K.kind if isinstance(K, KernelMatrix) else None
    values = K.values if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)
    accs = []
    for f in range(int(folds.max()) + 1):
        tr, te = np.flatnonzero(folds != f), np.flatnonzero(folds == f)
        block = KernelMatrix(values[np.ix_(tr, tr)], kind or "hamiltonian_fidelity")
        if kind is not None or psd_policy is not None:
            block = psd_repair(block, psd_policy)
        model = smo_train(block.values, y[tr], C=C, tol=tol)
        pred = predict(model, values[np.ix_(te, tr)])
        accs.append(evaluate(pred, y[te])["accuracy"])
    return CvReport(accs, folds, seed, kind)


class SMOClassifier(ClassifierMixin, BaseEstimator):
    """Binary SVM on a precomputed kernel (``fit(K_train, y)``, ``predict(K_test_train)``)."""

    def __init__(self, C=1.0, tol=1e-3, max_iter=None):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise SvmError("SMOClassifier is binary only")
        signed = np.where(y == self.classes_[1], 1.0, -1.0)
        values = X.values if isinstance(X, KernelMatrix) else np.asarray(X, dtype=float)
        self.model_ = smo_train(values, signed, C=self.C, tol=self.tol, max_iter=self.max_iter)
        self.n_features_in_ = values.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        values = X.values if isinstance(X, KernelMatrix) else np.asarray(X, dtype=float)
        return decision_function(self.model_, values)

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, self.classes_[1], self.classes_[0])
