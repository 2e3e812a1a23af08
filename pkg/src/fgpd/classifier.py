"""Feature assembly, z-scoring, RBF-kernel SVM trained by SMO, and grid search."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .stat_features import StatFeature

log = logging.getLogger(__name__)

STAT_DIM = 4
FISHER_DIM = 288
BLOB_DIM = 1
REAL, FAKE = 1, -1

KKT_TOL = 1e-3
MAX_ITER = 10_000
STD_GUARD = 1e-12
_TAU = 1e-12

DEFAULT_C_GRID = tuple(2.0**e for e in range(-5, 16, 2))
DEFAULT_GAMMA_GRID = tuple(2.0**e for e in range(-15, 4, 2))


def assemble_feature(stat, fv, blob: float, fisher_dim: int = FISHER_DIM) -> np.ndarray:
    """Concatenate ``[stat (4) | fisher (288) | blob count (1)]``."""
    stat = stat.as_array() if isinstance(stat, StatFeature) else np.asarray(stat, dtype=float).ravel()
    fv = np.asarray(fv, dtype=float).ravel()
    if stat.size != STAT_DIM:
        raise ValueError(f"statistical feature must have {STAT_DIM} values, got {stat.size}")
    if fv.size != fisher_dim:
        raise ValueError(f"Fisher vector must have {fisher_dim} values, got {fv.size}")
    return np.concatenate([stat, fv, [float(blob)]])


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale

    def invert(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.scale + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


def fit_standardizer(X) -> Standardizer:
    """Per-dimension mean and population std; near-constant dimensions keep scale 1."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 2:
        raise ValueError(f"need at least 2 training vectors, got {X.shape[0]}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return Standardizer(mean, np.where(std < STD_GUARD, 1.0, std))


def rbf_kernel(u, v, gamma: float) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    d = u - v
    return float(np.exp(-gamma * np.dot(d, d)))


def squared_distances(A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def rbf_matrix(A, B, gamma: float) -> np.ndarray:
    return np.exp(-gamma * squared_distances(A, B))


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray   # (n_sv, d)
    dual_coef: np.ndarray         # alpha_i * y_i
    bias: float
    gamma: float
    C: float
    n_iter: int = 0
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "gamma": self.gamma,
            "C": self.C,
            "n_iter": self.n_iter,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        sv = np.asarray(d["support_vectors"], dtype=float)
        return cls(sv.reshape(len(d["dual_coef"]), -1), np.asarray(d["dual_coef"], dtype=float),
                   float(d["bias"]), float(d["gamma"]), float(d["C"]),
                   int(d.get("n_iter", 0)), bool(d.get("converged", True)))


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    n_iter: int
    converged: bool
    objective: list = field(default_factory=list)


def dual_objective(alpha, y, K) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def smo(K: np.ndarray, y: np.ndarray, C, tol: float = KKT_TOL, max_iter: int = MAX_ITER,
        track_objective: bool = False) -> SmoResult:
    """Solve the soft-margin SVM dual on a precomputed kernel matrix.

    ``C`` is a scalar or a per-sample upper bound. Pairs are chosen by
    maximal KKT violation; optimization stops when the violation gap drops
    below ``tol``. Ties resolve to the lowest index, so the result is a
    deterministic function of the inputs.
    """
    n = y.shape[0]
    y = y.astype(float)
    C = np.broadcast_to(np.asarray(C, dtype=float), (n,))
    alpha = np.zeros(n)
    grad = -np.ones(n)        # gradient of 0.5 a'Qa - e'a with Q = yy'K
    diag = np.diag(K)
    objective = [0.0] if track_objective else []
    converged = False
    it = 0
    while it < max_iter:
        score = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        if score[i] - score[j] < tol:
            converged = True
            break
        it += 1

        yi, yj = y[i], y[j]
        quad = max(diag[i] + diag[j] - 2.0 * K[i, j], _TAU)
        # step along the feasible direction y_i e_i - y_j e_j
        t = (score[i] - score[j]) / quad
        t_max_i = C[i] - alpha[i] if yi > 0 else alpha[i]
        t_max_j = alpha[j] if yj > 0 else C[j] - alpha[j]
        t = min(t, t_max_i, t_max_j)
        d_ai, d_aj = yi * t, -yj * t
        old_i, old_j = alpha[i], alpha[j]
        alpha[i] = min(max(old_i + d_ai, 0.0), C[i])
        alpha[j] = min(max(old_j + d_aj, 0.0), C[j])
        d_ai, d_aj = alpha[i] - old_i, alpha[j] - old_j
        grad += y * (K[:, i] * (yi * d_ai) + K[:, j] * (yj * d_aj))
        if track_objective:
            objective.append(dual_objective(alpha, y, K))

    score = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(score[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = score[up].max() if up.any() else score[low].min()
        lo = score[low].min() if low.any() else hi
        bias = float((hi + lo) / 2.0)
    return SmoResult(alpha, bias, it, converged, objective)


def _check_training_inputs(X, y, C, gamma):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    if not set(np.unique(y)) <= {REAL, FAKE}:
        raise ValueError("labels must be +1 (real) or -1 (fake)")
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both classes")
    if C <= 0 or gamma <= 0:
        raise ValueError(f"C and gamma must be positive, got C={C}, gamma={gamma}")
    return X, y.astype(int)


def sample_bounds(y, C: float, class_weight: str = "none") -> np.ndarray:
    """Per-sample box constraint; ``"balanced"`` scales C by n / (2 * n_class)."""
    y = np.asarray(y)
    if class_weight == "none":
        return np.full(y.shape, float(C))
    if class_weight == "balanced":
        n = y.size
        w = {lab: n / (2.0 * np.sum(y == lab)) for lab in (REAL, FAKE)}
        return np.array([C * w[v] for v in y], dtype=float)
    raise ValueError(f"unknown class_weight {class_weight!r}")


def train_svm(X, y, C: float, gamma: float, seed: int = 0, tol: float = KKT_TOL,
              max_iter: int = MAX_ITER, class_weight: str = "none") -> SvmModel:
    """Fit an RBF soft-margin SVM.

    ``seed`` is accepted for interface symmetry; maximal-violation SMO has no
    random choices, so the fit is a pure function of the data.
    """
    X, y = _check_training_inputs(X, y, C, gamma)
    res = smo(rbf_matrix(X, X, gamma), y, sample_bounds(y, C, class_weight), tol, max_iter)
    if not res.converged:
        log.warning("SMO stopped after %d iterations without reaching tol=%g (C=%g, gamma=%g)",
                    max_iter, tol, C, gamma)
    sv = res.alpha > 0
    return SvmModel(X[sv].copy(), res.alpha[sv] * y[sv], res.bias, float(gamma), float(C),
                    res.n_iter, res.converged)


def decision_values(model: SvmModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.support_vectors.shape[1]:
        raise ValueError(f"feature dimension {X.shape[1]} != model dimension "
                         f"{model.support_vectors.shape[1]}")
    return rbf_matrix(X, model.support_vectors, model.gamma) @ model.dual_coef + model.bias


def decision_value(model: SvmModel, x) -> float:
    return float(decision_values(model, np.asarray(x, dtype=float)[None, :])[0])


def labels_from_scores(scores) -> np.ndarray:
    # f == 0 goes to the real class
    return np.where(np.asarray(scores) >= 0, REAL, FAKE)


def predict(model: SvmModel, X) -> np.ndarray:
    return labels_from_scores(decision_values(model, X))


def stratified_folds(y, folds: int, seed: int) -> np.ndarray:
    """Fold index per sample; each class is shuffled then dealt round-robin."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=int)
    for label in sorted(np.unique(y)):
        idx = np.flatnonzero(y == label)
        idx = idx[rng.permutation(len(idx))]
        assignment[idx] = np.arange(len(idx)) % folds
    return assignment


def grid_search(X, y, C_grid=DEFAULT_C_GRID, gamma_grid=DEFAULT_GAMMA_GRID, folds: int = 5,
                seed: int = 0, tol: float = KKT_TOL, max_iter: int = MAX_ITER,
                class_weight: str = "none"):
    """Stratified k-fold CV over (C, gamma); returns ``(C, gamma, cv_accuracy)``.

    Best accuracy wins; ties go to the smaller C, then the smaller gamma.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y).ravel().astype(int)
    C_grid = sorted(set(float(c) for c in C_grid))
    gamma_grid = sorted(set(float(g) for g in gamma_grid))
    if not C_grid or not gamma_grid:
        raise ValueError("grids must be non-empty")
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    for label in (REAL, FAKE):
        if np.sum(y == label) < folds:
            raise ValueError(f"class {label:+d} has fewer than {folds} samples")

    assignment = stratified_folds(y, folds, seed)
    d2 = squared_distances(X, X)
    best = None
    unconverged = 0
    for gamma in gamma_grid:
        K = np.exp(-gamma * d2)
        for C in C_grid:
            correct = 0
            for f in range(folds):
                tr, te = assignment != f, assignment == f
                res = smo(K[np.ix_(tr, tr)], y[tr], sample_bounds(y[tr], C, class_weight),
                          tol, max_iter)
                ay = res.alpha * y[tr]
                scores = K[np.ix_(te, tr)] @ ay + res.bias
                correct += int(np.sum(labels_from_scores(scores) == y[te]))
                unconverged += not res.converged
            acc = correct / len(y)
            key = (-acc, C, gamma)
            if best is None or key < best:
                best = key
    if unconverged:
        log.info("grid search: %d fold fits stopped at max_iter", unconverged)
    return best[1], best[2], -best[0]
