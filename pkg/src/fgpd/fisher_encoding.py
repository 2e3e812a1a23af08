"""Diagonal-covariance GMM fitted by EM, and Fisher-vector encoding against it."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

log = logging.getLogger(__name__)

N_COMPONENTS = 16
VAR_FLOOR = 1e-6
EM_TOL = 1e-6
EM_MAX_ITER = 200
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray      # (K,)
    means: np.ndarray        # (K, D)
    variances: np.ndarray    # (K, D)
    seed: int = 0
    n_iter: int = 0
    log_likelihood: float = float("nan")   # mean per-point log-likelihood at the final parameters
    converged: bool = False
    history: tuple = field(default=(), repr=False, compare=False)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_parameters(self) -> int:
        k, d = self.means.shape
        return (k - 1) + 2 * k * d

    def to_dict(self) -> dict:
        return {
            "K": self.n_components,
            "D": self.dim,
            "seed": self.seed,
            "n_iter": self.n_iter,
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GmmModel":
        model = cls(
            weights=np.asarray(d["weights"], dtype=float),
            means=np.asarray(d["means"], dtype=float).reshape(d["K"], d["D"]),
            variances=np.asarray(d["variances"], dtype=float).reshape(d["K"], d["D"]),
            seed=int(d.get("seed", 0)),
            n_iter=int(d.get("n_iter", 0)),
            log_likelihood=float(d.get("log_likelihood", float("nan"))),
            converged=bool(d.get("converged", False)),
        )
        return model


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :] if x.size else x.reshape(0, 0)
    if x.ndim != 2:
        raise ValueError(f"expected an (n, D) descriptor array, got shape {x.shape}")
    return x


def _component_log_density(x, weights, means, variances):
    """log(w_k) + log N(x_i | mu_k, diag(var_k)), shape (n, K)."""
    diff = x[:, None, :] - means[None, :, :]
    maha = np.sum(diff * diff / variances[None, :, :], axis=2)
    log_det = np.sum(np.log(variances), axis=1)
    return np.log(weights)[None, :] - 0.5 * (x.shape[1] * _LOG_2PI + log_det[None, :] + maha)


def log_responsibilities(model: GmmModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Per-point log posteriors ``(n, K)`` and per-point log-likelihoods ``(n,)``."""
    x = _as_2d(x)
    joint = _component_log_density(x, model.weights, model.means, model.variances)
    point_ll = logsumexp(joint, axis=1)
    return joint - point_ll[:, None], point_ll


def responsibilities(model: GmmModel, x) -> np.ndarray:
    return np.exp(log_responsibilities(model, x)[0])


def mean_log_likelihood(model: GmmModel, x) -> float:
    return float(np.mean(log_responsibilities(model, x)[1]))


def kmeans_pp_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def _initial_parameters(x, k, rng, var_floor):
    centers = kmeans_pp_centers(x, k, rng)
    assign = np.argmin(((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1)
    global_var = np.maximum(x.var(axis=0), var_floor)
    weights = np.empty(k)
    variances = np.empty_like(centers)
    for j in range(k):
        members = x[assign == j]
        weights[j] = max(len(members), 1)
        variances[j] = members.var(axis=0) if len(members) > 1 else global_var
    return weights / weights.sum(), centers, np.maximum(variances, var_floor)


def fit_gmm(descriptors, k: int = N_COMPONENTS, seed: int = 0, tol: float = EM_TOL,
            max_iter: int = EM_MAX_ITER, var_floor: float = VAR_FLOOR) -> GmmModel:
    """Fit a K-component diagonal GMM with EM from a seeded k-means++ start.

    Stops when the mean per-point log-likelihood improves by less than
    ``tol`` or after ``max_iter`` E-steps. ``history`` holds the mean
    log-likelihood of every visited parameter set.
    """
    if k < 1:
        raise ValueError(f"component count must be >= 1, got {k}")
    x = _as_2d(descriptors)
    n = x.shape[0]
    if n < 10 * k:
        raise ValueError(f"need at least {10 * k} descriptors for K={k}, got {n}")

    rng = np.random.default_rng(seed)
    weights, means, variances = _initial_parameters(x, k, rng, var_floor)
    history = []
    converged = False
    for it in range(max_iter):
        joint = _component_log_density(x, weights, means, variances)
        point_ll = logsumexp(joint, axis=1)
        ll = float(point_ll.mean())
        if history and ll - history[-1] < tol:
            history.append(ll)
            converged = True
            break
        history.append(ll)
        if it == max_iter - 1:
            break
        resp = np.exp(joint - point_ll[:, None])
        nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
        weights = nk / nk.sum()
        means = (resp.T @ x) / nk[:, None]
        diff = x[:, None, :] - means[None, :, :]
        variances = np.einsum("nk,nkd->kd", resp, diff * diff) / nk[:, None]
        variances = np.maximum(variances, var_floor)
    if not converged:
        log.info("EM stopped after %d iterations without reaching tol=%g", max_iter, tol)
    return GmmModel(weights, means, variances, seed=seed, n_iter=len(history),
                    log_likelihood=history[-1], converged=converged, history=tuple(history))


def bic(model: GmmModel, descriptors) -> float:
    """Bayesian information criterion; lower is better."""
    x = _as_2d(descriptors)
    n = x.shape[0]
    if n == 0:
        raise ValueError("BIC needs at least one descriptor")
    total_ll = float(np.sum(log_responsibilities(model, x)[1]))
    return model.n_parameters * np.log(n) - 2.0 * total_ll


def fisher_vector_raw(model: GmmModel, descriptors) -> np.ndarray:
    """Fisher-information whitened gradients w.r.t. means then variances (2*K*D)."""
    x = _as_2d(descriptors)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot encode an empty descriptor set")
    gamma = responsibilities(model, x)                       # (n, K)
    sigma = np.sqrt(model.variances)
    z = (x[:, None, :] - model.means[None, :, :]) / sigma[None, :, :]   # (n, K, D)
    mean_block = np.einsum("nk,nkd->kd", gamma, z)
    var_block = np.einsum("nk,nkd->kd", gamma, z * z - 1.0)
    mean_block /= n * np.sqrt(model.weights)[:, None]
    var_block /= n * np.sqrt(2.0 * model.weights)[:, None]
    return np.concatenate([mean_block.ravel(), var_block.ravel()])


def improved_normalization(fv: np.ndarray) -> np.ndarray:
    """Signed square root followed by global L2 normalization."""
    fv = np.sign(fv) * np.sqrt(np.abs(fv))
    norm = np.linalg.norm(fv)
    if norm == 0:
        return fv
    return fv / norm


def fisher_vector(model: GmmModel, descriptors, normalize: bool = True) -> np.ndarray:
    fv = fisher_vector_raw(model, descriptors)
    return improved_normalization(fv) if normalize else fv
