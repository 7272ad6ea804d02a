"""Soft-margin binary SVM with an RBF kernel, trained by SMO.

Conventions, fixed so that independent reimplementations agree:

* kernel        K(x, z) = exp(-||x - z||^2 / s^2)  (the scale s divides coordinates)
* dual problem  maximize  W(a) = sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij
                subject to 0 <= a_i <= C, sum(a_i y_i) = 0
* working pair  maximal-violating pair, deterministic first-index tie breaking
* prediction    f(x) = sum_i a_i y_i K(x_i, x) + b; ties at f = 0 predict -1

The solver maintains the margin vector g_i = sum_j a_j y_j K_ij and the
residuals r_i = y_i - g_i. Optimality holds when max r over the "up" set
exceeds min r over the "down" set by at most ``tol``; the bias is the midpoint
of that interval, so every KKT condition holds within tol/2 at convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_KKT_TOL = 1e-3
DEFAULT_ALPHA_EPS = 1e-8
DEFAULT_MAX_PASSES = 100_000

_REFRESH_EVERY = 512  # full gradient recompute cadence, kills FP drift


class SvmError(ValueError):
    pass


@dataclass(frozen=True)
class SvmHyperparams:
    box_constraint: float  # C
    kernel_scale: float  # s

    def __post_init__(self) -> None:
        if not (self.box_constraint > 0 and np.isfinite(self.box_constraint)):
            raise SvmError(f"box constraint must be positive, got {self.box_constraint}")
        if not (self.kernel_scale > 0 and np.isfinite(self.kernel_scale)):
            raise SvmError(f"kernel scale must be positive, got {self.kernel_scale}")


@dataclass
class SvmModel:
    support_vectors: np.ndarray  # m x d feature rows with a_i > alpha_eps
    dual_coef: np.ndarray  # a_i * y_i per support vector
    bias: float
    hyperparams: SvmHyperparams
    n_features: int
    converged: bool
    n_iter: int
    dual_objective: float
    sv_index: np.ndarray | None = None  # support-vector positions among the training rows


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of a and rows of b."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    d2 = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def rbf_kernel(x: np.ndarray, z: np.ndarray, s: float) -> float:
    """K(x, z) = exp(-||x - z||^2 / s^2) for two feature vectors."""
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if x.shape != z.shape:
        raise SvmError(f"kernel inputs have lengths {x.size} and {z.size}")
    if not s > 0:
        raise SvmError(f"kernel scale must be positive, got {s}")
    diff = x - z
    return float(np.exp(-(diff @ diff) / (s * s)))


def rbf_gram(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    return np.exp(-squared_distances(a, b) / (s * s))


def _smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int) -> tuple[np.ndarray, float, bool, int]:
    """Maximal-violating-pair SMO on a precomputed kernel matrix.

    Returns (alpha, bias, converged, iterations). Each iteration solves the
    two-variable subproblem for the pair analytically, so the dual objective
    never decreases and the final iterate is also the best one.
    """
    n = len(y)
    alpha = np.zeros(n)
    g = np.zeros(n)  # g_i = sum_j alpha_j y_j K_ij
    pos = y > 0
    neg = ~pos
    snap = 1e-12 * C
    it = 0
    converged = False
    neg_inf = -np.inf
    while it < max_iter:
        it += 1
        if it % _REFRESH_EVERY == 0:
            g = (alpha * y) @ K
        r = y - g
        up = (pos & (alpha < C)) | (neg & (alpha > 0))
        low = (neg & (alpha < C)) | (pos & (alpha > 0))
        r_up = np.where(up, r, neg_inf)
        r_low = np.where(low, r, -neg_inf)
        i = int(np.argmax(r_up))
        j = int(np.argmin(r_low))
        if r_up[i] - r_low[j] <= tol:
            converged = True
            break

        yi, yj = y[i], y[j]
        ai, aj = alpha[i], alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0.0:
            quad = 1e-12
        aj_new = aj + yj * (r[j] - r[i]) / quad
        if yi != yj:
            lo = max(0.0, aj - ai)
            hi = min(C, C + aj - ai)
        else:
            lo = max(0.0, ai + aj - C)
            hi = min(C, ai + aj)
        aj_new = min(max(aj_new, lo), hi)
        ai_new = ai + yi * yj * (aj - aj_new)
        # Snap onto exact bounds: an alpha left an ulp inside the box keeps its
        # index in the working sets and can pin the pair to a zero-width segment.
        if ai_new <= snap:
            ai_new = 0.0
        elif ai_new >= C - snap:
            ai_new = C
        if aj_new <= snap:
            aj_new = 0.0
        elif aj_new >= C - snap:
            aj_new = C

        g = g + (ai_new - ai) * yi * K[i] + (aj_new - aj) * yj * K[j]
        alpha[i] = ai_new
        alpha[j] = aj_new

    g = (alpha * y) @ K
    r = y - g
    up = (pos & (alpha < C)) | (neg & (alpha > 0))
    low = (neg & (alpha < C)) | (pos & (alpha > 0))
    # Both sets are nonempty whenever both classes are present (C > 0 forbids
    # an all-bound one-sided configuration under the equality constraint).
    m = r[up].max()
    big_m = r[low].min()
    bias = 0.5 * (m + big_m)
    return alpha, float(bias), converged, it


def train_svm(
    features: np.ndarray,
    labels: np.ndarray,
    hp: SvmHyperparams,
    *,
    tol: float = DEFAULT_KKT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
    alpha_eps: float = DEFAULT_ALPHA_EPS,
    sq_dists: np.ndarray | None = None,
) -> SvmModel:
    """Train on rows of ``features`` with labels in {-1, +1}.

    ``sq_dists`` may carry precomputed pairwise squared distances between the
    training rows (the component sweep maintains them incrementally).
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float).ravel()
    if X.ndim != 2:
        raise SvmError("features must be a 2-D matrix")
    if len(y) != X.shape[0]:
        raise SvmError(f"{X.shape[0]} feature rows but {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise SvmError("features contain non-finite entries")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SvmError("labels must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SvmError("training set contains a single class")

    if sq_dists is None:
        sq_dists = squared_distances(X, X)
    s = hp.kernel_scale
    K = np.exp(-sq_dists / (s * s))
    alpha, bias, converged, n_iter = _smo(K, y, hp.box_constraint, tol, max_passes)

    # Drop numerically idle rows, then absorb any equality drift (from bound
    # snapping or dropped duals) into the largest free dual so sum(a_i y_i) ~ 0.
    C = hp.box_constraint
    tiny = (alpha > 0) & (alpha <= alpha_eps)
    if tiny.any():
        alpha = alpha.copy()
        alpha[tiny] = 0.0
    residual = float(alpha @ y)
    if residual != 0.0:
        free = np.flatnonzero((alpha > alpha_eps) & (alpha < C * (1.0 - 1e-12)))
        if len(free):
            k = int(free[np.argmax(alpha[free])])
            adjusted = alpha[k] - y[k] * residual
            if 0.0 <= adjusted <= C:
                alpha = alpha.copy()
                alpha[k] = adjusted

    coef = alpha * y
    objective = float(alpha.sum() - 0.5 * (coef @ K @ coef))
    keep = alpha > alpha_eps
    return SvmModel(
        support_vectors=X[keep].copy(),
        dual_coef=coef[keep].copy(),
        bias=bias,
        hyperparams=hp,
        n_features=X.shape[1],
        converged=converged,
        n_iter=n_iter,
        dual_objective=objective,
        sv_index=np.flatnonzero(keep),
    )


def decision_values(model: SvmModel, rows: np.ndarray) -> np.ndarray:
    """f(x) = sum_i a_i y_i K(x_i, x) + b for each row."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != model.n_features:
        raise SvmError(f"rows have {rows.shape[1]} features, model expects {model.n_features}")
    if len(model.dual_coef) == 0:
        return np.full(rows.shape[0], model.bias)
    K = rbf_gram(model.support_vectors, rows, model.hyperparams.kernel_scale)
    return model.dual_coef @ K + model.bias


def predict(model: SvmModel, rows: np.ndarray) -> np.ndarray:
    """+1 where f > 0, else -1 (ties at exactly 0 go to the negative class)."""
    return np.where(decision_values(model, rows) > 0, 1, -1)


def dump_model(model: SvmModel, path) -> None:
    """Audit dump: one row per support vector with its dual weight, bias in the header."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# bias", repr(model.bias)])
        writer.writerow(["# box_constraint", repr(model.hyperparams.box_constraint)])
        writer.writerow(["# kernel_scale", repr(model.hyperparams.kernel_scale)])
        writer.writerow(["dual_coef"] + [f"x{j}" for j in range(model.n_features)])
        for coef, row in zip(model.dual_coef, model.support_vectors):
            writer.writerow([repr(float(coef))] + [repr(float(v)) for v in row])
