"""PCA embedding fit on control rows only, with projection of all subjects.

The fit is SVD-based for numerical stability on wide matrices (thousands of
metric columns, at most a few dozen rows). Components are the right singular
vectors of the re-centered control z-matrix; the defensive re-centering makes
the fit correct even when the input is not exactly mean-zero (nested
cross-validation refits on fold subsets).

Sign convention: each component is flipped so its largest-magnitude loading is
positive; on ties the lowest column index wins. This makes fits bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PcaError(ValueError):
    pass


@dataclass
class PcaModel:
    components: np.ndarray  # k_max x n_metrics, orthonormal rows
    singular_values: np.ndarray  # k_max, non-negative, non-increasing
    center: np.ndarray  # control column means
    n_fit: int  # control rows used in the fit

    @property
    def k_max(self) -> int:
        return self.components.shape[0]

    @property
    def n_metrics(self) -> int:
        return self.components.shape[1]


def fit_pca(control_z: np.ndarray) -> PcaModel:
    """Fit the control manifold: SVD of the column-centered control matrix."""
    control_z = np.asarray(control_z, dtype=float)
    if control_z.ndim != 2:
        raise PcaError("control matrix must be 2-D")
    n, d = control_z.shape
    if n < 2:
        raise PcaError(f"PCA fit needs at least 2 rows, got {n}")
    if not np.all(np.isfinite(control_z)):
        raise PcaError("control matrix contains non-finite entries")
    center = control_z.mean(axis=0)
    centered = control_z - center
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    k_max = min(n - 1, d)
    components = vt[:k_max]
    singular_values = s[:k_max]
    # Deterministic sign: largest-|loading| entry positive, first index on ties.
    flip = np.take_along_axis(
        components, np.abs(components).argmax(axis=1, keepdims=True), axis=1
    )[:, 0]
    components = components * np.where(flip < 0, -1.0, 1.0)[:, None]
    return PcaModel(
        components=components,
        singular_values=singular_values,
        center=center,
        n_fit=n,
    )


def project(model: PcaModel, z: np.ndarray, k: int) -> np.ndarray:
    """Scores of ``z`` rows on the first ``k`` components: (z - center) @ components[:k].T."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[1] != model.n_metrics:
        raise PcaError(f"matrix has {z.shape[1] if z.ndim == 2 else '?'} columns, model expects {model.n_metrics}")
    if not 1 <= k <= model.k_max:
        raise PcaError(f"k={k} outside 1..{model.k_max}")
    return (z - model.center) @ model.components[:k].T


def explained_variance_ratio(model: PcaModel) -> np.ndarray:
    """Per-component share of the retained variance; sums to 1."""
    s2 = model.singular_values**2
    return s2 / s2.sum()


def dump_model(model: PcaModel, path) -> None:
    """Audit dump: one row per component with variance ratio and loadings."""
    import csv

    ratios = explained_variance_ratio(model)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "singular_value", "variance_ratio"] + [f"loading_{j}" for j in range(model.n_metrics)])
        for i in range(model.k_max):
            writer.writerow(
                [i + 1, repr(float(model.singular_values[i])), repr(float(ratios[i]))]
                + [repr(float(v)) for v in model.components[i]]
            )
