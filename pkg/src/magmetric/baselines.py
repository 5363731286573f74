"""Reference two-sample distances: kernel MMD and (sliced) Wasserstein."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import wasserstein_distance

from .core import PointSet, RngState, _require_same_dim


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its one parameter.

    'exponential' uses exp(-parameter * ||x - y||) (parameter = rate);
    'gaussian' uses exp(-||x - y||^2 / (2 * parameter^2)) (parameter = bandwidth).
    """

    family: str
    parameter: float

    def __post_init__(self):
        if self.family not in ("exponential", "gaussian"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.parameter <= 0:
            raise ValueError("kernel parameter must be positive")

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.family == "exponential":
            return np.exp(-self.parameter * cdist(a, b))
        return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * self.parameter**2))


def mmd_squared(X: PointSet, Y: PointSet, kernel: KernelSpec) -> float:
    """Biased squared-MMD V-statistic.

    mean(Kxx) + mean(Kyy) - 2*mean(Kxy) with the diagonal terms included,
    which is what makes Y = X give exactly 0.
    """
    _require_same_dim(X, Y)
    if len(X) == 0 or len(Y) == 0:
        raise ValueError("mmd_squared needs nonempty sets")
    k_xx = kernel.gram(X.coords, X.coords).mean()
    k_yy = kernel.gram(Y.coords, Y.coords).mean()
    k_xy = kernel.gram(X.coords, Y.coords).mean()
    return float(k_xx + k_yy - 2.0 * k_xy)


def wasserstein_1d(xs, ys) -> float:
    """W1 between empirical measures on the line.

    Equal sizes reduce to the mean absolute difference of sorted samples;
    unequal sizes integrate |F_X^-1 - F_Y^-1| over the merged quantile grid.
    """
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.size == 0 or ys.size == 0:
        raise ValueError("wasserstein_1d needs nonempty samples")
    return float(wasserstein_distance(xs, ys))


def sliced_wasserstein(X: PointSet, Y: PointSet, n_proj: int = 128, *,
                       rng: RngState) -> float:
    """Mean W1 over n_proj random unit directions (normalized gaussians).

    Deterministic given rng: directions consume n_proj * dim normal draws.
    """
    _require_same_dim(X, Y)
    if n_proj < 1:
        raise ValueError("n_proj must be >= 1")
    if len(X) == 0 or len(Y) == 0:
        raise ValueError("sliced_wasserstein needs nonempty sets")
    dirs = rng.normals(n_proj * X.dim).reshape(n_proj, X.dim)
    norms = np.linalg.norm(dirs, axis=1)
    while (norms == 0.0).any():  # pragma: no cover - probability ~ 0
        bad = norms == 0.0
        dirs[bad] = rng.normals(int(bad.sum()) * X.dim).reshape(-1, X.dim)
        norms = np.linalg.norm(dirs, axis=1)
    dirs /= norms[:, None]
    proj_x = X.coords @ dirs.T
    proj_y = Y.coords @ dirs.T
    vals = [wasserstein_1d(proj_x[:, k], proj_y[:, k]) for k in range(n_proj)]
    return float(np.mean(vals))
