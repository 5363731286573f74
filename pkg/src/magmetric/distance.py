"""Magnitude distance between point sets, curriculum loss, and checkers.

The distance at scale t is 2*Mag(X u Y) - Mag(X) - Mag(Y); the normalized
variant divides by Mag(X u Y). The union solve runs on a canonical row
ordering so that swapping the arguments returns bit-identical numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .core import (PointSet, _require_same_dim, dedupe, symmetric_difference_count,
                   union_sets)
from .magnitude import (DEFAULT_EPS_SEP, DEFAULT_SUPPORT_TOL, CholeskyFailure,
                        CoincidentPoints, MagnitudeResult, _gradient_rows,
                        _min_offdiag, _solve_ones, magnitude, magnitude_support)

NONNEG_TOL = 1e-10  # a weighting counts as nonnegative down to -NONNEG_TOL


@dataclass(frozen=True)
class DistanceReport:
    t: float
    mag_union: float
    mag_x: float
    mag_y: float
    distance: float     # 2*mag_union - mag_x - mag_y
    normalized: float   # distance / mag_union (0 when the union is empty)
    nonneg_weightings: tuple[bool, bool, bool]  # (x, y, union)
    bound_2card: float  # 2 * |X u Y|


@dataclass(frozen=True)
class ScaleSchedule:
    """Ordered (t_i, e_i) pairs: at epoch e_i the scale t_i joins the loss.

    Epochs must be positive and strictly increasing. Nondecreasing scales
    are the intended usage (coarse to fine); violations are legal here and
    warned about by the consumers, since the loss is defined either way.
    """

    entries: tuple[tuple[float, int], ...]

    def __post_init__(self):
        cleaned = tuple((float(t), int(e)) for t, e in self.entries)
        if not cleaned:
            raise ValueError("schedule needs at least one entry")
        prev_epoch = 0
        for t, e in cleaned:
            if t <= 0:
                raise ValueError("schedule scales must be positive")
            if e <= prev_epoch:
                raise ValueError("schedule epochs must be strictly increasing and >= 1")
            prev_epoch = e
        object.__setattr__(self, "entries", cleaned)

    @property
    def scales_nondecreasing(self) -> bool:
        ts = [t for t, _ in self.entries]
        return all(a <= b for a, b in zip(ts, ts[1:]))

    @property
    def last_epoch(self) -> int:
        return self.entries[-1][1]

    def active(self, epoch: int) -> list[float]:
        """Scales whose activation epoch has been reached."""
        return [t for t, e in self.entries if e <= epoch]

    @classmethod
    def parse(cls, text: str) -> "ScaleSchedule":
        """Parse the CLI grammar 't1@e1,t2@e2,...', e.g. '0.5@1,1.5@100'."""
        entries = []
        for part in text.split(","):
            part = part.strip()
            fields = part.split("@")
            if len(fields) != 2:
                raise ValueError(f"schedule entry {part!r} is not of the form t@epoch")
            try:
                entries.append((float(fields[0]), int(fields[1])))
            except ValueError:
                raise ValueError(f"schedule entry {part!r} is not of the form t@epoch") from None
        return cls(tuple(entries))


class BoundCheck(NamedTuple):
    holds: bool
    applicable: bool


class LimitProbe(NamedTuple):
    distance_small: float
    distance_large: float
    sym_diff: int


class CrossPolytopeResult(NamedTuple):
    x: PointSet
    z: PointSet
    gap: float    # Mag(X u Z) - Mag(X)
    slack: float  # triangle slack for (X, empty, Z); negative = violation
    dense_gap: Optional[float] = None


def _canonical_coords(ps: PointSet) -> PointSet:
    # lexicographic row order (first coordinate most significant); +0.0
    # normalizes any -0.0 so the ordering and the matrix bytes are unique
    coords = ps.coords + 0.0
    order = np.lexsort(coords.T[::-1])
    return PointSet(coords[order])


def _solve_labeled(ps: PointSet, t: float, label: str) -> MagnitudeResult:
    try:
        return magnitude(ps, t)
    except CholeskyFailure as exc:
        raise CholeskyFailure(f"{label} solve failed: {exc}", pivot=exc.pivot,
                              condition_hint=exc.condition_hint) from None


def _nonneg(res: MagnitudeResult) -> bool:
    w = res.weighting.weights
    return bool(w.size == 0 or w.min() >= -NONNEG_TOL)


def mag_distance(X: PointSet, Y: PointSet, t: float) -> DistanceReport:
    """Magnitude distance with full diagnostics.

    Exact symmetry: the union rows are put in canonical order before the
    solve and the component magnitudes enter as mag_x + mag_y, so the
    result is bit-identical under argument swap.
    """
    _require_same_dim(X, Y)
    if t <= 0:
        raise ValueError("scale t must be positive")
    union = _canonical_coords(union_sets(X, Y))
    res_u = _solve_labeled(union, t, "union")
    res_x = _solve_labeled(X, t, "x")
    res_y = _solve_labeled(Y, t, "y")
    distance = 2.0 * res_u.magnitude - (res_x.magnitude + res_y.magnitude)
    normalized = distance / res_u.magnitude if len(union) else 0.0
    return DistanceReport(
        t=float(t), mag_union=res_u.magnitude, mag_x=res_x.magnitude,
        mag_y=res_y.magnitude, distance=distance, normalized=normalized,
        nonneg_weightings=(_nonneg(res_x), _nonneg(res_y), _nonneg(res_u)),
        bound_2card=2.0 * len(union))


def multiscale_loss(X: PointSet, Y: PointSet, schedule: ScaleSchedule, epoch: int,
                    normalized_loss: bool = False) -> float:
    """Sum of per-scale normalized distances over the entries active at `epoch`.

    With normalized_loss the sum is divided by the active count. Returns 0
    before the first activation epoch.
    """
    if epoch < 1:
        raise ValueError("epoch must be >= 1")
    active = schedule.active(epoch)
    if not active:
        return 0.0
    total = sum(mag_distance(X, Y, t).normalized for t in active)
    return total / len(active) if normalized_loss else total


def _separation_check(stack: np.ndarray, dists: np.ndarray, n_fixed: int,
                      eps_sep: float) -> None:
    # every free row (index >= n_fixed) must clear eps_sep against everything
    n = stack.shape[0]
    sub = dists[n_fixed:, :]
    mask = np.ones(sub.shape, dtype=bool)
    rows = np.arange(n_fixed, n)
    mask[np.arange(n - n_fixed), rows] = False
    bad = (sub < eps_sep) & mask
    if bad.any():
        a, b = np.argwhere(bad)[0]
        i = int(rows[a])
        j = int(b)
        d = float(dists[i, j])
        if j >= n_fixed:
            msg = f"generated points {i - n_fixed} and {j - n_fixed} are {d:.3e} apart"
        else:
            msg = f"generated point {i - n_fixed} is {d:.3e} from data point {j}"
        raise CoincidentPoints(i, j, d, message=msg + ", below the separation floor")


def _value_and_gradient(X: PointSet, Y: PointSet, t: float, normalized: bool,
                        eps_sep: float = DEFAULT_EPS_SEP):
    """(distance, d distance / d Y) sharing the solves between both outputs.

    X is fixed data; the gradient is taken in Y's coordinates, one row per
    point of Y (Y must be duplicate-free and separated from X).
    """
    _require_same_dim(X, Y)
    if t <= 0:
        raise ValueError("scale t must be positive")
    n_y = len(Y)
    if n_y == 0:
        # distance to the empty set is Mag(X), constant in zero variables
        val = magnitude(X, t).magnitude if normalized is False else (
            1.0 if len(X) else 0.0)
        return val, np.zeros((0, X.dim))
    xr, _ = dedupe(X)
    n_x = len(xr)
    stack = np.vstack([xr.coords, Y.coords])
    dists = cdist(stack, stack)
    _separation_check(stack, dists, n_x, eps_sep)
    zeta = np.exp(-t * dists)
    w_u, _, _, _ = _solve_ones(zeta, False)
    mag_u = float(w_u.sum())
    rows = np.arange(n_x, n_x + n_y)
    grad_u = _gradient_rows(stack, dists, zeta, w_u, t, rows)
    # Y's own solve reuses the lower-right block
    zeta_y = zeta[n_x:, n_x:]
    if n_y == 1:
        w_y = np.ones(1)
        mag_y = 1.0
        grad_y = np.zeros((1, Y.dim))
    else:
        w_y, _, _, _ = _solve_ones(zeta_y, False)
        mag_y = float(w_y.sum())
        grad_y = _gradient_rows(Y.coords, dists[n_x:, n_x:], zeta_y, w_y, t,
                                np.arange(n_y))
    mag_x = magnitude(xr, t).magnitude if n_x else 0.0
    dist = 2.0 * mag_u - (mag_x + mag_y)
    grad = 2.0 * grad_u - grad_y
    if not normalized:
        return dist, grad
    # quotient rule: d~ = d / mag_u, d(d~)/dy = (grad * mag_u - d * grad_u) / mag_u^2
    return dist / mag_u, (grad * mag_u - dist * grad_u) / mag_u**2


def mag_distance_gradient(X: PointSet, Y: PointSet, t: float,
                          normalized: bool = False,
                          eps_sep: float = DEFAULT_EPS_SEP) -> np.ndarray:
    """Gradient of the (optionally normalized) distance in Y's coordinates.

    |Y| x D, row per point of Y. X is treated as fixed data. Any pair
    (y, y') or (y, x) closer than eps_sep raises CoincidentPoints naming
    the offenders.
    """
    return _value_and_gradient(X, Y, t, normalized, eps_sep)[1]


def magnitude_equivalent(X: PointSet, Y: PointSet, t: float,
                         tol: float = DEFAULT_SUPPORT_TOL) -> bool:
    """True iff X and Y carry nonzero weight on the same points at scale t."""
    _require_same_dim(X, Y)
    sup_x = magnitude_support(X, t, tol)
    sup_y = magnitude_support(Y, t, tol)
    keys_x = {(row + 0.0).tobytes() for row in sup_x.coords}
    keys_y = {(row + 0.0).tobytes() for row in sup_y.coords}
    return keys_x == keys_y


def check_triangle(X: PointSet, Y: PointSet, Z: PointSet, t: float) -> float:
    """Signed triangle slack d(X,Y) + d(Y,Z) - d(X,Z); negative = violation."""
    d_xy = mag_distance(X, Y, t).distance
    d_yz = mag_distance(Y, Z, t).distance
    d_xz = mag_distance(X, Z, t).distance
    return (d_xy + d_yz) - d_xz


def cross_polytope_counterexample(dim: int, t: float,
                                  full_verify: bool = False) -> CrossPolytopeResult:
    """Unit cross-polytope X = {+-e_i} against the origin Z = {0}.

    gap = Mag(X u Z) - Mag(X) and slack is the triangle slack of (X, empty, Z):
    slack = 2 * (1 - gap), so any gap above 1 is a triangle violation. The
    point sets have only two symmetry orbits (vertices, center), which
    collapses both solves to closed forms; dim=500 is immediate. With
    full_verify the dense solver reruns both magnitudes as a cross-check.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if t <= 0:
        raise ValueError("scale t must be positive")
    m = 2 * dim
    a = math.exp(-2.0 * t)             # antipodal vertices, distance 2
    b = math.exp(-math.sqrt(2.0) * t)  # non-antipodal vertices, distance sqrt(2)
    c = math.exp(-t)                   # vertex to origin
    # vertex row sum of zeta(X); dim=1 has no sqrt(2) pairs, (m-2)=0 handles it
    s = 1.0 + a + (m - 2) * b
    mag_x = m / s
    w_vertex = (1.0 - c) / (s - m * c * c)
    w_origin = 1.0 - m * c * w_vertex
    mag_u = m * w_vertex + w_origin
    gap = mag_u - mag_x
    slack = 2.0 * (1.0 - gap)
    x = PointSet(np.vstack([np.eye(dim), -np.eye(dim)]))
    z = PointSet(np.zeros((1, dim)))
    dense_gap = None
    if full_verify:
        dense_u = magnitude(union_sets(x, z), t).magnitude
        dense_x = magnitude(x, t).magnitude
        dense_gap = dense_u - dense_x
    return CrossPolytopeResult(x, z, gap, slack, dense_gap)


def bound_check(X: PointSet, Y: PointSet, t: float) -> BoundCheck:
    """Check 0 <= distance <= 2|X u Y| (guaranteed when all weightings are
    nonnegative; `applicable` reports whether that hypothesis held)."""
    rep = mag_distance(X, Y, t)
    applicable = all(rep.nonneg_weightings)
    holds = bool(-1e-9 <= rep.distance <= rep.bound_2card + 1e-9)
    return BoundCheck(holds, applicable)


def limit_probe(X: PointSet, Y: PointSet, t_small: float, t_large: float) -> LimitProbe:
    """Distance at both scale extremes plus |X delta Y| (its large-t limit)."""
    return LimitProbe(mag_distance(X, Y, t_small).distance,
                      mag_distance(X, Y, t_large).distance,
                      symmetric_difference_count(X, Y))
