"""Point sets, similarity matrices, deduplication, and deterministic sampling.

Everything downstream (magnitude solves, distances, studies) builds on the
immutable PointSet and the splitmix64-based RngState defined here. The RNG is
hand-rolled on purpose: the integer stream is defined exactly, so any other
implementation (in any language) can reproduce every sample bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB


class DimensionMismatch(ValueError):
    """Point sets with different ambient dimensions were combined."""


class PointCsvError(ValueError):
    """Malformed point CSV. Carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def mix64(z: int) -> int:
    """splitmix64 output finalizer; also used to derive per-trial streams."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class RngState:
    """Deterministic pseudo-random stream (splitmix64 + Box-Muller).

    The raw stream is splitmix64: state advances by the golden-gamma
    increment and each output word is mix64 of the new state. Derived
    layers on top of the words:

    * uniforms: ((word >> 11) + 1) * 2**-53, in (0, 1] (log-safe),
    * normals: Box-Muller consumed in (cos, sin) pairs, no caching
      across calls (count n burns exactly 2*ceil(n/2) words),
    * integer draws: word % bound (Fisher-Yates in `permutation`).

    The word stream is bit-exact across platforms; float layers are exact
    up to the platform libm (log/cos/sin), which in practice agrees on
    every mainstream x86-64/arm64 toolchain.
    """

    __slots__ = ("_seed", "_state")

    def __init__(self, seed: int):
        self._seed = seed & _MASK64
        self._state = self._seed

    @property
    def seed(self) -> int:
        return self._seed

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return mix64(self._state)

    def _bulk_u64(self, count: int) -> np.ndarray:
        # state progression is affine, so a block of outputs vectorizes
        # exactly: word_k = mix64(state + k*gamma)
        ks = np.arange(1, count + 1, dtype=np.uint64)
        z = np.uint64(self._state) + ks * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
        z = z ^ (z >> np.uint64(31))
        self._state = (self._state + count * _GAMMA) & _MASK64
        return z

    def uniforms(self, count: int) -> np.ndarray:
        """`count` floats in (0, 1]."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        z = self._bulk_u64(count)
        return ((z >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def normals(self, count: int) -> np.ndarray:
        """`count` standard normals via Box-Muller."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        if count == 0:
            return np.zeros(0)
        pairs = (count + 1) // 2
        u = self.uniforms(2 * pairs)
        radius = np.sqrt(-2.0 * np.log(u[0::2]))
        angle = (2.0 * math.pi) * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of arange(n); one word per swap."""
        idx = np.arange(n)
        if n > 1:
            words = self._bulk_u64(n - 1)
            for pos, i in enumerate(range(n - 1, 0, -1)):
                j = int(words[pos] % np.uint64(i + 1))
                idx[i], idx[j] = idx[j], idx[i]
        return idx

    def derive(self, index: int) -> "RngState":
        """Independent stream for trial `index` (seed XOR index, re-mixed).

        Derivation is from the construction seed, not the current state, so
        derived streams do not depend on how much of this one was consumed.
        """
        return RngState(mix64(self._seed ^ (index & _MASK64)))

    def __repr__(self):
        return f"RngState(seed={self._seed:#x})"


class PointSet:
    """Ordered, immutable collection of points in R^D.

    Duplicates are legal inputs (they are collapsed where the math requires
    it). Coordinates must be finite. Construct empties via PointSet.empty.
    """

    __slots__ = ("_coords",)

    def __init__(self, coords):
        arr = np.array(coords, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2:
            raise ValueError(f"expected an (n, dim) array of points, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise ValueError("points need at least one coordinate")
        if arr.size and not np.isfinite(arr).all():
            raise ValueError("point coordinates must be finite")
        arr.setflags(write=False)
        self._coords = arr

    @classmethod
    def empty(cls, dim: int) -> "PointSet":
        return cls(np.empty((0, dim)))

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def dim(self) -> int:
        return self._coords.shape[1]

    def __len__(self) -> int:
        return self._coords.shape[0]

    def __repr__(self):
        return f"PointSet(n={len(self)}, dim={self.dim})"


@dataclass(frozen=True)
class SimilarityMatrix:
    """exp(-t * distance) Gram matrix of a point set at scale t."""

    entries: np.ndarray
    scale: float

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def _point_key(row: np.ndarray) -> bytes:
    # +0.0 collapses -0.0 and 0.0 into one key; NaN never reaches here
    return (row + 0.0).tobytes()


def _require_same_dim(X: PointSet, Y: PointSet) -> None:
    if X.dim != Y.dim:
        raise DimensionMismatch(f"dim {X.dim} vs dim {Y.dim}")


def pairwise_distances(X: PointSet) -> np.ndarray:
    """Euclidean distance matrix; symmetric with a zero diagonal."""
    if len(X) == 0:
        raise ValueError("pairwise_distances needs a nonempty set")
    return cdist(X.coords, X.coords)


def similarity_matrix(X: PointSet, t: float) -> SimilarityMatrix:
    """entry(i, j) = exp(-t * ||x_i - x_j||), t > 0."""
    if t <= 0:
        raise ValueError("scale t must be positive")
    return SimilarityMatrix(entries=np.exp(-t * pairwise_distances(X)), scale=float(t))


def dedupe(X: PointSet, tol: float = 0.0):
    """Collapse groups of points within distance `tol` of a representative.

    tol = 0 groups on exact coordinate equality (with -0.0 == 0.0). The
    first occurrence represents each group. Returns (representatives,
    multiplicity); multiplicities sum to len(X).
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    coords = X.coords
    if len(X) == 0:
        return X, np.zeros(0, dtype=np.intp)
    if tol == 0.0:
        groups: dict[bytes, int] = {}
        keep: list[int] = []
        counts: list[int] = []
        for i in range(coords.shape[0]):
            key = _point_key(coords[i])
            g = groups.get(key)
            if g is None:
                groups[key] = len(keep)
                keep.append(i)
                counts.append(1)
            else:
                counts[g] += 1
        if len(keep) == coords.shape[0]:
            return X, np.ones(len(keep), dtype=np.intp)
        return PointSet(coords[keep]), np.asarray(counts, dtype=np.intp)
    # tolerance grouping: greedy first-fit against earlier representatives
    reps: list[int] = []
    counts = []
    for i in range(coords.shape[0]):
        for g, r in enumerate(reps):
            if float(np.linalg.norm(coords[i] - coords[r])) <= tol:
                counts[g] += 1
                break
        else:
            reps.append(i)
            counts.append(1)
    return PointSet(coords[reps]), np.asarray(counts, dtype=np.intp)


def union_sets(X: PointSet, Y: PointSet) -> PointSet:
    """Set union: X's points first, then Y's novel points (exact dedupe)."""
    _require_same_dim(X, Y)
    merged = np.concatenate([X.coords, Y.coords], axis=0)
    return dedupe(PointSet(merged))[0]


def symmetric_difference_count(X: PointSet, Y: PointSet) -> int:
    """|X delta Y| under exact coordinate equality."""
    _require_same_dim(X, Y)
    xs = {_point_key(r) for r in X.coords}
    ys = {_point_key(r) for r in Y.coords}
    return len(xs ^ ys)


def sample_gaussian(rng: RngState, n: int, dim: int, mean=0.0, std: float = 1.0) -> PointSet:
    """n i.i.d. draws from N(mean, std^2 I).

    mean is a scalar or a length-dim vector. Point i consumes normal draws
    i*dim .. (i+1)*dim-1 of the stream (row-major), so the layout is part
    of the reproducibility contract.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if std <= 0:
        raise ValueError("std must be positive")
    z = rng.normals(n * dim).reshape(n, dim)
    return PointSet(np.asarray(mean, dtype=np.float64) + std * z)


def read_point_csv(path, skip_header: bool = False) -> PointSet:
    """Load a point set: one point per line, comma-separated floats.

    Fully blank lines are skipped; anything else malformed raises
    PointCsvError naming the 1-based line.
    """
    rows: list[list[float]] = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if lineno == 1 and skip_header:
                continue
            line = raw.strip()
            if not line:
                continue
            try:
                vals = [float(part) for part in line.split(",")]
            except ValueError:
                raise PointCsvError(lineno, f"unparseable coordinate in {line!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise PointCsvError(lineno, "non-finite coordinate")
            if dim is None:
                dim = len(vals)
            elif len(vals) != dim:
                raise PointCsvError(lineno, f"expected {dim} coordinates, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise PointCsvError(0, f"no points in {path}")
    return PointSet(np.asarray(rows))


def write_point_csv(path, X: PointSet) -> None:
    """Write a point set in the same CSV dialect (LF, 17 significant digits)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in X.coords:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")
