"""Maximum-weight one-to-one assignment between predictions and ground truth.

The solver pads rectangular inputs to a square min-cost problem (cost is the
negated similarity, padding cells are 0), runs the Hungarian method and
then walks alternating cycles of the equality subgraph so that, among all
optimal matchings, the one with the lexicographically smallest sorted
``(pred_index, gt_index)`` sequence is returned.

The inner loops live in a Cython extension (``_lap``); a numpy mirror
(``_lap_py``) is used when the extension is not built or when the
environment variable ``OVRE_PURE_PYTHON`` is set.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InstanceTooLarge, NonFiniteEntry

if os.environ.get("OVRE_PURE_PYTHON"):
    from . import _lap_py as _kernel
    BACKEND = "python"
else:
    try:
        from . import _lap as _kernel
        BACKEND = "cython"
    except ImportError:
        from . import _lap_py as _kernel
        BACKEND = "python"

# reduced costs within this (relative) slack count as tight
EDGE_TOL = 1e-10
# totals within this (relative) slack count as tied in the brute-force oracle
TOTAL_TOL = 1e-9
BRUTE_MAX_SIDE = 8
BRUTE_MAX_INJECTIONS = 5_000_000


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    total_weight: float

    def __len__(self):
        return len(self.pairs)

    def pred_to_gt(self) -> dict[int, int]:
        return dict(self.pairs)

    def gt_to_pred(self) -> dict[int, int]:
        return {g: p for p, g in self.pairs}


def _as_matrix(S) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2:
        raise ValueError(f"similarity matrix must be 2-D, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise NonFiniteEntry("similarity matrix contains NaN or infinite entries")
    return S


def _total(S: np.ndarray, pairs) -> float:
    return math.fsum(S[i, j] for i, j in pairs)


def solve_max_assignment(S, kernel=None) -> Assignment:
    """Optimal matching of size ``min(rows, cols)`` maximising total similarity.

    ``kernel`` overrides the backend module (used by the benchmark and the
    backend-agreement tests).
    """
    S = _as_matrix(S)
    kernel = kernel or _kernel
    rows, cols = S.shape
    if rows == 0 or cols == 0:
        return Assignment((), 0.0)
    n = max(rows, cols)
    cost = np.zeros((n, n))
    cost[:rows, :cols] = -S
    col_of, u, v = kernel.solve_square(cost)
    tol = EDGE_TOL * max(1.0, float(np.abs(S).max()))
    col_of = kernel.lex_refine(cost, u, v, col_of, rows, tol)
    pairs = tuple((i, int(col_of[i])) for i in range(rows) if col_of[i] < cols)
    return Assignment(pairs, _total(S, pairs))


@lru_cache(maxsize=64)
def _injections(m: int, n: int) -> np.ndarray:
    """All injective maps ``range(m) -> range(n)`` in lexicographic order."""
    return np.array(list(itertools.permutations(range(n), m)), dtype=np.intp).reshape(-1, m)


def brute_force_assignment(S) -> Assignment:
    """Exhaustive oracle for :func:`solve_max_assignment` on small inputs."""
    S = _as_matrix(S)
    rows, cols = S.shape
    if rows == 0 or cols == 0:
        return Assignment((), 0.0)
    m, n = min(rows, cols), max(rows, cols)
    if m > BRUTE_MAX_SIDE or math.perm(n, m) > BRUTE_MAX_INJECTIONS:
        raise InstanceTooLarge(f"{rows}x{cols} is too large for exhaustive search")
    maps = _injections(m, n)
    short = S if rows <= cols else S.T
    weights = short[np.arange(m), maps].sum(axis=1)
    best = weights.max()
    tol = TOTAL_TOL * max(1.0, float(np.abs(S).max()))
    keys = []
    for k in np.flatnonzero(weights >= best - tol):
        if rows <= cols:
            pairs = tuple((i, int(maps[k, i])) for i in range(m))
        else:
            pairs = tuple(sorted((int(maps[k, j]), j) for j in range(m)))
        keys.append(pairs)
    pairs = min(keys)
    return Assignment(pairs, _total(S, pairs))
