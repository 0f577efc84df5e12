"""Pure-Python (numpy) assignment kernel.

Mirror of ``_lap.pyx``; used when the compiled extension is unavailable or
``OVRE_PURE_PYTHON=1`` is set.  Both kernels work on a square min-cost
matrix and return the matching together with the dual potentials.
"""
import numpy as np


def solve_square(cost):
    """Shortest-augmenting-path Hungarian method on a square cost matrix.

    Returns ``(col_of_row, u, v)`` with ``cost[i, j] - u[i] - v[j] >= 0``
    everywhere (up to rounding) and equality on matched cells.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    # 1-based bookkeeping; index 0 is the virtual root column
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    padded = np.empty((n + 1, n + 1))
    padded[0, :] = 0.0
    padded[:, 0] = 0.0
    padded[1:, 1:] = cost
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = padded[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of = np.empty(n, dtype=np.int64)
    col_of[p[1:] - 1] = np.arange(n)
    return col_of, u[1:].copy(), v[1:].copy()


def lex_refine(cost, u, v, col_of, n_fix, tol):
    """Move to the lexicographically smallest optimal matching.

    Rows ``0..n_fix-1`` are fixed in order, each to the smallest column that
    still admits a perfect matching inside the equality subgraph
    ``{(i, j): cost[i, j] - u[i] - v[j] <= tol}``.  Swaps follow alternating
    cycles so the total cost never changes.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    col_of = np.array(col_of, dtype=np.int64)
    row_of = np.empty(n, dtype=np.int64)
    row_of[col_of] = np.arange(n)
    tight = (cost - u[:, None] - v[None, :]) <= tol
    fixed_col = np.zeros(n, dtype=bool)
    for i in range(n_fix):
        t = col_of[i]
        cands = np.flatnonzero(tight[i, :t] & ~fixed_col[:t])
        if cands.size:
            # backward search: column c is good if its owner can move to t
            # or to another good column
            nxt = np.full(n, -1, dtype=np.int64)
            reached = fixed_col.copy()
            reached[t] = True
            frontier = [t]
            while frontier:
                f = frontier.pop()
                rows = np.flatnonzero(tight[:, f])
                for r in rows:
                    if r <= i:
                        continue
                    c = col_of[r]
                    if not reached[c]:
                        reached[c] = True
                        nxt[c] = f
                        frontier.append(c)
            good = [j for j in cands if nxt[j] >= 0]
            if good:
                j = int(good[0])
                path = [j]
                while path[-1] != t:
                    path.append(int(nxt[path[-1]]))
                movers = [int(row_of[c]) for c in path[:-1]]
                for r, f in zip(movers, path[1:]):
                    col_of[r] = f
                    row_of[f] = r
                col_of[i] = j
                row_of[j] = i
        fixed_col[col_of[i]] = True
    return col_of
