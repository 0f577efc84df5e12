# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled assignment kernel.  Same API as ``_lap_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def solve_square(cost_in):
    cdef double[:, ::1] cost = np.ascontiguousarray(cost_in, dtype=np.float64)
    cdef Py_ssize_t n = cost.shape[0]
    u_arr = np.zeros(n + 1)
    v_arr = np.zeros(n + 1)
    p_arr = np.zeros(n + 1, dtype=np.intp)
    way_arr = np.zeros(n + 1, dtype=np.intp)
    minv_arr = np.empty(n + 1)
    used_arr = np.empty(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef Py_ssize_t[::1] p = p_arr
    cdef Py_ssize_t[::1] way = way_arr
    cdef double[::1] minv = minv_arr
    cdef unsigned char[::1] used = used_arr
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur, ui0

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            ui0 = u[i0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    col_of = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of[p[j] - 1] = j - 1
    return col_of, u_arr[1:].copy(), v_arr[1:].copy()


def lex_refine(cost_in, u_in, v_in, col_of_in, Py_ssize_t n_fix, double tol):
    cdef double[:, ::1] cost = np.ascontiguousarray(cost_in, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef double[::1] v = np.ascontiguousarray(v_in, dtype=np.float64)
    cdef Py_ssize_t n = cost.shape[0]
    col_arr = np.array(col_of_in, dtype=np.intp)
    cdef Py_ssize_t[::1] col_of = col_arr
    cdef Py_ssize_t[::1] row_of = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] nxt = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] stack = np.empty(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] path = np.empty(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] movers = np.empty(n + 1, dtype=np.intp)
    cdef unsigned char[::1] fixed_col = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] reached = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t i, j, t, r, c, f, top, plen, k, best
    cdef bint any_cand

    for j in range(n):
        row_of[col_of[j]] = j

    for i in range(n_fix):
        t = col_of[i]
        any_cand = False
        for j in range(t):
            if not fixed_col[j] and cost[i, j] - u[i] - v[j] <= tol:
                any_cand = True
                break
        if any_cand:
            for c in range(n):
                reached[c] = fixed_col[c]
                nxt[c] = -1
            reached[t] = 1
            top = 0
            stack[top] = t
            top += 1
            while top > 0:
                top -= 1
                f = stack[top]
                for r in range(i + 1, n):
                    c = col_of[r]
                    if not reached[c] and cost[r, f] - u[r] - v[f] <= tol:
                        reached[c] = 1
                        nxt[c] = f
                        stack[top] = c
                        top += 1
            best = -1
            for j in range(t):
                if (not fixed_col[j] and nxt[j] >= 0
                        and cost[i, j] - u[i] - v[j] <= tol):
                    best = j
                    break
            if best >= 0:
                plen = 0
                c = best
                path[plen] = c
                plen += 1
                while c != t:
                    c = nxt[c]
                    path[plen] = c
                    plen += 1
                for k in range(plen - 1):
                    movers[k] = row_of[path[k]]
                for k in range(plen - 1):
                    col_of[movers[k]] = path[k + 1]
                    row_of[path[k + 1]] = movers[k]
                col_of[i] = best
                row_of[best] = i
        fixed_col[col_of[i]] = 1
    return np.asarray(col_arr, dtype=np.int64)
