# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled persistence kernels: union-find H0 pairing and Z/2 column
reduction for H1.  Mirrors _reduction_py exactly."""

import numpy as np
cimport numpy as cnp
from libcpp.vector cimport vector
from libcpp.unordered_map cimport unordered_map

cnp.import_array()

BACKEND_NAME = "compiled"


cdef long _find(vector[long]& parent, long x) noexcept:
    cdef long root = x
    cdef long nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def h0_merge_pairs(cnp.ndarray[cnp.float64_t, ndim=1] vertex_values,
                   cnp.ndarray[cnp.int64_t, ndim=1] edges_u,
                   cnp.ndarray[cnp.int64_t, ndim=1] edges_v,
                   cnp.ndarray[cnp.float64_t, ndim=1] edge_values):
    cdef long n_vert = vertex_values.shape[0]
    cdef long n_edge = edges_u.shape[0]
    cdef vector[long] parent, creator
    parent.resize(n_vert)
    creator.resize(n_vert)
    cdef long i
    for i in range(n_vert):
        parent[i] = i
        creator[i] = i

    births = np.empty(n_edge, dtype=np.float64)
    deaths = np.empty(n_edge, dtype=np.float64)
    cdef cnp.float64_t[:] births_v = births
    cdef cnp.float64_t[:] deaths_v = deaths
    cdef cnp.float64_t[:] vv = vertex_values
    cdef long n_pairs = 0
    cdef long u, v, ru, rv, cu, cv, elder, younger

    for i in range(n_edge):
        ru = _find(parent, edges_u[i])
        rv = _find(parent, edges_v[i])
        if ru == rv:
            continue
        cu = creator[ru]
        cv = creator[rv]
        if vv[cu] < vv[cv] or (vv[cu] == vv[cv] and cu < cv):
            elder = ru; younger = rv
        else:
            elder = rv; younger = ru
        births_v[n_pairs] = vv[creator[younger]]
        deaths_v[n_pairs] = edge_values[i]
        n_pairs += 1
        parent[younger] = elder

    return np.stack([births[:n_pairs], deaths[:n_pairs]], axis=1)


def h1_reduction_pairs(cnp.ndarray[cnp.int64_t, ndim=2] square_cols,
                       cnp.ndarray[cnp.float64_t, ndim=1] square_values,
                       cnp.ndarray[cnp.float64_t, ndim=1] edge_values_by_rank):
    cdef long n_sq = square_cols.shape[0]
    cdef vector[vector[long]] reduced
    reduced.resize(n_sq)
    cdef unordered_map[long, long] pivot_owner
    births = np.empty(n_sq, dtype=np.float64)
    deaths = np.empty(n_sq, dtype=np.float64)
    cdef cnp.float64_t[:] births_v = births
    cdef cnp.float64_t[:] deaths_v = deaths

    cdef vector[long] col, other, tmp
    cdef long j, k, piv, owner
    cdef size_t a, b
    for j in range(n_sq):
        col.clear()
        for k in range(square_cols.shape[1]):
            col.push_back(square_cols[j, k])
        while col.size() > 0:
            piv = col[col.size() - 1]
            if pivot_owner.find(piv) == pivot_owner.end():
                break
            owner = pivot_owner[piv]
            # symmetric difference with the owning reduced column
            other = reduced[owner]
            tmp.clear()
            a = 0; b = 0
            while a < col.size() and b < other.size():
                if col[a] == other[b]:
                    a += 1; b += 1
                elif col[a] < other[b]:
                    tmp.push_back(col[a]); a += 1
                else:
                    tmp.push_back(other[b]); b += 1
            while a < col.size():
                tmp.push_back(col[a]); a += 1
            while b < other.size():
                tmp.push_back(other[b]); b += 1
            col = tmp
        if col.size() == 0:
            raise RuntimeError("square column reduced to zero: 2-cycle on a planar grid")
        piv = col[col.size() - 1]
        pivot_owner[piv] = j
        reduced[j] = col
        births_v[j] = edge_values_by_rank[piv]
        deaths_v[j] = square_values[j]

    return np.stack([births, deaths], axis=1)
