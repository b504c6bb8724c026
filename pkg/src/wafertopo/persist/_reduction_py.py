"""Pure-Python persistence kernels (fallback backend).

Same contracts as the compiled extension in ``_reduction.pyx``: union-find
over value-sorted edges for H0, boundary-column reduction over squares for
H1.  Zero-persistence pairs are dropped by the caller-facing wrapper, not
here, so both backends stay bit-for-bit comparable.
"""
from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def h0_merge_pairs(vertex_values: np.ndarray, edges_u: np.ndarray, edges_v: np.ndarray,
                   edge_values: np.ndarray) -> np.ndarray:
    """Union-find pairing of vertex births with merge-edge deaths.

    Edges must arrive in filtration order.  The component with the younger
    creator vertex (larger (value, id)) dies at each merge.
    Returns an (n, 2) array of (birth, death) values.
    """
    n_vert = vertex_values.size
    parent = list(range(n_vert))
    # creator vertex of each component, for the elder rule
    creator = list(range(n_vert))
    pairs = []

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    vv = vertex_values
    for u, v, ev in zip(edges_u.tolist(), edges_v.tolist(), edge_values.tolist()):
        ru, rv = find(u), find(v)
        if ru == rv:
            continue
        cu, cv = creator[ru], creator[rv]
        # older component (smaller birth, then smaller id) survives
        if (vv[cu], cu) < (vv[cv], cv):
            elder, younger = ru, rv
        else:
            elder, younger = rv, ru
        pairs.append((vv[creator[younger]], ev))
        parent[younger] = elder
    return np.array(pairs, dtype=np.float64).reshape(-1, 2)


def h1_reduction_pairs(square_cols: np.ndarray, square_values: np.ndarray,
                       edge_values_by_rank: np.ndarray) -> np.ndarray:
    """Column reduction of the square boundary matrix over Z/2.

    ``square_cols`` holds, per square in filtration order, the 4 boundary
    edge ranks sorted ascending.  Returns (birth, death) pairs, one per
    square (every square is negative on a planar grid).
    """
    pivot_owner: dict[int, int] = {}
    reduced: list[list[int]] = []
    pairs = []
    for j in range(square_cols.shape[0]):
        col = sorted(square_cols[j].tolist())
        while col:
            piv = col[-1]
            owner = pivot_owner.get(piv)
            if owner is None:
                break
            col = _sym_diff(col, reduced[owner])
        if not col:
            raise RuntimeError("square column reduced to zero: 2-cycle on a planar grid")
        piv = col[-1]
        pivot_owner[piv] = j
        reduced.append(col)
        pairs.append((edge_values_by_rank[piv], square_values[j]))
    return np.array(pairs, dtype=np.float64).reshape(-1, 2)


def _sym_diff(a: list[int], b: list[int]) -> list[int]:
    out = []
    i = j = 0
    na, nb = len(a), len(b)
    while i < na and j < nb:
        if a[i] == b[j]:
            i += 1
            j += 1
        elif a[i] < b[j]:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return out
