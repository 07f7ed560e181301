"""Partial orders over masked vectors and an incremental maximal-set index.

The engine shrinks its rejection region by repeatedly revealing a
feature whose masked vector is maximal among the still-masked ones.
This module provides the order relations (componentwise dominance,
max-coordinate dominance, or no order at all), the transitive reduction
of the induced DAG, and a root-set index that supports removing one
maximal node at a time while promoting newly maximal ones, in the style
of a topological sort that never commits to a full ordering.

Nodes are row positions 0..n-1 of the point matrix handed to
:func:`build_index`; callers keep their own mapping to feature ids.
Edges run from dominating node to dominated node, so the roots are
exactly the maximal elements.
"""

from __future__ import annotations

import numpy as np

ORDER_KINDS = ("max", "product", "empty")

# Row chunk sizes that keep broadcast temporaries around a few tens of MB.
_PAIR_CHUNK = 1 << 19
_MATMUL_CHUNK = 1024


def less_than(order: str, a: np.ndarray, b: np.ndarray) -> bool:
    """Strict comparison of two equal-length vectors under the named order."""
    if order not in ORDER_KINDS:
        raise ValueError(f"unknown order kind: {order!r}")
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape or av.ndim != 1:
        raise ValueError("less_than expects two vectors of equal length")
    if order == "empty":
        return False
    if order == "max":
        return float(av.max()) < float(bv.max())
    return bool(np.all(av <= bv) and np.any(av < bv))


def dominance_matrix(points: np.ndarray, order: str) -> np.ndarray:
    """Boolean matrix ``lt`` with ``lt[i, j]`` true iff point i < point j."""
    if order not in ORDER_KINDS:
        raise ValueError(f"unknown order kind: {order!r}")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n, k_dim = pts.shape
    if order == "empty" or n == 0:
        return np.zeros((n, n), dtype=bool)
    if order == "max":
        norms = pts.max(axis=1)
        return norms[:, None] < norms[None, :]
    lt = np.empty((n, n), dtype=bool)
    rows = max(1, _PAIR_CHUNK // max(1, n * k_dim))
    for lo in range(0, n, rows):
        hi = min(n, lo + rows)
        block = pts[lo:hi, None, :]
        le_all = (block <= pts[None, :, :]).all(axis=2)
        eq_all = (block == pts[None, :, :]).all(axis=2)
        lt[lo:hi] = le_all & ~eq_all
    return lt


def _bool_matmul(a: np.ndarray, b32: np.ndarray) -> np.ndarray:
    """(a @ b) > 0 for boolean matrices, chunked to bound peak memory."""
    n = a.shape[0]
    out = np.empty((n, b32.shape[1]), dtype=bool)
    for lo in range(0, n, _MATMUL_CHUNK):
        hi = min(n, lo + _MATMUL_CHUNK)
        out[lo:hi] = (a[lo:hi].astype(np.float32) @ b32) > 0.5
    return out


def transitive_closure(adj: np.ndarray) -> np.ndarray:
    """Reachability matrix of a directed graph (one or more edges)."""
    closure = np.array(adj, dtype=bool, copy=True)
    if closure.shape[0] != closure.shape[1]:
        raise ValueError("adjacency matrix must be square")
    while True:
        step = _bool_matmul(closure, closure.astype(np.float32))
        grown = closure | step
        if np.array_equal(grown, closure):
            return closure
        closure = grown


def _reduce_closed(closure: np.ndarray) -> np.ndarray:
    # For a transitively closed DAG the unique minimal reachability-
    # equivalent graph keeps exactly the edges with no two-step witness.
    two_step = _bool_matmul(closure, closure.astype(np.float32))
    return closure & ~two_step


def transitive_reduction(adj: np.ndarray) -> np.ndarray:
    """Unique fewest-edge graph with the same reachability as ``adj``.

    Defined for DAGs only; raises on cycles.
    """
    closure = transitive_closure(adj)
    if closure.shape[0] and closure.diagonal().any():
        raise ValueError("graph has a cycle; transitive reduction undefined")
    return _reduce_closed(closure)


class DagIndex:
    """Root-set index over an explicit covering DAG.

    ``remove_root`` deletes a maximal node and returns the nodes that
    become maximal as a consequence, following the usual in-degree
    bookkeeping of incremental topological sorting.
    """

    def __init__(self, reduction: np.ndarray):
        n = reduction.shape[0]
        self._n = n
        self._alive = np.ones(n, dtype=bool)
        self._in_deg = reduction.sum(axis=0).astype(np.int64)
        src, dst = np.nonzero(reduction)
        order = np.argsort(src, kind="stable")
        src, dst = src[order], dst[order]
        starts = np.searchsorted(src, np.arange(n + 1))
        self._children = [dst[starts[i] : starts[i + 1]] for i in range(n)]
        self._roots = np.flatnonzero(self._in_deg == 0)
        self._edge_count = int(src.shape[0])

    @property
    def roots(self) -> np.ndarray:
        """Current maximal nodes, ascending."""
        return self._roots

    @property
    def n_alive(self) -> int:
        return int(self._alive.sum())

    @property
    def edge_count(self) -> int:
        return self._edge_count

    def children(self, v: int) -> np.ndarray:
        return self._children[v]

    def in_degree(self, v: int) -> int:
        return int(self._in_deg[v])

    def remove_root(self, v: int) -> np.ndarray:
        pos = np.searchsorted(self._roots, v)
        if pos >= len(self._roots) or self._roots[pos] != v:
            raise ValueError(f"node {v} is not a current root")
        self._roots = np.delete(self._roots, pos)
        self._alive[v] = False
        ch = self._children[v]
        if len(ch) == 0:
            return np.empty(0, dtype=np.int64)
        self._in_deg[ch] -= 1
        promoted = ch[self._in_deg[ch] == 0]
        if len(promoted):
            promoted = np.sort(promoted)
            self._roots = np.insert(
                self._roots, np.searchsorted(self._roots, promoted), promoted
            )
        return promoted


class MaxNormIndex:
    """Sorted-list realization of the max-coordinate order.

    Distinct max values form a chain of tie groups; the current roots
    are the remaining members of the largest group.  Behaves exactly
    like ``DagIndex`` built on the same order, without materializing
    the (dense) covering DAG.
    """

    def __init__(self, points: np.ndarray):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = pts.shape[0]
        self._n_alive = n
        norms = pts.max(axis=1) if pts.size else np.zeros(n)
        order = np.argsort(-norms, kind="stable")
        sorted_norms = norms[order]
        cuts = np.flatnonzero(sorted_norms[:-1] != sorted_norms[1:]) + 1
        bounds = np.concatenate(([0], cuts, [n])) if n else np.array([0, 0])
        self._groups = [
            np.sort(order[bounds[g] : bounds[g + 1]]) for g in range(len(bounds) - 1)
        ]
        self._g = 0

    @property
    def roots(self) -> np.ndarray:
        if self._g >= len(self._groups):
            return np.empty(0, dtype=np.int64)
        return self._groups[self._g]

    @property
    def n_alive(self) -> int:
        return self._n_alive

    def remove_root(self, v: int) -> np.ndarray:
        cur = self.roots
        pos = np.searchsorted(cur, v)
        if pos >= len(cur) or cur[pos] != v:
            raise ValueError(f"node {v} is not a current root")
        self._groups[self._g] = np.delete(cur, pos)
        self._n_alive -= 1
        if len(self._groups[self._g]) == 0:
            self._g += 1
            return self.roots
        return np.empty(0, dtype=np.int64)


def build_index(points: np.ndarray, order: str, force_dag: bool = False):
    """Index the points of a masked set under the named order.

    The max order gets the sorted-group realization unless ``force_dag``
    asks for the generic DAG (used to cross-check the two).
    """
    if order not in ORDER_KINDS:
        raise ValueError(f"unknown order kind: {order!r}")
    if order == "max" and not force_dag:
        return MaxNormIndex(points)
    lt = dominance_matrix(points, order)
    # Edges point from dominator to dominated; a strict partial order is
    # already transitively closed, so the reduction needs no closure pass.
    return DagIndex(_reduce_closed(lt.T))
