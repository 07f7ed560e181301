"""Shared reference implementations for the test suite.

Everything in this module is written independently of the package code:
plain loops, direct formula evaluation, and quadrature.  Tests compare
library outputs against these oracles rather than against values copied
from the implementation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, stats


# Region classification, one point at a time.

def classify_ref(point, alpha=0.5, lam=0.5, nu=1.0) -> int:
    """-1 outside, 0 rejection, k for the k-th mirror box (1-based)."""
    low = [v < alpha for v in point]
    mirror = [lam < v <= nu for v in point]
    if all(low):
        return 0
    for k, (is_m, is_l) in enumerate(zip(mirror, low)):
        others_low = all(low[j] for j in range(len(point)) if j != k)
        if is_m and not is_l and others_low:
            return k + 1
    return -1


def classify_directional_ref(z, t) -> str:
    hi = [v >= t for v in z]
    lo = [v <= -t for v in z]
    if all(hi):
        return "positive"
    if all(lo):
        return "negative"
    k = len(z)
    pos_box = sum(lo) == 1 and sum(hi) == k - 1
    neg_box = sum(hi) == 1 and sum(lo) == k - 1
    if pos_box and neg_box:
        # overlapping one-flip boxes (K = 2): side of the dominant
        # coordinate, ties broken by position
        i_hi, i_lo = hi.index(True), lo.index(True)
        if abs(z[i_hi]) > abs(z[i_lo]) or (
            abs(z[i_hi]) == abs(z[i_lo]) and i_hi < i_lo
        ):
            return f"mirror_pos:{i_lo + 1}"
        return f"mirror_neg:{i_hi + 1}"
    if pos_box:
        return f"mirror_pos:{lo.index(True) + 1}"
    if neg_box:
        return f"mirror_neg:{hi.index(True) + 1}"
    return "outside"


# Partial orders and graphs.

def dominates_ref(order, a, b) -> bool:
    """True when a strictly precedes b (b dominates a)."""
    if order == "empty":
        return False
    if order == "max":
        return max(a) < max(b)
    return all(x <= y for x, y in zip(a, b)) and tuple(a) != tuple(b)


def brute_maximal(points, order, alive) -> set:
    """Maximal elements among alive indices by direct pairwise comparison."""
    out = set()
    for i in alive:
        if not any(dominates_ref(order, points[i], points[j])
                   for j in alive if j != i):
            out.add(i)
    return out


def reachability_bfs(adj: np.ndarray) -> np.ndarray:
    """Strict reachability (no self loops counted) via per-node BFS."""
    n = adj.shape[0]
    reach = np.zeros((n, n), dtype=bool)
    for s in range(n):
        stack = [v for v in range(n) if adj[s, v]]
        while stack:
            v = stack.pop()
            if not reach[s, v]:
                reach[s, v] = True
                stack.extend(w for w in range(n) if adj[v, w] and not reach[s, w])
    return reach


def reduction_ref_bitset(adj_rows: list[int], n: int) -> list[int]:
    """Unique DAG reduction via bitset closure; adj_rows[u] has bit v set
    for an edge u -> v.  Requires nodes already in topological order
    (all edges go low index -> high index)."""
    reach = [0] * n
    for u in range(n - 1, -1, -1):
        row = adj_rows[u]
        acc = row
        v = row
        while v:
            bit = v & -v
            acc |= reach[bit.bit_length() - 1]
            v ^= bit
        reach[u] = acc
    red = [0] * n
    for u in range(n):
        two_step = 0
        v = reach[u]
        while v:
            bit = v & -v
            two_step |= reach[bit.bit_length() - 1]
            v ^= bit
        red[u] = reach[u] & ~two_step
    return red


# Kernel ratio estimator, recomputed from scratch.

def qhat_scratch(cand_pts, seed_pts, seed_rej, bandwidth):
    """Direct evaluation of the weighted rejection fraction at each
    candidate: solve the quadratic form per pair, no shared state."""
    h_inv = np.linalg.inv(np.asarray(bandwidth, dtype=np.float64))
    out = []
    for x in np.atleast_2d(cand_pts):
        num = den = 0.0
        for y, rej in zip(np.atleast_2d(seed_pts), seed_rej):
            d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
            w = math.exp(-0.5 * float(d @ h_inv @ d))
            if w < 1e-300:
                w = 0.0
            den += w
            if rej:
                num += w
        out.append(num / den if den > 0 else math.inf)
    return np.array(out)


# Folded-normal tail mass by quadrature.

def folded_cdf_quad(mu: float, t: float) -> float:
    """P(2 Phi(-|X|) <= t) for X ~ N(mu, 1), by numerical integration."""
    if t <= 0:
        return 0.0
    if t >= 1:
        return 1.0
    c = stats.norm.isf(t / 2.0)
    left, _ = integrate.quad(lambda x: stats.norm.pdf(x, loc=mu), -np.inf, -c)
    right, _ = integrate.quad(lambda x: stats.norm.pdf(x, loc=mu), c, np.inf)
    return left + right


def bh_ref(pvals_1d, q) -> set:
    """Step-up rule on a flat p-value list: largest k with p_(k) <= k q / m."""
    m = len(pvals_1d)
    order = sorted(range(m), key=lambda i: pvals_1d[i])
    k_star = 0
    for rank, i in enumerate(order, start=1):
        if pvals_1d[i] <= rank * q / m:
            k_star = rank
    return set(order[:k_star])


def metrics_ref(rejected, theta):
    """FDP, mFDP, power by explicit enumeration."""
    theta = np.asarray(theta)
    m, k_dim = theta.shape
    kappa = [int(k_dim - theta[i].sum()) for i in range(m)]
    rej = sorted(set(int(i) for i in rejected))
    false = sum(1 for i in rej if kappa[i] >= 1)
    weighted = sum(kappa[i] for i in rej)
    true_pos = sum(1 for i in rej if kappa[i] == 0)
    n_alt = sum(1 for i in range(m) if kappa[i] == 0)
    denom = max(len(rej), 1)
    return false / denom, weighted / denom, true_pos / max(n_alt, 1)


def random_dag_adj(rng, n, density=0.35) -> np.ndarray:
    """Random DAG as an upper-triangular adjacency matrix."""
    adj = rng.random((n, n)) < density
    return np.triu(adj, k=1)
