"""Kernel-guided choice of which masked feature to reveal next.

For each still-masked candidate the engine keeps a running estimate of
the probability that the candidate sits on the rejection side, given
only its folded coordinates.  The estimate is a Nadaraya-Watson ratio
over the features that have already been revealed: the numerator sums
kernel weights of rejection-side reveals, the denominator sums weights
of all reveals.  Both sums are separable, so one reveal updates every
candidate with a single weight evaluation, and a candidate that enters
late can be initialized by one pass over the reveal history.

Candidates with the smallest estimate are revealed first; they are the
ones most likely to be mirror noise, so spending them early preserves
rejection-side mass for the final cut.
"""

from __future__ import annotations

import numpy as np

# Weights this small carry no information and can underflow chains of
# updates, so they are truncated to exact zero.
WEIGHT_FLOOR = 1e-300

_SEED_CHUNK = 4096


def silverman_bandwidth(points: np.ndarray) -> np.ndarray:
    """Rule-of-thumb bandwidth matrix for an (n, K) point set.

    ``(4 / (n (K + 2)))^(2 / (K + 4))`` times the sample covariance,
    with a relative ridge so the matrix stays invertible when the
    points are degenerate.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n, k_dim = pts.shape
    if n < 2:
        raise ValueError("bandwidth needs at least two points")
    cov = np.atleast_2d(np.cov(pts, rowvar=False))
    trace = float(np.trace(cov))
    ridge = 1e-8 * (trace / k_dim) if trace > 0.0 else 1e-8
    scale = (4.0 / (n * (k_dim + 2))) ** (2.0 / (k_dim + 4))
    return scale * (cov + ridge * np.eye(k_dim))


class KernelWeights:
    """Gaussian kernel ratio ``K_H(x - y) / K_H(0)`` for a fixed bandwidth."""

    def __init__(self, bandwidth: np.ndarray):
        mat = np.atleast_2d(np.asarray(bandwidth, dtype=np.float64))
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("bandwidth must be a square matrix")
        scale = np.abs(mat).max()
        if scale == 0.0 or np.abs(mat - mat.T).max() > 1e-12 * scale:
            raise ValueError("bandwidth matrix must be symmetric positive definite")
        sym = 0.5 * (mat + mat.T)
        try:
            np.linalg.cholesky(sym)
        except np.linalg.LinAlgError:
            raise ValueError("bandwidth matrix must be symmetric positive definite")
        self.bandwidth = sym
        self._inv = np.linalg.inv(sym)

    def one_to_many(self, x: np.ndarray, pts: np.ndarray) -> np.ndarray:
        diff = pts - x
        quad = np.einsum("ij,jk,ik->i", diff, self._inv, diff)
        w = np.exp(-0.5 * quad)
        w[w < WEIGHT_FLOOR] = 0.0
        return w

    def pair(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self.one_to_many(np.asarray(x, dtype=np.float64),
                                      np.atleast_2d(np.asarray(y, dtype=np.float64)))[0])


def kernel_weight(x: np.ndarray, y: np.ndarray, bandwidth: np.ndarray) -> float:
    """One-shot normalized Gaussian weight between two vectors."""
    return KernelWeights(bandwidth).pair(x, y)


class QHatState:
    """Running numerator/denominator pairs for the candidate estimates.

    Candidates are keyed by integer id and kept in ascending id order.
    Reveals append to an internal seed history; a candidate added after
    some reveals is initialized by summing over that history, which
    makes the incremental state agree with a from-scratch evaluation at
    any point in time.
    """

    def __init__(
        self,
        bandwidth: np.ndarray,
        cand_ids: np.ndarray,
        cand_pts: np.ndarray,
        seed_pts: np.ndarray | None = None,
        seed_rej: np.ndarray | None = None,
    ):
        self.kernel = KernelWeights(bandwidth)
        ids = np.asarray(cand_ids, dtype=np.int64)
        pts = np.atleast_2d(np.asarray(cand_pts, dtype=np.float64))
        if ids.shape[0] != pts.shape[0]:
            raise ValueError("candidate ids and points disagree in length")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("duplicate candidate ids")
        order = np.argsort(ids)
        self.cand_ids = ids[order]
        self.cand_pts = pts[order]
        self._k_dim = pts.shape[1] if pts.size else self.kernel.bandwidth.shape[0]
        self._n_seeds = 0
        self._seed_pts = np.empty((64, self._k_dim), dtype=np.float64)
        self._seed_rej = np.empty(64, dtype=bool)
        self._revealed: set[int] = set()
        self.num = np.zeros(len(self.cand_ids), dtype=np.float64)
        self.den = np.zeros(len(self.cand_ids), dtype=np.float64)
        if seed_pts is not None and len(seed_pts):
            rej = np.asarray(seed_rej, dtype=bool)
            for pt, is_rej in zip(np.atleast_2d(np.asarray(seed_pts, dtype=np.float64)), rej):
                self._append_seed(pt, bool(is_rej))
            self.num, self.den = self._sums_over_seeds(self.cand_pts)

    @property
    def n_candidates(self) -> int:
        return len(self.cand_ids)

    @property
    def n_seeds(self) -> int:
        return self._n_seeds

    def _append_seed(self, pt: np.ndarray, on_rejection: bool) -> None:
        if self._n_seeds == self._seed_pts.shape[0]:
            grown = np.empty((2 * self._n_seeds, self._k_dim), dtype=np.float64)
            grown[: self._n_seeds] = self._seed_pts[: self._n_seeds]
            self._seed_pts = grown
            grown_rej = np.empty(2 * self._n_seeds, dtype=bool)
            grown_rej[: self._n_seeds] = self._seed_rej[: self._n_seeds]
            self._seed_rej = grown_rej
        self._seed_pts[self._n_seeds] = pt
        self._seed_rej[self._n_seeds] = on_rejection
        self._n_seeds += 1

    def _sums_over_seeds(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        num = np.zeros(pts.shape[0], dtype=np.float64)
        den = np.zeros(pts.shape[0], dtype=np.float64)
        seeds = self._seed_pts[: self._n_seeds]
        rej = self._seed_rej[: self._n_seeds]
        for lo in range(0, self._n_seeds, _SEED_CHUNK):
            hi = min(self._n_seeds, lo + _SEED_CHUNK)
            for row, pt in enumerate(pts):
                w = self.kernel.one_to_many(pt, seeds[lo:hi])
                den[row] += w.sum()
                num[row] += w[rej[lo:hi]].sum()
        return num, den

    def _positions(self, ids: np.ndarray) -> np.ndarray:
        if len(ids) and len(self.cand_ids) == 0:
            raise KeyError("id is not a current candidate")
        pos = np.searchsorted(self.cand_ids, ids)
        ok = (pos < len(self.cand_ids)) & (
            self.cand_ids[np.minimum(pos, len(self.cand_ids) - 1)] == ids
        )
        if not np.all(ok):
            raise KeyError("id is not a current candidate")
        return pos

    def reveal(self, vid: int, pt: np.ndarray, on_rejection: bool) -> None:
        """Record one reveal and refresh every remaining candidate.

        The revealed id leaves the candidate set if it was in it;
        revealing the same id twice is a contract violation.
        """
        if vid in self._revealed:
            raise ValueError(f"feature {vid} was already revealed")
        self._revealed.add(vid)
        point = np.asarray(pt, dtype=np.float64)
        pos = np.searchsorted(self.cand_ids, vid)
        if pos < len(self.cand_ids) and self.cand_ids[pos] == vid:
            self.cand_ids = np.delete(self.cand_ids, pos)
            self.cand_pts = np.delete(self.cand_pts, pos, axis=0)
            self.num = np.delete(self.num, pos)
            self.den = np.delete(self.den, pos)
        if len(self.cand_ids):
            w = self.kernel.one_to_many(point, self.cand_pts)
            self.den += w
            if on_rejection:
                self.num += w
        self._append_seed(point, on_rejection)

    def add_candidates(self, ids: np.ndarray, pts: np.ndarray) -> None:
        """Admit new candidates, initialized over the full reveal history."""
        new_ids = np.asarray(ids, dtype=np.int64)
        if len(new_ids) == 0:
            return
        new_pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        order = np.argsort(new_ids)
        new_ids, new_pts = new_ids[order], new_pts[order]
        if np.intersect1d(new_ids, self.cand_ids).size:
            raise ValueError("candidate id already present")
        num, den = self._sums_over_seeds(new_pts)
        where = np.searchsorted(self.cand_ids, new_ids)
        self.cand_ids = np.insert(self.cand_ids, where, new_ids)
        self.cand_pts = np.insert(self.cand_pts, where, new_pts, axis=0)
        self.num = np.insert(self.num, where, num)
        self.den = np.insert(self.den, where, den)

    def q_for(self, ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Estimates for the given candidate ids.

        Returns ``(q, defined)``; entries with a zero denominator have
        no estimate yet and are flagged false.
        """
        pos = self._positions(np.asarray(ids, dtype=np.int64))
        den = self.den[pos]
        defined = den > 0.0
        q = np.full(len(pos), np.inf, dtype=np.float64)
        q[defined] = self.num[pos[defined]] / den[defined]
        return q, defined

    def points_for(self, ids: np.ndarray) -> np.ndarray:
        return self.cand_pts[self._positions(np.asarray(ids, dtype=np.int64))]


def select_next(candidates: np.ndarray, state: QHatState, rng: np.random.Generator) -> int:
    """Pick the candidate to reveal: smallest estimate wins.

    Candidates without a defined estimate rank behind every defined one.
    When nothing is defined yet the fallback reveals the candidate whose
    folded vector has the largest max coordinate, mimicking the
    conservative large-norm-first start.  Exact ties are broken
    uniformly at random.
    """
    ids = np.asarray(candidates, dtype=np.int64)
    if len(ids) == 0:
        raise ValueError("no candidates to select from")
    if len(ids) == 1:
        return int(ids[0])
    q, defined = state.q_for(ids)
    if defined.any():
        best = q.min()
        pool = ids[q == best]
    else:
        norms = state.points_for(ids).max(axis=1)
        pool = ids[norms == norms.max()]
    if len(pool) == 1:
        return int(pool[0])
    return int(pool[rng.integers(len(pool))])
