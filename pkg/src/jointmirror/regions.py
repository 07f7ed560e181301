"""Masking geometry for the joint mirror procedure.

A feature is tested through a vector of K p-values, one per experiment.
The unit cube splits into three zones relative to a masking scheme:

* the rejection cube ``[0, alpha)^K``,
* K mirror boxes, one per experiment: the k-th box keeps every other
  component inside ``[0, alpha)`` while component k falls in the
  interval ``(lam, nu]``,
* everything else, which is never masked.

Masked features are only seen through their folded coordinates, so
rejection-side and mirror-side points are indistinguishable until the
engine reveals them.  The standard scheme ``(1/2, 1/2, 1]`` folds
``t -> min(t, 1 - t)``; the generalized scheme rescales the mirror
interval by ``zeta = (nu - lam) / alpha`` so the fold stays a bijection
onto ``[0, alpha)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# Integer label codes used by the vectorized classifiers.
# 0 marks the rejection cube, k in 1..K marks the k-th mirror box.
OUTSIDE = -1
REJECTION = 0


@dataclass(frozen=True)
class MaskingScheme:
    """Masking parameters ``(alpha, lam, nu]`` with ``0 < alpha <= lam < nu <= 1``.

    ``alpha`` is the half-width of the rejection cube, ``(lam, nu]`` the
    mirror interval that gets folded back onto ``[0, alpha)``.
    """

    alpha: float = 0.5
    lam: float = 0.5
    nu: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= self.lam < self.nu <= 1.0):
            raise ValueError(
                f"invalid masking scheme (alpha={self.alpha}, lam={self.lam}, "
                f"nu={self.nu}): need 0 < alpha <= lam < nu <= 1"
            )

    @property
    def zeta(self) -> float:
        """Length ratio of the mirror interval to the rejection interval."""
        return (self.nu - self.lam) / self.alpha

    @property
    def zeta_fraction(self) -> Fraction:
        # Exact rational value, used by the engine's stopping comparison.
        return (Fraction(self.nu) - Fraction(self.lam)) / Fraction(self.alpha)

    @property
    def is_standard(self) -> bool:
        return self.alpha == 0.5 and self.lam == 0.5 and self.nu == 1.0


STANDARD_SCHEME = MaskingScheme(0.5, 0.5, 1.0)


def _check_unit_range(pvals: np.ndarray) -> None:
    if pvals.size and (not np.all(pvals >= 0.0) or not np.all(pvals <= 1.0)):
        bad = np.argwhere((pvals < 0.0) | (pvals > 1.0) | ~np.isfinite(pvals))
        where = tuple(int(v) for v in bad[0])
        if len(where) == 2:
            raise ValueError(f"p-value out of [0, 1] at row {where[0]}, column {where[1]}")
        raise ValueError(f"p-value out of [0, 1] at index {where}")


def proj(pvals: np.ndarray) -> np.ndarray:
    """Standard fold ``t -> min(t, 1 - t)``, applied componentwise."""
    p = np.asarray(pvals, dtype=np.float64)
    _check_unit_range(p)
    return np.minimum(p, 1.0 - p)


def proj_h(pvals: np.ndarray, scheme: MaskingScheme) -> np.ndarray:
    """Generalized fold: mirror-interval components map to ``(nu - t) / zeta``.

    Components outside ``(lam, nu]`` pass through unchanged.  Reduces to
    :func:`proj` under the standard scheme.
    """
    p = np.asarray(pvals, dtype=np.float64)
    _check_unit_range(p)
    out = p.copy()
    sel = (p > scheme.lam) & (p <= scheme.nu)
    out[sel] = (scheme.nu - p[sel]) / scheme.zeta
    return out


def classify_all(pvals: np.ndarray, scheme: MaskingScheme = STANDARD_SCHEME) -> np.ndarray:
    """Label every row of an (m, K) p-value matrix.

    Returns an int array: ``REJECTION`` (0) for rows inside the rejection
    cube, ``k`` in 1..K for rows in the k-th mirror box, ``OUTSIDE`` (-1)
    for the rest.  Components exactly at ``alpha`` or ``lam`` fall outside
    the masked zones, so the three kinds partition the cube.
    """
    p = np.atleast_2d(np.asarray(pvals, dtype=np.float64))
    _check_unit_range(p)
    m, k_dim = p.shape
    below = p < scheme.alpha
    in_mirror = (p > scheme.lam) & (p <= scheme.nu)
    n_below = below.sum(axis=1)
    n_mirror = in_mirror.sum(axis=1)
    labels = np.full(m, OUTSIDE, dtype=np.int64)
    labels[n_below == k_dim] = REJECTION
    one_mirror = (n_mirror == 1) & (n_below == k_dim - 1)
    if one_mirror.any():
        labels[one_mirror] = np.argmax(in_mirror[one_mirror], axis=1) + 1
    return labels


def classify(pvals: np.ndarray, scheme: MaskingScheme = STANDARD_SCHEME) -> int:
    """Label a single K-vector of p-values (see :func:`classify_all`)."""
    p = np.asarray(pvals, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("classify expects a single p-value vector")
    return int(classify_all(p[None, :], scheme)[0])


def label_name(code: int) -> str:
    if code == OUTSIDE:
        return "outside"
    if code == REJECTION:
        return "rejection"
    return f"mirror:{code}"


def fdp_hat(n_control: int, n_rejection: int, zeta: float = 1.0) -> float:
    """Conservative false discovery proportion estimate.

    ``n_control`` counts masked mirror-side rows, ``n_rejection`` masked
    rejection-side rows.  ``zeta`` rescales the numerator for generalized
    masking schemes; the standard scheme has ``zeta = 1``.
    """
    if n_control < 0 or n_rejection < 0:
        raise ValueError("negative region count")
    if zeta <= 0.0:
        raise ValueError("zeta must be positive")
    return (1.0 + n_control) / (zeta * max(n_rejection, 1))


# Directional (z-value) variant.  Rejection regions are the cubes
# [t, inf)^K and -[t, inf)^K and each gets K mirror boxes obtained by
# flipping the sign of one coordinate.

SIGN_POSITIVE = 1
SIGN_NEGATIVE = -1
SIGN_NONE = 0


def classify_directional(zvals: np.ndarray, threshold: float) -> tuple[str, int | None]:
    """Label one K-vector of z-values against threshold ``t > 0``.

    Returns ``(kind, experiment)`` where kind is one of ``"positive"``,
    ``"negative"``, ``"mirror_pos"``, ``"mirror_neg"``, ``"outside"``; the
    experiment index (1-based) is set for mirror kinds only.  Rejection
    kinds take precedence, which only matters at K = 1 where the mirror
    boxes coincide with the opposite rejection cube.
    """
    z = np.asarray(zvals, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("classify_directional expects a single z-vector")
    if not threshold > 0.0:
        raise ValueError("threshold must be positive")
    k_dim = z.shape[0]
    hi = z >= threshold
    lo = z <= -threshold
    if hi.all():
        return "positive", None
    if lo.all():
        return "negative", None
    pos_box = lo.sum() == 1 and hi.sum() == k_dim - 1
    neg_box = hi.sum() == 1 and lo.sum() == k_dim - 1
    if pos_box and neg_box:
        # K = 2 only: the one-flip boxes of the two rejection cubes
        # coincide as sets, so pick the side of the larger-magnitude
        # coordinate (ties by coordinate position), keeping the labels
        # antisymmetric under z -> -z.
        i_hi, i_lo = int(np.argmax(hi)), int(np.argmax(lo))
        if abs(z[i_hi]) > abs(z[i_lo]) or (abs(z[i_hi]) == abs(z[i_lo]) and i_hi < i_lo):
            return "mirror_pos", i_lo + 1
        return "mirror_neg", i_hi + 1
    if pos_box:
        return "mirror_pos", int(np.argmax(lo)) + 1
    if neg_box:
        return "mirror_neg", int(np.argmax(hi)) + 1
    return "outside", None


def directional_counts(zvals: np.ndarray, threshold: float) -> tuple[int, int]:
    """Mirror and rejection totals over all rows of an (m, K) z-matrix.

    Returns ``(n_control, n_rejection)`` where the control total counts
    rows in any of the 2K mirror boxes and the rejection total counts
    rows in either rejection cube.
    """
    z = np.atleast_2d(np.asarray(zvals, dtype=np.float64))
    if not threshold > 0.0:
        raise ValueError("threshold must be positive")
    k_dim = z.shape[1]
    hi = (z >= threshold).sum(axis=1)
    lo = (z <= -threshold).sum(axis=1)
    rej = (hi == k_dim) | (lo == k_dim)
    mirror = ((lo == 1) & (hi == k_dim - 1)) | ((hi == 1) & (lo == k_dim - 1))
    mirror &= ~rej
    return int(mirror.sum()), int(rej.sum())


def directional_signs(zvals: np.ndarray, threshold: float) -> np.ndarray:
    """Per-row sign estimate at a threshold: +1, -1, or 0."""
    z = np.atleast_2d(np.asarray(zvals, dtype=np.float64))
    if not np.isfinite(threshold):
        return np.zeros(z.shape[0], dtype=np.int8)
    k_dim = z.shape[1]
    signs = np.zeros(z.shape[0], dtype=np.int8)
    signs[(z >= threshold).sum(axis=1) == k_dim] = SIGN_POSITIVE
    signs[(z <= -threshold).sum(axis=1) == k_dim] = SIGN_NEGATIVE
    return signs


def dfdp_hat(n_control: int, n_rejection: int) -> float:
    """Directional analogue of :func:`fdp_hat` (no zeta rescaling)."""
    if n_control < 0 or n_rejection < 0:
        raise ValueError("negative region count")
    return (1.0 + n_control) / max(n_rejection, 1)
