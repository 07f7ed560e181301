"""Sequential drivers for the joint mirror procedure.

``run_jm`` consumes an (m, K) p-value matrix.  All features inside the
rejection cube or a mirror box start masked; the loop reveals one
maximal masked feature at a time (per the configured partial order)
until the running false discovery estimate drops to the target level or
the rejection side empties.  Survivors on the rejection side are the
discoveries.

``run_directional`` consumes an (m, K) z-value matrix and scans a grid
of symmetric cube thresholds, returning sign estimates at the smallest
threshold whose estimate meets the target level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .poset import ORDER_KINDS, build_index
from .regions import (
    OUTSIDE,
    REJECTION,
    MaskingScheme,
    STANDARD_SCHEME,
    classify_all,
    dfdp_hat,
    directional_counts,
    directional_signs,
    fdp_hat,
    proj,
    proj_h,
)
from .unmask import QHatState, silverman_bandwidth, select_next

log = logging.getLogger("jointmirror")

# unmask_rank sentinel for features that were never masked.
RANK_UNMASKED = -1.0


@dataclass(frozen=True, eq=False)
class JMConfig:
    """Run parameters: target level, order variant, scheme, seed, bandwidth.

    ``bandwidth`` is either the string ``"silverman"`` or an explicit
    K x K symmetric positive definite matrix.
    """

    q: float
    variant: str = "product"
    scheme: MaskingScheme = STANDARD_SCHEME
    seed: int = 0
    bandwidth: object = "silverman"

    def __post_init__(self) -> None:
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if self.variant not in ORDER_KINDS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {ORDER_KINDS}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "silverman":
                raise ValueError(f"unknown bandwidth rule {self.bandwidth!r}")
        else:
            arr = np.asarray(self.bandwidth, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise ValueError("fixed bandwidth must be a square matrix")


@dataclass
class JMResult:
    """Outcome of one run.

    ``unmask_rank`` holds the reveal step per feature, ``-1`` for
    features that started unmasked and ``inf`` for features still
    masked at termination.  ``trajectory`` has one row per step with
    columns (step, n_control, n_rejection, fdp_hat).
    """

    rejected: np.ndarray
    labels: np.ndarray
    unmask_rank: np.ndarray
    trajectory: np.ndarray
    terminal_fdp_hat: float


@dataclass
class DirectionalResult:
    """Outcome of a directional run.

    ``threshold`` is ``inf`` when no grid point met the target (then no
    feature is signed).  ``trajectory`` has one row per grid threshold
    with columns (threshold, n_control, n_rejection, dfdp_hat).
    """

    signs: np.ndarray
    threshold: float
    trajectory: np.ndarray


def _as_matrix(values: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ValueError(f"{what} must be a 2-d (m, K) matrix")
    if arr.size and not np.all(np.isfinite(arr)):
        r, c = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"non-finite {what} entry at row {r}, column {c}")
    return arr


def _resolve_bandwidth(config: JMConfig, masked_pts: np.ndarray) -> np.ndarray:
    if isinstance(config.bandwidth, str):
        return silverman_bandwidth(masked_pts)
    mat = np.asarray(config.bandwidth, dtype=np.float64)
    if mat.shape[0] != masked_pts.shape[1]:
        raise ValueError(
            f"fixed bandwidth is {mat.shape[0]} x {mat.shape[0]} but data has "
            f"{masked_pts.shape[1]} experiments"
        )
    return mat


def run_jm(pvals: np.ndarray, config: JMConfig) -> JMResult:
    """Run the procedure on an (m, K) p-value matrix."""
    p = _as_matrix(pvals, "p-value")
    m = p.shape[0]
    scheme = config.scheme
    labels = classify_all(p, scheme)
    folded = proj(p) if scheme.is_standard else proj_h(p, scheme)

    masked_ids = np.flatnonzero(labels != OUTSIDE)
    masked_pts = folded[masked_ids]
    masked_rej = labels[masked_ids] == REJECTION
    n_rejection = int(masked_rej.sum())
    n_control = int(len(masked_ids) - n_rejection)

    unmask_rank = np.full(m, np.inf, dtype=np.float64)
    unmask_rank[labels == OUTSIDE] = RANK_UNMASKED

    zeta = scheme.zeta
    # The stopping comparison is done in exact rational arithmetic so a
    # boundary case like (1 + A) == q * zeta * R stops identically on
    # every platform.
    level = Fraction(config.q) * scheme.zeta_fraction
    rng = np.random.default_rng(config.seed)

    index = build_index(masked_pts, config.variant)
    qstate: QHatState | None = None
    history: list[tuple[int, bool]] = []

    steps = [0]
    controls = [n_control]
    rejections = [n_rejection]
    fdps = [fdp_hat(n_control, n_rejection, zeta)]

    def stopped() -> bool:
        return 1 + n_control <= level * max(n_rejection, 1)

    step = 0
    while not stopped() and n_rejection > 0:
        roots = index.roots
        if len(roots) == 1:
            node = int(roots[0])
        elif config.variant == "max":
            # Tied max coordinates: choose at random so the reveal order
            # stays a function of folded coordinates alone.
            node = int(roots[rng.integers(len(roots))])
        else:
            if qstate is None:
                bw = _resolve_bandwidth(config, masked_pts)
                if history:
                    seq = np.array([h[0] for h in history], dtype=np.int64)
                    qstate = QHatState(
                        bw, roots, masked_pts[roots],
                        seed_pts=masked_pts[seq],
                        seed_rej=np.array([h[1] for h in history], dtype=bool),
                    )
                else:
                    qstate = QHatState(bw, roots, masked_pts[roots])
            node = select_next(roots, qstate, rng)
        on_rejection = bool(masked_rej[node])
        promoted = index.remove_root(node)
        if qstate is not None:
            qstate.reveal(node, masked_pts[node], on_rejection)
            if len(promoted):
                qstate.add_candidates(promoted, masked_pts[promoted])
        else:
            history.append((node, on_rejection))
        if on_rejection:
            n_rejection -= 1
        else:
            n_control -= 1
        unmask_rank[masked_ids[node]] = step
        step += 1
        steps.append(step)
        controls.append(n_control)
        rejections.append(n_rejection)
        fdps.append(fdp_hat(n_control, n_rejection, zeta))

    rejected = np.flatnonzero((labels == REJECTION) & np.isinf(unmask_rank))
    trajectory = np.column_stack(
        [np.asarray(steps, dtype=np.float64), controls, rejections, fdps]
    )
    log.info(
        "run_jm variant=%s q=%g: %d features, %d masked, %d steps, %d rejected",
        config.variant, config.q, m, len(masked_ids), step, len(rejected),
    )
    return JMResult(
        rejected=rejected,
        labels=labels,
        unmask_rank=unmask_rank,
        trajectory=trajectory,
        terminal_fdp_hat=float(fdps[-1]),
    )


def default_threshold_grid(zvals: np.ndarray) -> np.ndarray:
    """Distinct values of min |z| over the sign-coherent rows, ascending."""
    z = _as_matrix(zvals, "z-value")
    coherent = (z > 0.0).all(axis=1) | (z < 0.0).all(axis=1)
    if not coherent.any():
        return np.empty(0, dtype=np.float64)
    return np.unique(np.abs(z[coherent]).min(axis=1))


def run_directional(
    zvals: np.ndarray,
    q: float,
    threshold_grid: np.ndarray | None = None,
) -> DirectionalResult:
    """Scan cube thresholds on an (m, K) z-value matrix.

    Picks the smallest grid threshold whose running estimate meets the
    target ``q``; with no such threshold every sign estimate is 0.
    """
    z = _as_matrix(zvals, "z-value")
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if threshold_grid is None:
        grid = default_threshold_grid(z)
    else:
        grid = np.unique(np.asarray(threshold_grid, dtype=np.float64))
        if len(grid) == 0:
            raise ValueError("threshold grid is empty")
        if not np.all(np.isfinite(grid)) or grid[0] <= 0.0:
            raise ValueError("thresholds must be finite and positive")

    level = Fraction(q)
    rows = np.empty((len(grid), 4), dtype=np.float64)
    terminal = np.inf
    for g, thr in enumerate(grid):
        n_control, n_rejection = directional_counts(z, float(thr))
        rows[g] = (thr, n_control, n_rejection, dfdp_hat(n_control, n_rejection))
        if terminal == np.inf and 1 + n_control <= level * max(n_rejection, 1):
            terminal = float(thr)
    signs = directional_signs(z, terminal)
    log.info(
        "run_directional q=%g: %d rows, %d thresholds, terminal=%g, %d signed",
        q, z.shape[0], len(grid), terminal, int((signs != 0).sum()),
    )
    return DirectionalResult(signs=signs, threshold=terminal, trajectory=rows)
