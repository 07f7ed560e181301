import math

import numpy as np
import pytest
from scipy import stats

from jointmirror.engine import (
    JMConfig,
    default_threshold_grid,
    run_directional,
    run_jm,
)
from jointmirror.poset import dominance_matrix
from jointmirror.regions import OUTSIDE, REJECTION, MaskingScheme, STANDARD_SCHEME
from jointmirror.simulate import gen_pointmass


def _random_pvals(rng, m, k_dim):
    return rng.uniform(size=(m, k_dim))


def test_config_validation():
    with pytest.raises(ValueError):
        JMConfig(q=0.0)
    with pytest.raises(ValueError):
        JMConfig(q=1.0)
    with pytest.raises(ValueError):
        JMConfig(q=0.1, variant="lexicographic")
    with pytest.raises(ValueError):
        JMConfig(q=0.1, seed=-1)
    with pytest.raises(ValueError):
        JMConfig(q=0.1, bandwidth="plugin")
    with pytest.raises(ValueError):
        JMConfig(q=0.1, bandwidth=np.ones((2, 3)))


def test_rejects_non_finite_input():
    cfg = JMConfig(q=0.2)
    bad = np.array([[0.1, np.nan], [0.2, 0.3]])
    with pytest.raises(ValueError):
        run_jm(bad, cfg)


def test_all_rejection_side_stops_immediately():
    rng = np.random.default_rng(0)
    p = rng.uniform(0.0, 0.49, size=(20, 2))
    res = run_jm(p, JMConfig(q=0.1))
    np.testing.assert_array_equal(res.rejected, np.arange(20))
    assert res.trajectory.shape == (1, 4)
    assert res.terminal_fdp_hat == pytest.approx(1 / 20)
    assert np.isinf(res.unmask_rank).all()


def test_tiny_q_empties_the_rejection_set():
    pvals, _ = gen_pointmass(300, seed=1)
    res = run_jm(pvals, JMConfig(q=1e-9, variant="max"))
    assert len(res.rejected) == 0
    assert res.trajectory[-1, 2] == 0  # rejection counter drained


def test_all_outside_is_a_no_op():
    p = np.full((6, 2), 0.7)  # both components in the upper half
    res = run_jm(p, JMConfig(q=0.2))
    assert len(res.rejected) == 0
    assert res.trajectory.shape == (1, 4)
    assert (res.unmask_rank == -1.0).all()


def test_trajectory_counts_and_fdp_consistent():
    pvals, _ = gen_pointmass(400, seed=3)
    for variant in ("max", "product", "empty"):
        res = run_jm(pvals, JMConfig(q=0.15, variant=variant, seed=2))
        traj = res.trajectory
        n_steps = traj.shape[0] - 1
        rank = res.unmask_rank
        for s in range(0, n_steps + 1, max(1, n_steps // 7)):
            still_masked = (rank >= s) | np.isinf(rank)
            still_masked &= rank != -1.0
            a_s = int(((res.labels > 0) & still_masked).sum())
            r_s = int(((res.labels == REJECTION) & still_masked).sum())
            assert traj[s, 1] == a_s
            assert traj[s, 2] == r_s
            assert traj[s, 3] == pytest.approx((1 + a_s) / max(r_s, 1))
        # each reveal removes exactly one masked feature
        drops = traj[:-1, 1:3] - traj[1:, 1:3]
        assert ((drops == [1, 0]).all(axis=1) | (drops == [0, 1]).all(axis=1)).all()


def test_reveal_order_respects_partial_order():
    rng = np.random.default_rng(10)
    for trial in range(100):
        m = int(rng.integers(20, 80))
        k_dim = int(rng.integers(2, 4))
        p = _random_pvals(rng, m, k_dim)
        variant = ("product", "max")[trial % 2]
        cfg = JMConfig(q=float(rng.uniform(0.05, 0.3)), variant=variant,
                       seed=int(rng.integers(1000)))
        res = run_jm(p, cfg)
        masked = np.flatnonzero(res.labels != OUTSIDE)
        folded = np.minimum(p, 1 - p)[masked]
        lt = dominance_matrix(folded, variant)
        rank = res.unmask_rank[masked]
        revealed = np.isfinite(rank)
        for i, j in zip(*np.nonzero(lt)):
            if revealed[i] and revealed[j]:
                assert rank[j] < rank[i]


def test_max_variant_reveals_descending_norm():
    rng = np.random.default_rng(11)
    p = _random_pvals(rng, 200, 2)
    res = run_jm(p, JMConfig(q=0.02, variant="max"))
    masked = np.flatnonzero(res.labels != OUTSIDE)
    norms = np.minimum(p, 1 - p)[masked].max(axis=1)
    rank = res.unmask_rank[masked]
    revealed = np.flatnonzero(np.isfinite(rank))
    order = revealed[np.argsort(rank[revealed])]
    # with continuous inputs ties have probability zero
    assert (np.diff(norms[order]) < 0).all()
    still_masked = np.isinf(rank)
    if still_masked.any() and len(order):
        # revealed set is a prefix of the descending-norm ordering
        assert norms[order].min() >= norms[still_masked].max()


def test_nonempty_rejection_set_meets_size_floor():
    rng = np.random.default_rng(12)
    schemes = [STANDARD_SCHEME, MaskingScheme(0.25, 0.5, 1.0)]
    for trial in range(60):
        scheme = schemes[trial % 2]
        q = float(rng.uniform(0.02, 0.4))
        p = _random_pvals(rng, int(rng.integers(30, 150)), 2)
        p[: int(rng.integers(0, 20))] /= 100.0  # sprinkle joint signals
        res = run_jm(p, JMConfig(q=q, variant="max", scheme=scheme,
                                 seed=int(rng.integers(100))))
        if len(res.rejected):
            assert len(res.rejected) >= math.ceil(1.0 / (q * scheme.zeta))


def test_explicit_standard_scheme_changes_nothing():
    rng = np.random.default_rng(13)
    for trial in range(50):
        p = _random_pvals(rng, int(rng.integers(20, 120)), 2)
        seed = int(rng.integers(10_000))
        q = float(rng.uniform(0.05, 0.3))
        variant = ("max", "product", "empty")[trial % 3]
        base = run_jm(p, JMConfig(q=q, variant=variant, seed=seed))
        general = run_jm(p, JMConfig(q=q, variant=variant, seed=seed,
                                     scheme=MaskingScheme(0.5, 0.5, 1.0)))
        np.testing.assert_array_equal(base.rejected, general.rejected)
        np.testing.assert_array_equal(base.labels, general.labels)
        np.testing.assert_array_equal(base.unmask_rank, general.unmask_rank)
        np.testing.assert_array_equal(base.trajectory, general.trajectory)


def test_generalized_scheme_rescales_the_estimate():
    # with zeta = 2 a pure rejection-side input of size 3 passes at q = 0.2
    p = np.array([[0.01, 0.02], [0.03, 0.01], [0.02, 0.02]])
    wide = MaskingScheme(0.25, 0.5, 1.0)
    res = run_jm(p, JMConfig(q=0.2, scheme=wide))
    np.testing.assert_array_equal(res.rejected, [0, 1, 2])
    assert res.terminal_fdp_hat == pytest.approx(1 / 6)
    std = run_jm(p, JMConfig(q=0.2))
    assert len(std.rejected) == 0  # 1/3 > 0.2 and nothing left to reveal


def test_generalized_masking_classification_counts():
    rng = np.random.default_rng(14)
    p = _random_pvals(rng, 500, 2)
    scheme = MaskingScheme(0.25, 0.5, 0.9)
    res = run_jm(p, JMConfig(q=0.2, scheme=scheme))
    # brute classification: mirror needs one component in (0.5, 0.9],
    # the rest below 0.25; excluded points are labeled outside
    for i in range(500):
        low = p[i] < 0.25
        mir = (p[i] > 0.5) & (p[i] <= 0.9)
        if low.all():
            assert res.labels[i] == REJECTION
        elif mir.sum() == 1 and low.sum() == 1:
            assert res.labels[i] == int(np.argmax(mir)) + 1
        else:
            assert res.labels[i] == OUTSIDE


def test_identical_config_is_deterministic():
    pvals, _ = gen_pointmass(300, seed=4)
    for variant in ("max", "product", "empty"):
        cfg_a = JMConfig(q=0.2, variant=variant, seed=9)
        cfg_b = JMConfig(q=0.2, variant=variant, seed=9)
        a = run_jm(pvals, cfg_a)
        b = run_jm(pvals, cfg_b)
        np.testing.assert_array_equal(a.rejected, b.rejected)
        np.testing.assert_array_equal(a.unmask_rank, b.unmask_rank)
        np.testing.assert_array_equal(a.trajectory, b.trajectory)


def test_implied_rejection_region_is_nested():
    # region at step s: points dominated by (or equal to) a masked vector;
    # membership can only switch off as reveals progress
    rng = np.random.default_rng(15)
    pvals, _ = gen_pointmass(150, seed=5)
    res = run_jm(pvals, JMConfig(q=0.05, variant="product", seed=1))
    masked = np.flatnonzero(res.labels != OUTSIDE)
    folded = np.minimum(pvals, 1 - pvals)[masked]
    rank = res.unmask_rank[masked]
    n_steps = int(res.trajectory.shape[0] - 1)
    queries = rng.uniform(0, 0.5, size=(40, 2))
    for x in queries:
        member_prev = True
        was_member = None
        for s in range(n_steps + 1):
            alive = ((rank >= s) | np.isinf(rank))
            dominated = (x <= folded[alive]).all(axis=1)
            member = bool(dominated.any())
            if was_member is not None and member and not was_member:
                pytest.fail("rejection region grew during unmasking")
            was_member = member


# Analytic folded density of a two-sided normal p-value with unit variance.

def _pm_density(p, mu):
    c = stats.norm.isf(p / 2.0)
    return (stats.norm.pdf(c - mu) + stats.norm.pdf(c + mu)) / (2 * stats.norm.pdf(c))


_PM_CLASSES = [(0.4, (0.0, 0.0)), (0.2, (0.0, 2.5)), (0.2, (1.5, 0.0)), (0.2, (2.0, 3.0))]


def _pm_joint(a, b):
    return sum(w * _pm_density(a, mu1) * _pm_density(b, mu2)
               for w, (mu1, mu2) in _PM_CLASSES)


def test_reveal_order_tracks_oracle_probability():
    # features more likely to sit on the rejection side should be kept
    # masked longer; rank-correlate the reveal order with the analytic
    # rejection-side probability of each folded vector
    pvals, _ = gen_pointmass(600, seed=6)
    res = run_jm(pvals, JMConfig(q=1e-9, variant="empty", seed=0))
    masked = np.flatnonzero(res.labels != OUTSIDE)
    rank = res.unmask_rank[masked]
    revealed = np.isfinite(rank)
    folded = np.minimum(pvals, 1 - pvals)[masked]
    true_q = np.array([
        _pm_joint(a, b) / (_pm_joint(a, b) + _pm_joint(1 - a, b) + _pm_joint(a, 1 - b))
        for a, b in folded
    ])
    rho = stats.spearmanr(rank[revealed], true_q[revealed]).statistic
    assert rho > 0.5, f"rank correlation {rho:.3f}"


def test_oracle_identity_under_sub_half_alternatives():
    # With alternative p-value densities supported inside [0, 1/2) and
    # uniform nulls, the rejection-side share of the folded mixture at
    # any folded point equals 1 / (1 + weighted-null-share); both sides
    # are evaluated analytically on a grid.
    def alt_density(p):
        return 8.0 * (0.5 - p) if p < 0.5 else 0.0

    def comp_density(p, is_alt):
        return alt_density(p) if is_alt else 1.0

    weights = {(0, 0): 0.4, (0, 1): 0.2, (1, 0): 0.25, (1, 1): 0.15}

    def joint(a, b):
        return sum(w * comp_density(a, th[0]) * comp_density(b, th[1])
                   for th, w in weights.items())

    grid = np.linspace(0.02, 0.48, 12)
    for a in grid:
        for b in grid:
            f_rej = joint(a, b)
            mirror_mass = joint(1 - a, b) + joint(a, 1 - b)
            share = f_rej / (f_rej + mirror_mass)
            kappa_weighted = sum(
                w * comp_density(a, th[0]) * comp_density(b, th[1])
                * ((th[0] == 0) + (th[1] == 0))
                for th, w in weights.items()
            )
            mlfdr = kappa_weighted / f_rej
            assert share == pytest.approx(1.0 / (1.0 + mlfdr), rel=1e-12)


def test_fixed_bandwidth_round_trip():
    pvals, _ = gen_pointmass(200, seed=7)
    h = np.eye(2) * 0.05
    res = run_jm(pvals, JMConfig(q=0.2, variant="product", bandwidth=h))
    assert res.trajectory.shape[1] == 4
    wrong = np.eye(3) * 0.05
    with pytest.raises(ValueError):
        run_jm(pvals, JMConfig(q=0.2, variant="product", bandwidth=wrong))


def test_directional_no_threshold_passes():
    z = np.array([[0.2, 0.3], [-0.1, 0.4], [0.3, 0.1]])
    res = run_directional(z, 0.2, threshold_grid=np.array([10.0]))
    assert np.isinf(res.threshold)
    np.testing.assert_array_equal(res.signs, 0)
    assert res.trajectory[0, 3] == pytest.approx(1.0)


def test_directional_two_block_example():
    z = np.vstack([np.full((10, 2), 5.0), np.full((10, 2), -5.0)])
    res = run_directional(z, 0.2, threshold_grid=np.array([2.0, 3.0, 4.0]))
    assert res.threshold == pytest.approx(2.0)
    np.testing.assert_array_equal(res.signs[:10], 1)
    np.testing.assert_array_equal(res.signs[10:], -1)
    row = res.trajectory[0]
    assert row[3] == pytest.approx(1 / 20)


def test_default_grid_uses_sign_coherent_rows():
    z = np.array([[1.0, 2.0], [-3.0, -1.5], [2.0, -2.0], [0.5, 0.5]])
    grid = default_threshold_grid(z)
    np.testing.assert_allclose(grid, [0.5, 1.0, 1.5])
    incoherent = np.array([[2.0, -2.0], [-1.0, 3.0]])
    assert default_threshold_grid(incoherent).size == 0


def test_directional_grid_validation():
    z = np.array([[1.0, 2.0]])
    with pytest.raises(ValueError):
        run_directional(z, 0.2, threshold_grid=np.array([]))
    with pytest.raises(ValueError):
        run_directional(z, 0.2, threshold_grid=np.array([-1.0, 2.0]))
    with pytest.raises(ValueError):
        run_directional(z, 0.2, threshold_grid=np.array([np.inf]))
    with pytest.raises(ValueError):
        run_directional(z, 1.5)


def test_directional_one_experiment_prefers_rejection():
    z = np.array([[5.0], [-5.0], [4.0], [-4.5], [6.0], [-3.0], [0.1]])
    res = run_directional(z, 0.2, threshold_grid=np.array([2.0]))
    np.testing.assert_array_equal(res.signs, [1, -1, 1, -1, 1, -1, 0])
    # both tails are rejections at K = 1, not mirrors of each other
    assert res.trajectory[0, 1] == 0
    assert res.trajectory[0, 2] == 6
    assert res.trajectory[0, 3] == pytest.approx(1 / 6)


def test_directional_trajectory_scans_whole_grid():
    rng = np.random.default_rng(16)
    z = rng.standard_normal((200, 2)) + 2.5
    grid = np.array([0.5, 1.0, 1.5, 2.0])
    res = run_directional(z, 0.2, threshold_grid=grid)
    np.testing.assert_allclose(res.trajectory[:, 0], grid)
    assert res.threshold in grid or np.isinf(res.threshold)
