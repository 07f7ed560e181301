"""Synthetic data generators, evaluation metrics, and a replication harness.

Three families of generators are provided:

* a two-experiment Gaussian point-mass mixture with known per-class
  means, handy for calibration studies,
* a mediation-style design where each feature needs both a treatment
  effect on the mediator and a mediator effect on the outcome,
* a replicability design across K correlated experiments with partial
  nulls of every composition.

Every generator takes an explicit seed and draws from a single
``numpy`` generator in a fixed order, so a (config, seed) pair pins the
data exactly.  The replication harness derives the seed of replication
``r`` as ``seed + r`` and emits one summary row per method per
replication, in replication order, regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Callable

import numpy as np
from scipy import stats

from .engine import JMConfig, run_directional, run_jm
from .regions import MaskingScheme, STANDARD_SCHEME

log = logging.getLogger("jointmirror")


@dataclass(frozen=True)
class TruthTable:
    """Per-feature signal indicators: theta[i, k] = 1 when experiment k
    carries a real effect for feature i."""

    theta: np.ndarray

    @property
    def kappa(self) -> np.ndarray:
        """Number of null components per feature (0 = full alternative)."""
        return (self.theta == 0).sum(axis=1)

    @property
    def is_null(self) -> np.ndarray:
        return self.kappa >= 1

    @property
    def is_alternative(self) -> np.ndarray:
        return self.kappa == 0

    @property
    def n_alternative(self) -> int:
        return int(self.is_alternative.sum())


@dataclass(frozen=True)
class Metrics:
    fdp: float
    mfdp: float
    power: float
    n_rejected: int
    weighted_false_discoveries: int


def metrics(rejected: np.ndarray, truth: TruthTable) -> Metrics:
    """False discovery proportion, its kappa-weighted variant, and power."""
    rej = np.asarray(rejected, dtype=np.int64)
    kappa = truth.kappa
    n_rej = len(rej)
    false = int(truth.is_null[rej].sum())
    weighted = int(kappa[rej].sum())
    alt = truth.n_alternative
    true_pos = n_rej - false
    return Metrics(
        fdp=false / max(n_rej, 1),
        mfdp=weighted / max(n_rej, 1),
        power=true_pos / max(alt, 1),
        n_rejected=n_rej,
        weighted_false_discoveries=weighted,
    )


@dataclass(frozen=True)
class DirectionalMetrics:
    fdp: float
    power: float
    n_signed: int


def metrics_directional(signs: np.ndarray, true_signs: np.ndarray) -> DirectionalMetrics:
    """Directional error: a sign call is false unless it matches a real sign."""
    s = np.asarray(signs)
    truth = np.asarray(true_signs)
    called = s != 0
    n_called = int(called.sum())
    wrong = int((called & (s != truth)).sum())
    n_signal = int((truth != 0).sum())
    correct = int((called & (s == truth) & (truth != 0)).sum())
    return DirectionalMetrics(
        fdp=wrong / max(n_called, 1),
        power=correct / max(n_signal, 1),
        n_signed=n_called,
    )


def bh_max_p(pvals: np.ndarray, q: float) -> np.ndarray:
    """Step-up procedure on the per-feature maximum p-value."""
    p = np.atleast_2d(np.asarray(pvals, dtype=np.float64))
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in (0, 1), got {q}")
    worst = p.max(axis=1)
    m = worst.shape[0]
    order = np.argsort(worst, kind="stable")
    passing = np.flatnonzero(worst[order] <= q * np.arange(1, m + 1) / m)
    if len(passing) == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(order[: passing[-1] + 1])


# Gaussian point-mass mixture over two experiments.  Class weights are
# (both null, second signal only, first signal only, both signals) and
# the per-class mean vectors put the signal strength where theta says.

POINTMASS_WEIGHTS = (0.4, 0.2, 0.2, 0.2)
_POINTMASS_THETA = np.array([(0, 0), (0, 1), (1, 0), (1, 1)], dtype=np.int8)
_POINTMASS_MEANS = np.array([(0.0, 0.0), (0.0, 2.5), (1.5, 0.0), (2.0, 3.0)])


def gen_pointmass(
    m: int,
    seed: int,
    weights: tuple[float, float, float, float] = POINTMASS_WEIGHTS,
) -> tuple[np.ndarray, TruthTable]:
    """Two-sided normal p-values from the two-experiment mixture."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (4,) or (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be four non-negative numbers summing to 1")
    rng = np.random.default_rng(seed)
    cls = rng.choice(4, size=m, p=w)
    x = _POINTMASS_MEANS[cls] + rng.standard_normal((m, 2))
    pvals = 2.0 * stats.norm.sf(np.abs(x))
    return pvals, TruthTable(_POINTMASS_THETA[cls])


@dataclass(frozen=True)
class MediationConfig:
    """Two-test design: does treatment move the mediator, and does the
    mediator move the outcome.  A feature is a true mediator only when
    both effects are present.

    ``pi00`` is the share with neither effect, ``tilde_pi1`` the share
    of true mediators among features with any effect; the two one-sided
    compositions split the remainder evenly.
    """

    n: int = 250
    m: int = 5000
    pi00: float = 0.4
    tilde_pi1: float = 0.5
    alpha_effect: float = 0.25
    beta_effect: float = 0.375
    beta0: float = 0.3
    treatment_rate: float = 0.2

    def __post_init__(self) -> None:
        if self.n < 4:
            raise ValueError("need at least 4 subjects for the two regressions")
        if not (0.0 <= self.pi00 <= 1.0 and 0.0 <= self.tilde_pi1 <= 1.0):
            raise ValueError("pi00 and tilde_pi1 must lie in [0, 1]")
        if not (0.0 < self.treatment_rate < 1.0):
            raise ValueError("treatment_rate must lie in (0, 1)")

    @property
    def class_weights(self) -> np.ndarray:
        """(both null, outcome-only, treatment-only, both effects)."""
        pi11 = self.tilde_pi1 * (1.0 - self.pi00)
        side = (1.0 - self.pi00 - pi11) / 2.0
        return np.array([self.pi00, side, side, pi11])


def gen_mediation(config: MediationConfig, seed: int) -> tuple[np.ndarray, TruthTable]:
    """Exact-t two-sided p-values for the two mediation regressions."""
    rng = np.random.default_rng(seed)
    n, m = config.n, config.m
    cls = rng.choice(4, size=m, p=config.class_weights)
    theta = _POINTMASS_THETA[cls]
    alpha = config.alpha_effect * theta[:, 0]
    beta = config.beta_effect * theta[:, 1]

    x = rng.binomial(1, config.treatment_rate, size=n).astype(np.float64)
    tries = 0
    while x.min() == x.max():
        tries += 1
        if tries > 1000:
            raise RuntimeError("could not draw a non-constant treatment vector")
        x = rng.binomial(1, config.treatment_rate, size=n).astype(np.float64)
    med = x[:, None] * alpha[None, :] + rng.standard_normal((n, m))
    out = med * beta[None, :] + config.beta0 * x[:, None] + rng.standard_normal((n, m))

    xc = x - x.mean()
    sxx = float(xc @ xc)
    mc = med - med.mean(axis=0)
    yc = out - out.mean(axis=0)

    # Mediator on treatment: slope t-test with n - 2 residual df.
    sxm = xc @ mc
    smm = (mc * mc).sum(axis=0)
    slope = sxm / sxx
    rss1 = np.maximum(smm - slope * sxm, 0.0)
    tstat1 = slope / np.sqrt(rss1 / (n - 2) / sxx)
    p1 = 2.0 * stats.t.sf(np.abs(tstat1), df=n - 2)

    # Outcome on mediator and treatment: mediator-slope t-test, n - 3 df.
    sxy = xc @ yc
    smy = (mc * yc).sum(axis=0)
    syy = (yc * yc).sum(axis=0)
    det = smm * sxx - sxm ** 2
    if np.any(det <= 0):
        raise RuntimeError("degenerate design: mediator collinear with treatment")
    b_med = (sxx * smy - sxm * sxy) / det
    b_trt = (smm * sxy - sxm * smy) / det
    rss2 = np.maximum(syy - b_med * smy - b_trt * sxy, 0.0)
    tstat2 = b_med / np.sqrt(rss2 / (n - 3) * sxx / det)
    p2 = 2.0 * stats.t.sf(np.abs(tstat2), df=n - 3)

    return np.column_stack([p1, p2]), TruthTable(theta)


@dataclass(frozen=True)
class ReplicabilityConfig:
    """K experiments per feature with block-correlated z-values.

    A feature is a global null with probability ``pi0``, a full signal
    with probability ``pi1``, and otherwise draws one of the mixed
    signal patterns uniformly.  Signal means are sampled from
    ``+-{3,4,5}`` and rescaled per experiment by
    ``2 - w0 - 2k(1 - w0)/K``, so ``w0 = 1`` gives every experiment the
    same strength.  Within an experiment, features correlate in
    compound-symmetry blocks of size ``m / b``.
    """

    m: int = 10000
    n_experiments: int = 2
    pi1: float = 0.01
    pi0: float = 0.8
    w0: float = 1.0
    b: int = 10
    rho: float = 0.5
    mu_pool: tuple[float, ...] = (3.0, 4.0, 5.0)

    def __post_init__(self) -> None:
        if self.n_experiments < 1:
            raise ValueError("need at least one experiment")
        if not (0.0 <= self.pi0 <= 1.0 and 0.0 <= self.pi1 <= 1.0
                and self.pi0 + self.pi1 <= 1.0):
            raise ValueError("pi0 and pi1 must be a sub-probability pair")
        if self.n_experiments == 1 and self.pi0 + self.pi1 < 1.0:
            raise ValueError("K = 1 leaves no mixed patterns; pi0 + pi1 must be 1")
        if self.m % self.b != 0:
            raise ValueError(f"block count {self.b} must divide m = {self.m}")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError("rho must lie in [0, 1)")


def gen_replicability(
    config: ReplicabilityConfig, seed: int
) -> tuple[np.ndarray, TruthTable, np.ndarray]:
    """Two-sided normal p-values, truth table, and the raw z-values."""
    rng = np.random.default_rng(seed)
    m, k_dim = config.m, config.n_experiments
    rest = max(1.0 - config.pi0 - config.pi1, 0.0)
    cls = rng.choice(3, size=m, p=[config.pi0, config.pi1, rest])
    theta = np.zeros((m, k_dim), dtype=np.int8)
    theta[cls == 1] = 1
    mixed = np.flatnonzero(cls == 2)
    if len(mixed):
        codes = rng.integers(1, 2 ** k_dim - 1, size=len(mixed))
        theta[mixed] = (codes[:, None] >> np.arange(k_dim)[None, :]) & 1

    pool = np.concatenate([-np.asarray(config.mu_pool), np.asarray(config.mu_pool)])
    base = np.zeros((m, k_dim))
    signal = theta == 1
    base[signal] = rng.choice(pool, size=int(signal.sum()))
    scale = 2.0 - config.w0 - 2.0 * np.arange(1, k_dim + 1) * (1.0 - config.w0) / k_dim
    mu = base * scale[None, :]

    block = m // config.b
    zvals = np.empty((m, k_dim))
    for k in range(k_dim):
        shared = np.repeat(rng.standard_normal(config.b), block)
        noise = rng.standard_normal(m)
        zvals[:, k] = mu[:, k] + np.sqrt(config.rho) * shared + np.sqrt(1.0 - config.rho) * noise
    pvals = 2.0 * stats.norm.sf(np.abs(zvals))
    return pvals, TruthTable(theta), zvals


def gen_directional(
    m: int,
    seed: int,
    n_experiments: int = 2,
    mu: float = 3.0,
    pi_pos: float = 0.15,
    pi_neg: float = 0.15,
) -> tuple[np.ndarray, np.ndarray]:
    """z-values with known signs for the directional variant.

    Features are all-positive, all-negative, all-zero, or carry a single
    nonzero component of random sign; only the first two kinds count as
    true signals.  Returns ``(zvals, true_signs)``.
    """
    if not (0.0 <= pi_pos and 0.0 <= pi_neg and pi_pos + pi_neg <= 1.0):
        raise ValueError("pi_pos and pi_neg must be a sub-probability pair")
    rng = np.random.default_rng(seed)
    rest = 1.0 - pi_pos - pi_neg
    cls = rng.choice(4, size=m, p=[pi_pos, pi_neg, rest / 2.0, rest / 2.0])
    means = np.zeros((m, n_experiments))
    means[cls == 0] = mu
    means[cls == 1] = -mu
    partial = np.flatnonzero(cls == 3)
    if len(partial):
        cols = rng.integers(n_experiments, size=len(partial))
        signs = rng.choice([-1.0, 1.0], size=len(partial))
        means[partial, cols] = mu * signs
    true_signs = np.zeros(m, dtype=np.int8)
    true_signs[cls == 0] = 1
    true_signs[cls == 1] = -1
    zvals = means + rng.standard_normal((m, n_experiments))
    return zvals, true_signs


# Analytic expected counts for cube rejection regions [0, t]^K.


@dataclass(frozen=True)
class FeatureClass:
    """A block of features sharing a signal pattern.

    ``alt_cdfs`` holds the p-value CDF of each signal component; null
    components are uniform and implicit.  ``count`` may be fractional:
    the formulas are linear, so expected class sizes give unconditional
    expectations.
    """

    count: float
    alt_cdfs: tuple[Callable[[float], float], ...] = ()


@dataclass(frozen=True)
class ExpectedCounts:
    false_discoveries: float
    controls: float
    max_p_bound: float


def expected_counts(
    t: float, classes: list[FeatureClass], n_experiments: int
) -> ExpectedCounts:
    """Expected rejection-side false counts and mirror-side counts at
    cube half-width ``t``, plus the per-feature thresholding bound
    ``(m - m0) t`` that a max-p cut at ``t`` would carry."""
    if not (0.0 < t < 0.5):
        raise ValueError("t must lie in (0, 1/2)")
    e_fd = 0.0
    e_controls = 0.0
    m_total = 0.0
    m_alt = 0.0
    for cl in classes:
        kappa = n_experiments - len(cl.alt_cdfs)
        if kappa < 0:
            raise ValueError("more signal CDFs than experiments")
        m_total += cl.count
        if kappa == 0:
            m_alt += cl.count
        alt_at_t = [f(t) for f in cl.alt_cdfs]
        prod_alt = float(np.prod(alt_at_t)) if alt_at_t else 1.0
        null_cube = t ** kappa
        if kappa >= 1:
            e_fd += cl.count * null_cube * prod_alt
        # Mirror mass: one null component flipped high, or one signal
        # component flipped high with the others still low.
        per_feature = kappa * null_cube * prod_alt
        for j, f_j in enumerate(cl.alt_cdfs):
            others = prod_alt / alt_at_t[j] if alt_at_t[j] > 0 else float(
                np.prod([v for i, v in enumerate(alt_at_t) if i != j])
            )
            per_feature += null_cube * (1.0 - f_j(1.0 - t)) * others
        e_controls += cl.count * per_feature
    return ExpectedCounts(
        false_discoveries=e_fd,
        controls=e_controls,
        max_p_bound=(m_total - m_alt) * t,
    )


def folded_gaussian_cdf(mu: float) -> Callable[[float], float]:
    """CDF of the two-sided p-value ``2 Phi(-|X|)`` for ``X ~ N(mu, 1)``."""

    def cdf(t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t >= 1.0:
            return 1.0
        c = stats.norm.isf(t / 2.0)
        return float(stats.norm.cdf(mu - c) + stats.norm.cdf(-mu - c))

    return cdf


def pointmass_classes(
    m: float, weights: tuple[float, float, float, float] = POINTMASS_WEIGHTS
) -> list[FeatureClass]:
    """Feature classes matching :func:`gen_pointmass` with expected sizes."""
    w = np.asarray(weights, dtype=np.float64)
    classes = []
    for idx in range(4):
        mus = _POINTMASS_MEANS[idx][_POINTMASS_THETA[idx] == 1]
        classes.append(
            FeatureClass(
                count=float(m * w[idx]),
                alt_cdfs=tuple(folded_gaussian_cdf(float(v)) for v in mus),
            )
        )
    return classes


def count_region_members(pvals: np.ndarray, t: float) -> tuple[int, int]:
    """Empirical (controls, rejections) for the cube region [0, t]^K."""
    if not (0.0 < t < 0.5):
        raise ValueError("t must lie in (0, 1/2)")
    p = np.atleast_2d(np.asarray(pvals, dtype=np.float64))
    k_dim = p.shape[1]
    low = (p <= t).sum(axis=1)
    high = (p >= 1.0 - t).sum(axis=1)
    n_rejection = int((low == k_dim).sum())
    n_control = int(((high == 1) & (low == k_dim - 1)).sum())
    return n_control, n_rejection


# Replication harness.

PVALUE_METHODS = ("jm.max", "jm.product", "jm.empty", "bh_max_p")
SUMMARY_COLUMNS = ("rep", "method", "q", "config_hash", "fdp", "mfdp", "power", "runtime_ms")

_MEDIATION_PRESETS = {
    "mediation": {},
    "mediation-gnull": dict(pi00=1.0, tilde_pi1=0.0, alpha_effect=0.5, beta_effect=0.75),
    "mediation-snull": dict(pi00=0.90, tilde_pi1=0.0, alpha_effect=0.5, beta_effect=0.75),
    "mediation-dnull": dict(pi00=0.60, tilde_pi1=0.0, alpha_effect=0.5, beta_effect=0.75),
    "mediation-salter": dict(pi00=0.88, tilde_pi1=1.0 / 6.0, alpha_effect=0.5, beta_effect=0.75),
    "mediation-dalter": dict(pi00=0.40, tilde_pi1=1.0 / 3.0, alpha_effect=0.5, beta_effect=0.75),
}

PRESET_NAMES = ("pointmass", "replicability", "directional") + tuple(_MEDIATION_PRESETS)


@dataclass
class PresetData:
    kind: str  # "pvalue" or "zvalue"
    matrix: np.ndarray
    truth: TruthTable | None = None
    true_signs: np.ndarray | None = None


def _apply_overrides(defaults: dict, overrides: dict, allowed: set[str], preset: str) -> dict:
    merged = dict(defaults)
    for key, value in (overrides or {}).items():
        if key not in allowed:
            raise ValueError(f"preset {preset!r} does not take parameter {key!r}")
        merged[key] = value
    return merged


def generate_preset(name: str, seed: int, overrides: dict | None = None) -> PresetData:
    """Build one replication's data for a named preset."""
    overrides = dict(overrides or {})
    if name == "pointmass":
        params = _apply_overrides(
            dict(m=2000, pi00=0.4, pi01=0.2, pi10=0.2, pi11=0.2),
            overrides, {"m", "pi00", "pi01", "pi10", "pi11"}, name,
        )
        weights = (params["pi00"], params["pi01"], params["pi10"], params["pi11"])
        pvals, truth = gen_pointmass(int(params["m"]), seed, weights)
        return PresetData("pvalue", pvals, truth=truth)
    if name in _MEDIATION_PRESETS:
        base = MediationConfig(**_MEDIATION_PRESETS[name])
        valid = {f.name for f in fields(MediationConfig)}
        params = _apply_overrides({}, overrides, valid, name)
        config = replace(base, **{k: (int(v) if k in ("n", "m") else v) for k, v in params.items()})
        pvals, truth = gen_mediation(config, seed)
        return PresetData("pvalue", pvals, truth=truth)
    if name == "replicability":
        valid = {f.name for f in fields(ReplicabilityConfig)}
        params = _apply_overrides({}, overrides, valid | {"K"}, name)
        if "K" in params:
            params["n_experiments"] = int(params.pop("K"))
        for key in ("m", "n_experiments", "b"):
            if key in params:
                params[key] = int(params[key])
        config = replace(ReplicabilityConfig(), **params)
        pvals, truth, _ = gen_replicability(config, seed)
        return PresetData("pvalue", pvals, truth=truth)
    if name == "directional":
        params = _apply_overrides(
            dict(m=5000, K=2, mu=3.0, pi_pos=0.15, pi_neg=0.15),
            overrides, {"m", "K", "mu", "pi_pos", "pi_neg"}, name,
        )
        zvals, true_signs = gen_directional(
            int(params["m"]), seed, n_experiments=int(params["K"]),
            mu=params["mu"], pi_pos=params["pi_pos"], pi_neg=params["pi_neg"],
        )
        return PresetData("zvalue", zvals, true_signs=true_signs)
    raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")


def study_hash(payload: dict) -> str:
    """Stable short hash of a study configuration."""
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class _RepTask:
    preset: str
    overrides: tuple
    q: float
    scheme: MaskingScheme
    bandwidth: object
    seed: int
    rep: int
    config_hash: str
    methods: tuple


def _format_float(x: float) -> str:
    return repr(float(x))


def _run_one_rep(task: _RepTask) -> list[dict]:
    data = generate_preset(task.preset, task.seed + task.rep, dict(task.overrides))
    rows = []
    for method in task.methods:
        start = time.perf_counter()
        if method == "bh_max_p":
            rejected = bh_max_p(data.matrix, task.q)
            met = metrics(rejected, data.truth)
            fdp, mfdp, power = met.fdp, met.mfdp, met.power
        elif method == "jm.directional":
            res = run_directional(data.matrix, task.q)
            dmet = metrics_directional(res.signs, data.true_signs)
            fdp, mfdp, power = dmet.fdp, None, dmet.power
        else:
            variant = method.split(".", 1)[1]
            config = JMConfig(
                q=task.q, variant=variant, scheme=task.scheme,
                seed=task.seed + task.rep, bandwidth=task.bandwidth,
            )
            res = run_jm(data.matrix, config)
            met = metrics(res.rejected, data.truth)
            fdp, mfdp, power = met.fdp, met.mfdp, met.power
        runtime_ms = (time.perf_counter() - start) * 1000.0
        rows.append({
            "rep": task.rep,
            "method": method,
            "q": _format_float(task.q),
            "config_hash": task.config_hash,
            "fdp": _format_float(fdp),
            "mfdp": "" if mfdp is None else _format_float(mfdp),
            "power": _format_float(power),
            "runtime_ms": f"{runtime_ms:.3f}",
        })
    return rows


def run_replications(
    preset: str,
    q: float,
    reps: int,
    seed: int,
    threads: int = 1,
    scheme: MaskingScheme = STANDARD_SCHEME,
    bandwidth: object = "silverman",
    overrides: dict | None = None,
    methods: tuple | None = None,
) -> list[dict]:
    """Run a replication study; returns summary rows in replication order."""
    if reps < 1:
        raise ValueError("need at least one replication")
    if threads < 1:
        raise ValueError("threads must be positive")
    overrides = dict(overrides or {})
    if preset not in PRESET_NAMES:
        raise ValueError(f"unknown preset {preset!r}; expected one of {PRESET_NAMES}")
    if methods is None:
        kind = "zvalue" if preset == "directional" else "pvalue"
        methods = ("jm.directional",) if kind == "zvalue" else PVALUE_METHODS
    payload = {
        "preset": preset, "overrides": overrides, "q": q, "reps": reps,
        "seed": seed, "scheme": (scheme.alpha, scheme.lam, scheme.nu),
        "bandwidth": bandwidth if isinstance(bandwidth, str) else np.asarray(bandwidth).tolist(),
        "methods": list(methods),
    }
    config_hash = study_hash(payload)
    tasks = [
        _RepTask(
            preset=preset, overrides=tuple(sorted(overrides.items())), q=q,
            scheme=scheme, bandwidth=bandwidth, seed=seed, rep=rep,
            config_hash=config_hash, methods=tuple(methods),
        )
        for rep in range(reps)
    ]
    log.info("study %s: preset=%s reps=%d threads=%d", config_hash, preset, reps, threads)
    if threads == 1:
        nested = [_run_one_rep(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            nested = list(pool.map(_run_one_rep, tasks))
    return [row for rows in nested for row in rows]
