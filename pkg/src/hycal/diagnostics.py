"""Sampling diagnostics for the angular/radial independence claims.

Under an isotropic Gaussian difference vector, the cosine of the
difference against a fixed axis (a pure function of direction) and the
scaled norm (a pure function of radius) are independent, and a label that
depends on both carries more information jointly than through either cue
alone. These checks validate both statements empirically with plug-in
histogram estimators whose tolerance is calibrated on provably
independent data at the same sample size and binning.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError

_NEGATIVE_MI_TOL = 1e-12


def default_bin_count(n: int) -> int:
    """Equal-width bin count ceil(n^(1/3)), capped at 64."""
    return min(64, int(math.ceil(n ** (1.0 / 3.0))))


def _bin_indices(x: np.ndarray, n_bins: int) -> np.ndarray:
    lo = float(x.min())
    hi = float(x.max())
    if hi == lo:
        return np.zeros(x.shape[0], dtype=np.int64)
    idx = np.floor((x - lo) / (hi - lo) * n_bins).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


def _entropy(counts: np.ndarray) -> float:
    p = counts.reshape(-1).astype(np.float64)
    p = p[p > 0]
    p /= p.sum()
    return float(-math.fsum((p * np.log(p)).tolist()))


def _plugin_mi(counts: np.ndarray) -> float:
    """Plug-in MI in nats of a 2-D contingency table."""
    total = counts.sum()
    if total == 0:
        raise ConfigError("cannot estimate MI from an empty histogram")
    p = counts.astype(np.float64) / total
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    rows, cols = np.nonzero(p)
    vals = p[rows, cols] * (
        np.log(p[rows, cols]) - np.log(px[rows]) - np.log(py[cols])
    )
    mi = float(math.fsum(vals.tolist()))
    if mi < 0.0:
        if mi < -_NEGATIVE_MI_TOL:
            raise AssertionError(f"plug-in MI {mi} below float tolerance")
        mi = 0.0
    return mi


def _conditional_mi(counts_3d: np.ndarray) -> float:
    """Plug-in I(X; Z \\| Y) from a 3-D table with axes (X, Y, Z)."""
    total = counts_3d.sum()
    vals = []
    for j in range(counts_3d.shape[1]):
        slab = counts_3d[:, j, :]
        weight = slab.sum() / total
        if weight > 0:
            vals.append(weight * _plugin_mi(slab))
    return float(math.fsum(vals))


def binned_mi(x: np.ndarray, y: np.ndarray, n_bins: int | None = None) -> float:
    """Plug-in MI in nats between two scalar samples, equal-width binned."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ConfigError("binned_mi needs two equal-length 1-D samples")
    bins = n_bins if n_bins is not None else default_bin_count(x.size)
    joint = np.bincount(
        _bin_indices(x, bins) * bins + _bin_indices(y, bins), minlength=bins * bins
    ).reshape(bins, bins)
    return _plugin_mi(joint)


@dataclass(frozen=True, eq=False)
class SurrogateSampleSet:
    """Cosine-vs-axis and scaled-norm statistics of isotropic differences."""

    c: np.ndarray  # cosine against the first coordinate axis, in [-1, 1]
    m: np.ndarray  # norm divided by sigma, >= 0
    d: int
    sigma: float
    seed: int


def draw_surrogate(d: int, sigma: float, n: int, seed: int) -> SurrogateSampleSet:
    """Draw n isotropic Gaussian differences and their (C, M) statistics."""
    if d < 2:
        raise ConfigError(f"d must be >= 2 (direction is trivial at d=1), got {d}")
    if sigma <= 0.0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    delta = sigma * rng.standard_normal((n, d))
    r = np.linalg.norm(delta, axis=1)
    # A zero vector has probability zero; nudge to keep C defined.
    r = np.where(r == 0.0, np.finfo(np.float64).tiny, r)
    c = np.clip(delta[:, 0] / r, -1.0, 1.0)
    m = r / sigma
    c.setflags(write=False)
    m.setflags(write=False)
    return SurrogateSampleSet(c=c, m=m, d=d, sigma=sigma, seed=seed)


@dataclass(frozen=True)
class IndependenceReport:
    d: int
    sigma: float
    n: int
    seed: int
    n_bins: int
    pearson_corr: float
    binned_mi: float
    joint_vs_sum_entropy_gap: float

    def as_dict(self) -> dict[str, float | int]:
        return asdict(self)


def independence_check(
    d: int, sigma: float, n: int, seed: int, n_bins: int | None = None
) -> IndependenceReport:
    """Estimate the dependence between the angular and radial statistics.

    Reports the Pearson correlation of (C, M), the plug-in histogram
    mutual information, and the plug-in entropy gap H(C, M) - H(C) - H(M)
    (the negated MI, reported separately as a cross-check).
    """
    if n < 10_000:
        raise ConfigError(f"independence check needs n >= 10^4, got {n}")
    s = draw_surrogate(d, sigma, n, seed)
    bins = n_bins if n_bins is not None else default_bin_count(n)
    ci = _bin_indices(s.c, bins)
    mi_idx = _bin_indices(s.m, bins)
    joint = np.bincount(ci * bins + mi_idx, minlength=bins * bins).reshape(bins, bins)
    mi = _plugin_mi(joint)
    gap = _entropy(joint) - _entropy(joint.sum(axis=1)) - _entropy(joint.sum(axis=0))
    corr = float(np.corrcoef(s.c, s.m)[0, 1])
    return IndependenceReport(
        d=d,
        sigma=sigma,
        n=n,
        seed=seed,
        n_bins=bins,
        pearson_corr=corr,
        binned_mi=mi,
        joint_vs_sum_entropy_gap=gap,
    )


def calibrate_independence_epsilon(
    n: int, n_bins: int, seed: int, trials: int = 5
) -> float:
    """Tolerance for the independence MI assert.

    Runs the identical estimator on provably independent uniform pairs and
    returns 3x the largest absolute deviation from zero across trials.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    worst = 0.0
    for _ in range(trials):
        x = rng.uniform(size=n)
        y = rng.uniform(size=n)
        joint = np.bincount(
            _bin_indices(x, n_bins) * n_bins + _bin_indices(y, n_bins),
            minlength=n_bins * n_bins,
        ).reshape(n_bins, n_bins)
        worst = max(worst, abs(_plugin_mi(joint)))
    return 3.0 * worst


def calibrate_label_epsilon(n: int, n_bins: int, seed: int, trials: int = 5) -> float:
    """Tolerance for label-MI asserts.

    Estimates MI between an independent fair coin and (a) one binned
    uniform and (b) a pair of binned uniforms, matching the estimator
    shapes used by the gain check, and returns 3x the worst deviation.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 202]))
    worst = 0.0
    for _ in range(trials):
        labels = rng.integers(0, 2, size=n)
        x = _bin_indices(rng.uniform(size=n), n_bins)
        y = _bin_indices(rng.uniform(size=n), n_bins)
        single = np.zeros((2, n_bins), dtype=np.int64)
        np.add.at(single, (labels, x), 1)
        worst = max(worst, abs(_plugin_mi(single)))
        pair = np.zeros((2, n_bins * n_bins), dtype=np.int64)
        np.add.at(pair, (labels, x * n_bins + y), 1)
        worst = max(worst, abs(_plugin_mi(pair)))
    return 3.0 * worst


Labeler = Callable[[np.ndarray, np.ndarray], np.ndarray]


def default_xor_labeler(c: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Parity of the two half-space indicators: needs both cues to predict."""
    return ((c > 0.0) ^ (m > np.median(m))).astype(np.int64)


@dataclass(frozen=True)
class MiGainReport:
    d: int
    n: int
    seed: int
    n_bins: int
    n_labels: int
    i_lc: float
    i_lm: float
    i_lcm: float
    i_lm_given_c: float
    epsilon: float
    margin: float
    holds: bool

    def as_dict(self) -> dict[str, float | int | bool]:
        return asdict(self)


def mi_gain_check(
    d: int,
    n: int,
    labeler: Labeler | None = None,
    seed: int = 0,
    sigma: float = 1.0,
    n_bins: int | None = None,
    epsilon: float | None = None,
) -> MiGainReport:
    """Check that the combined statistic is at least as label-informative.

    Estimates I(L;C), I(L;M), and I(L;C,M) from one shared 3-D histogram
    and tests I(L;C,M) >= max(I(L;C), I(L;M)) - epsilon, with epsilon
    calibrated on independent data unless given explicitly.
    """
    if n < 100:
        raise ConfigError(f"mi gain check needs n >= 100, got {n}")
    s = draw_surrogate(d, sigma, n, seed)
    labels_raw = np.asarray((labeler or default_xor_labeler)(s.c, s.m))
    if labels_raw.shape != (n,):
        raise ConfigError(f"labeler must return {n} labels, got shape {labels_raw.shape}")
    uniq, labels = np.unique(labels_raw, return_inverse=True)
    if uniq.shape[0] < 2:
        raise ConfigError("labeler produced a single label value")
    bins = n_bins if n_bins is not None else default_bin_count(n)
    ci = _bin_indices(s.c, bins)
    mi_idx = _bin_indices(s.m, bins)
    n_labels = uniq.shape[0]
    counts = np.zeros((n_labels, bins, bins), dtype=np.int64)
    np.add.at(counts, (labels, ci, mi_idx), 1)
    i_lc = _plugin_mi(counts.sum(axis=2))
    i_lm = _plugin_mi(counts.sum(axis=1))
    i_lcm = _plugin_mi(counts.reshape(n_labels, bins * bins))
    i_lm_given_c = _conditional_mi(counts)
    if epsilon is None:
        epsilon = calibrate_label_epsilon(n, bins, seed)
    margin = i_lcm - max(i_lc, i_lm)
    return MiGainReport(
        d=d,
        n=n,
        seed=seed,
        n_bins=bins,
        n_labels=n_labels,
        i_lc=i_lc,
        i_lm=i_lm,
        i_lcm=i_lcm,
        i_lm_given_c=i_lm_given_c,
        epsilon=float(epsilon),
        margin=margin,
        holds=bool(margin >= -epsilon),
    )
