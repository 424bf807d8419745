"""Partial sums, the block-average variance estimator, and self-normalized
statistics for dependent lattice fields.

The variance estimator averages size-weighted squared deviations of local
block means from the global mean:

    C_hat(U) = |U|^-1 sum_{j in U} |Q_j| (S(Q_j)/|Q_j| - S(U)/|U|)^2

with Q_j = U intersect K_j(b), K_j(b) the sup-norm ball of radius b at j.
Boundary sites use the truncated Q_j exactly as written: no padding, no
wraparound.  With a bandwidth schedule b_n -> infinity, b_n = o(n), C_hat
is consistent for sigma^2 and can replace it in the CLT normalizer
(random normalization).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .cv_ntcp import normal_cdf, normal_quantile
from .errors import DegenerateError, DomainError, ShapeError
from .lattice_fields import (
    FieldModel,
    FieldSample,
    LatticeCube,
    derive_seeds,
    model_sigma2,
    sample_fields_batch,
)

#: Soft cap on cells held in memory at once when batching replicates.
_CHUNK_CELLS = 1 << 24


def default_bandwidth(n: int) -> int:
    """ceil(n^(1/3)) clamped to [1, max(1, n-1)]."""
    if n < 1:
        raise DomainError("n must be >= 1")
    b = math.ceil(n ** (1.0 / 3.0) - 1e-9)
    return min(max(1, b), max(1, n - 1))


@dataclass(frozen=True)
class EstimatorConfig:
    """Bandwidth for C_hat: an explicit value, or the schedule ceil(n^eta)."""

    bandwidth: Optional[int] = None
    eta: float = 1.0 / 3.0

    def __post_init__(self):
        if self.bandwidth is not None and self.bandwidth < 1:
            raise DomainError("bandwidth must be >= 1")
        if not (0.0 < self.eta < 1.0):
            raise DomainError("eta must be in (0, 1) so that b_n = o(n)")

    def bandwidth_for(self, n: int) -> int:
        if self.bandwidth is not None:
            return self.bandwidth
        if self.eta == 1.0 / 3.0:
            return default_bandwidth(n)
        b = math.ceil(n**self.eta - 1e-9)
        return min(max(1, b), max(1, n - 1))


@dataclass(frozen=True)
class NormalizedStatistic:
    """A centered sum divided by its (true or estimated) normalizer."""

    value: float
    normalization: str  # "true_sigma" | "estimated"
    total: float        # S(U)
    mean: float         # mean used for centering
    variance: float     # sigma^2 or C_hat
    cube_size: int


@dataclass(frozen=True)
class GapPoint:
    """One point of the variance-gap decay curve."""

    n: int
    gap: float
    mc_variance: float  # Var_MC(S(U_n)) / |U_n|
    sigma2: float
    envelope: str       # decay regime label for the gap, e.g. "n^-1"


# ---------------------------------------------------------------------------
# Partial sums
# ---------------------------------------------------------------------------

def partial_sum(sample: FieldSample, region=None) -> float:
    """Sum of field values over a region of the cube (default: full cube).

    ``region`` may be a boolean mask of the cube's shape or an iterable of
    lattice points (tuples in [-n, n]^d).
    """
    if region is None:
        return float(sample.values.sum())
    if isinstance(region, np.ndarray) and region.dtype == bool:
        if region.shape != sample.cube.shape:
            raise ShapeError(
                f"mask shape {region.shape} != cube shape {sample.cube.shape}"
            )
        return float(sample.values[region].sum())
    n = sample.cube.n
    total = 0.0
    for point in region:
        idx = tuple(int(c) + n for c in point)
        if len(idx) != sample.cube.d or any(
            not (0 <= i <= 2 * n) for i in idx
        ):
            raise ShapeError(f"point {tuple(point)} lies outside the cube")
        total += float(sample.values[idx])
    return total


# ---------------------------------------------------------------------------
# Block-average variance estimator
# ---------------------------------------------------------------------------

def _truncated_window_sum(a: np.ndarray, b: int, axis: int) -> np.ndarray:
    """Sums over windows [i-b, i+b] clipped to the array, along one axis."""
    a = np.moveaxis(a, axis, -1)
    cs = np.cumsum(a, axis=-1)
    size = a.shape[-1]
    i = np.arange(size)
    hi = np.minimum(i + b, size - 1)
    lo = i - b
    upper = cs[..., hi]
    lower = np.where(lo > 0, cs[..., np.maximum(lo - 1, 0)], 0.0)
    return np.moveaxis(upper - lower, -1, axis)


def _window_counts(side: int, b: int, d: int) -> np.ndarray:
    """|Q_j| over the cube: outer product of per-axis clipped widths."""
    i = np.arange(side)
    width = np.minimum(i + b, side - 1) - np.maximum(i - b, 0) + 1
    counts = width.astype(np.float64)
    for _ in range(d - 1):
        counts = counts[..., None] * width
    return counts


def _variance_estimator_batch(values: np.ndarray, d: int, b: int) -> np.ndarray:
    """C_hat for values of shape (batch..., side, ..., side); returns (batch...)."""
    spatial = tuple(range(values.ndim - d, values.ndim))
    side = values.shape[-1]
    size = float(side**d)
    block_sums = values
    for axis in spatial:
        block_sums = _truncated_window_sum(block_sums, b, axis)
    counts = _window_counts(side, b, d)
    global_mean = values.sum(axis=spatial, keepdims=True) / size
    dev = block_sums / counts - global_mean
    return (counts * dev * dev).sum(axis=spatial) / size


def variance_estimator(sample: FieldSample, config: EstimatorConfig) -> float:
    """C_hat(U) with bandwidth taken from the config for this cube."""
    if sample.values.size == 0:
        raise ShapeError("empty sample")
    b = config.bandwidth_for(max(1, sample.cube.n))
    return float(_variance_estimator_batch(sample.values, sample.cube.d, b))


# ---------------------------------------------------------------------------
# Self-normalized statistics
# ---------------------------------------------------------------------------

def self_normalized_statistic(
    sample: FieldSample,
    mean: float,
    config: Optional[EstimatorConfig] = None,
    mode: str = "estimated",
    sigma2: Optional[float] = None,
) -> NormalizedStatistic:
    """(S(U) - |U| mean) / sqrt(normalizer |U|).

    ``mode="true_sigma"`` normalizes by a supplied sigma^2; ``"estimated"``
    by C_hat.  A zero normalizer (constant fields) raises DegenerateError.
    """
    size = sample.cube.size
    total = partial_sum(sample)
    if mode == "true_sigma":
        if sigma2 is None:
            raise DomainError("true_sigma mode requires sigma2")
        variance = sigma2
    elif mode == "estimated":
        variance = variance_estimator(sample, config or EstimatorConfig())
    else:
        raise DomainError(f"unknown mode {mode!r}")
    if not (variance > 0.0):
        raise DegenerateError("normalizer is zero (degenerate field)")
    value = (total - size * mean) / math.sqrt(variance * size)
    return NormalizedStatistic(
        value=value,
        normalization=mode,
        total=total,
        mean=mean,
        variance=variance,
        cube_size=size,
    )


def confidence_interval(
    sample: FieldSample, level: float, config: Optional[EstimatorConfig] = None
) -> Tuple[float, float]:
    """Approximate CI for E X_0: sample mean +- z_{(1+level)/2} sqrt(C_hat/|U|)."""
    if not (0.0 < level < 1.0):
        raise DomainError("level must be in (0, 1)")
    size = sample.cube.size
    c_hat = variance_estimator(sample, config or EstimatorConfig())
    if not (c_hat > 0.0):
        raise DegenerateError("C_hat = 0: degenerate interval")
    center = partial_sum(sample) / size
    half = normal_quantile(0.5 * (1.0 + level)) * math.sqrt(c_hat / size)
    return center - half, center + half


def ntcp_estimate(
    sample: FieldSample,
    x: float,
    mean: float,
    config: Optional[EstimatorConfig] = None,
) -> float:
    """Randomly normalized NTCP estimate 1 - Phi((x - |U| mean)/sqrt(C_hat |U|)).

    This is itself a random quantity (a statistical estimate), not a
    certified probability.
    """
    size = sample.cube.size
    c_hat = variance_estimator(sample, config or EstimatorConfig())
    if not (c_hat > 0.0):
        raise DegenerateError("C_hat = 0: degenerate normalization")
    xi = (x - size * mean) / math.sqrt(c_hat * size)
    return normal_cdf(-xi)


# ---------------------------------------------------------------------------
# Variance-gap decay (finite-cube vs long-run variance)
# ---------------------------------------------------------------------------

def variance_gap(
    model: FieldModel,
    d: int,
    n_schedule: Sequence[int],
    replicates: int,
    master_seed: int = 0,
) -> List[GapPoint]:
    """| Var_MC(S(U_n))/|U_n| - sigma^2 | along a schedule of cube sizes.

    For the m-dependent window models the true gap decays like 1/n, the
    lambda > d+1 regime of the decay envelope; the label records that.
    """
    if replicates < 2:
        raise DomainError("need at least 2 replicates")
    sigma2 = model_sigma2(model, d)
    if sigma2.degenerate:
        raise DegenerateError("sigma^2 is degenerate (zero)")
    points = []
    for n in n_schedule:
        cube = LatticeCube(d=d, n=n)
        chunk = max(1, _CHUNK_CELLS // max(1, cube.size))
        acc = 0.0
        acc_sq = 0.0
        for start in range(0, replicates, chunk):
            seeds = derive_seeds(
                master_seed, n, np.arange(start, min(start + chunk, replicates))
            )
            values = sample_fields_batch(model, cube, seeds)
            sums = values.reshape(len(seeds), -1).sum(axis=1)
            acc += float(sums.sum())
            acc_sq += float((sums * sums).sum())
        var_s = (acc_sq - acc * acc / replicates) / (replicates - 1)
        mc_variance = var_s / cube.size
        points.append(
            GapPoint(
                n=n,
                gap=abs(mc_variance - sigma2.value),
                mc_variance=mc_variance,
                sigma2=sigma2.value,
                envelope="n^-1",
            )
        )
    return points
