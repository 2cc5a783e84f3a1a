"""Monte Carlo checks of the distributional facts behind the embedding.

KS statistics are reported as plain sup-norm distances; callers compare them
against fixed thresholds. Reference critical values:

    one-sample   1.36/sqrt(m) at 5%,  1.63/sqrt(m) at 1%
    two-sample   same constants times sqrt((m1 + m2) / (m1 m2))

Sample generation is split into fixed-size chunks, each with its own derived
random stream, so results are identical for any worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bounds import l_param, t_param
from .gamma import chi_square_cdf
from .linalg import DEFAULT_RANK_TOL, InvalidInputError, PointSet, batch_log_volumes, difference_matrix
from .randgen import ChiProductSpec, as_seed, chi_square_factors

CHUNK = 8192


@dataclass(frozen=True)
class EmpiricalCdf:
    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if s.size < 1:
            raise ValueError("an empirical CDF needs at least one sample")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def m(self) -> int:
        return self.samples.size

    def __call__(self, x):
        """Fraction of samples <= x."""
        out = np.searchsorted(self.samples, x, side="right") / self.m
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class OrderingReport:
    max_violation: float
    m: int
    passed: bool
    epsilon: float
    lower_violation: float
    upper_violation: float


def dkw_epsilon(m: int, delta: float = 0.01) -> float:
    """Default CDF slack 3 sqrt(ln(2/delta) / (2m))."""
    return 3.0 * math.sqrt(math.log(2.0 / delta) / (2.0 * m))


def _eval_cdf(cdf: Callable, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(cdf(x), dtype=float)
    except (TypeError, ValueError):  # scalar-only cdf
        out = None
    if out is None or out.shape != x.shape:
        out = np.array([cdf(v) for v in x], dtype=float)
    return out


def ks_one_sample(samples, cdf: Callable) -> float:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m < 1:
        raise ValueError("need at least one sample")
    F = _eval_cdf(cdf, x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def ks_two_sample(s1, s2) -> float:
    a = np.sort(np.asarray(s1, dtype=float).ravel())
    b = np.sort(np.asarray(s2, dtype=float).ravel())
    if a.size < 1 or b.size < 1:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def stochastic_order_violation(smaller, larger) -> float:
    """sup_x (F_larger(x) - F_smaller(x)), clipped at 0.

    Zero means the samples agree with ``smaller <= larger`` in the CDF sense
    Pr[smaller <= x] >= Pr[larger <= x].
    """
    a = np.sort(np.asarray(smaller, dtype=float).ravel())
    b = np.sort(np.asarray(larger, dtype=float).ravel())
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(max(0.0, np.max(fb - fa)))


def _chunked(reps: int, seed, draw: Callable, workers: int) -> np.ndarray:
    # chunk j always uses stream key (j,), independent of the worker count
    seed = as_seed(seed)
    sizes = [min(CHUNK, reps - lo) for lo in range(0, reps, CHUNK)]

    def job(j):
        return draw(sizes[j], seed.generator(j))

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(j) for j in range(len(sizes))]
    return np.concatenate(parts)


def squared_volume_ratios(
    points: np.ndarray, d: int, reps: int, seed, workers: int = 1, rank_tol: float = DEFAULT_RANK_TOL
) -> np.ndarray:
    """(vol f(S) / vol S)^2 for ``reps`` independent Gaussian maps f: R^N -> R^d."""
    diff = difference_matrix(points)  # (N, s)
    N, s = diff.shape
    src_log, src_deg = batch_log_volumes(diff[None], rank_tol)
    if src_deg[0]:
        raise InvalidInputError("the chosen subset spans zero volume")

    def draw(count, rng):
        F = rng.standard_normal((count, d, N))
        img_log, _ = batch_log_volumes(F @ diff, rank_tol)
        return np.exp(2.0 * (np.nan_to_num(img_log, nan=-np.inf) - src_log[0]))

    return _chunked(reps, seed, draw, workers)


def _pick_subset(P: PointSet, subset: Optional[Sequence[int]], size: int) -> np.ndarray:
    idx = list(range(size)) if subset is None else list(subset)
    if len(idx) != size or size > P.n:
        raise InvalidInputError(f"need a subset of {size} distinct indices from {P.n} points")
    return P.subset(idx)


def verify_stability(
    P_a: PointSet,
    P_b: PointSet,
    d: int,
    subset_size: int,
    reps: int,
    seed=0,
    subset_a: Optional[Sequence[int]] = None,
    subset_b: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> tuple[float, float]:
    """Compare squared volume ratios of one fixed subset from each point set.

    Returns ``(ks_ab, ks_a_product)``: the two-sample KS distance between the
    two ratio samples, and between P_a's ratios and an independent sample of
    prod_{i=1}^{subset_size-1} chi^2_{d-i+1}. Subsets default to the first
    ``subset_size`` points.
    """
    if subset_size < 2:
        raise ValueError("subset_size must be >= 2")
    seed = as_seed(seed)
    ra = squared_volume_ratios(_pick_subset(P_a, subset_a, subset_size), d, reps, seed.child(1), workers)
    rb = squared_volume_ratios(_pick_subset(P_b, subset_b, subset_size), d, reps, seed.child(2), workers)
    spec = ChiProductSpec(d, subset_size - 1)
    prod = _chunked(reps, seed.child(3), lambda c, rng: chi_square_factors(spec, c, rng).prod(axis=0), workers)
    return ks_two_sample(ra, rb), ks_two_sample(ra, prod)


def sandwich_samples(d: int, s: int, reps: int, seed, workers: int = 1) -> np.ndarray:
    """Draws of s (prod_{i=1}^{s} chi^2_{d-i+1})^(1/s)."""
    spec = ChiProductSpec(d, s)

    def draw(count, rng):
        return s * np.exp(np.log(chi_square_factors(spec, count, rng)).mean(axis=0))

    return _chunked(reps, seed, draw, workers)


def verify_gordon(
    d: int, s: int, reps: int, epsilon: Optional[float] = None, seed=0, workers: int = 1
) -> OrderingReport:
    """Check chi^2_l >= s (prod u_i)^(1/s) >= chi^2_t in the CDF-ordering sense.

    With F the empirical CDF of the middle variable, the violations are the
    exact suprema over x of F_l(x) - F(x) and F(x) - F_t(x), evaluated on
    both sides of every jump of F.
    """
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}, d={d}")
    if reps < 1000:
        raise ValueError("verify_gordon needs reps >= 1000")
    eps = dkw_epsilon(reps) if epsilon is None else epsilon
    x = np.sort(sandwich_samples(d, s, reps, seed, workers))
    m = x.size
    i = np.arange(1, m + 1)
    lower = float(np.max(chi_square_cdf(l_param(s, d), x) - (i - 1) / m))
    upper = float(np.max(i / m - chi_square_cdf(t_param(s, d), x)))
    worst = max(0.0, lower, upper)
    return OrderingReport(worst, m, worst <= eps, eps, max(lower, 0.0), max(upper, 0.0))
