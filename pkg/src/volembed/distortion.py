"""Measured distance and volume distortion of concrete linear maps, and the embedding loop.

The normalized ratio of a subset S is (vol f(S) / vol S)^(1/(|S|-1)). A
report covers subset sizes 2..k+1, i.e. simplices of dimension 1..k.
Source volumes do not depend on the map, so a ``SubsetPlan`` fixes the
subsets and their source volumes once and can then score any number of maps.
"""
from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal, NamedTuple, Optional

import numpy as np

from .bounds import KCapWarning
from .linalg import (
    DEFAULT_RANK_TOL,
    DegenerateInputError,
    InvalidInputError,
    LinearMap,
    PointSet,
    apply_map,
    batch_log_volumes,
    log_simplex_volume,
    subset_differences,
)
from .randgen import RandomSeed, as_seed, gaussian_matrix

CHUNK = 32_768


@dataclass(frozen=True)
class SubsetStrategy:
    """How subsets are chosen.

    ``exhaustive`` enumerates every subset while the total count stays within
    ``enumeration_cap`` and falls back to sampling otherwise. ``sampled``
    always draws ``sample_count`` distinct subsets per size (all of them when
    fewer exist).
    """

    mode: Literal["exhaustive", "sampled"] = "exhaustive"
    sample_count: int = 10_000
    enumeration_cap: int = 1_000_000

    def __post_init__(self):
        if self.mode not in ("exhaustive", "sampled"):
            raise ValueError(f"unknown subset mode {self.mode!r}")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.enumeration_cap < 0:
            raise ValueError("enumeration_cap must be >= 0")


EXHAUSTIVE = SubsetStrategy("exhaustive", enumeration_cap=2**62)


@dataclass(frozen=True)
class SizeStats:
    min_ratio: float
    max_ratio: float
    count_evaluated: int
    count_degenerate: int
    exhaustive: bool


@dataclass(frozen=True)
class DistortionReport:
    k: int
    per_size: dict[int, SizeStats]
    overall_min: float
    overall_max: float
    strategy: SubsetStrategy
    seed: Optional[int] = None

    @property
    def distortion(self) -> float:
        if not self.overall_min > 0:
            return math.inf
        return self.overall_max / self.overall_min

    @property
    def total_evaluated(self) -> int:
        return sum(st.count_evaluated for st in self.per_size.values())

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "overall_min": self.overall_min,
            "overall_max": self.overall_max,
            "distortion": self.distortion,
            "seed": self.seed,
            "strategy": asdict(self.strategy),
            "per_size": {str(size): asdict(st) for size, st in sorted(self.per_size.items())},
        }


# -- subset selection ----------------------------------------------------------


def _random_below(rng: np.random.Generator, total: int) -> int:
    if total <= 2**63:
        return int(rng.integers(0, total, dtype=np.uint64)) if total > 1 else 0
    bits = total.bit_length()
    words = (bits + 63) // 64
    while True:
        r = 0
        for w in rng.integers(0, 2**64, size=words, dtype=np.uint64):
            r = (r << 64) | int(w)
        r >>= words * 64 - bits
        if r < total:
            return r


def unrank_combination(rank: int, n: int, size: int) -> tuple[int, ...]:
    """The subset of range(n) with the given colexicographic rank."""
    out = []
    hi = n
    for i in range(size, 0, -1):
        # largest c < hi with comb(c, i) <= rank
        lo_c, hi_c = i - 1, hi - 1
        while lo_c < hi_c:
            mid = (lo_c + hi_c + 1) // 2
            if math.comb(mid, i) <= rank:
                lo_c = mid
            else:
                hi_c = mid - 1
        out.append(lo_c)
        rank -= math.comb(lo_c, i)
        hi = lo_c
    return tuple(reversed(out))


def _all_subsets(n: int, size: int) -> np.ndarray:
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(n), size)),
        dtype=np.intp,
        count=math.comb(n, size) * size,
    )
    return flat.reshape(-1, size)


def _sampled_subsets(n: int, size: int, count: int, rng: np.random.Generator) -> np.ndarray:
    total = math.comb(n, size)
    ranks: set[int] = set()
    order: list[int] = []
    while len(order) < count:
        r = _random_below(rng, total)
        if r not in ranks:  # collisions are redrawn
            ranks.add(r)
            order.append(r)
    return np.asarray([unrank_combination(r, n, size) for r in order], dtype=np.intp)


class _Block(NamedTuple):
    size: int
    subsets: np.ndarray
    src_log: np.ndarray
    src_degenerate: np.ndarray
    exhaustive: bool


class SubsetPlan:
    """Fixed subsets of sizes 2..k+1 with precomputed source log volumes."""

    def __init__(
        self,
        P: PointSet,
        k: int,
        strategy: Optional[SubsetStrategy] = None,
        seed=0,
        rank_tol: float = DEFAULT_RANK_TOL,
    ):
        if not 2 <= k + 1 <= P.n:
            raise InvalidInputError(f"need 2 <= k+1 <= n, got k={k}, n={P.n}")
        self.P = P
        self.k = k
        self.strategy = strategy or SubsetStrategy()
        self.seed = as_seed(seed)
        self.rank_tol = rank_tol
        sizes = range(2, k + 2)
        total = sum(math.comb(P.n, s) for s in sizes)
        exhaustive_all = self.strategy.mode == "exhaustive" and total <= self.strategy.enumeration_cap
        self.blocks: list[_Block] = []
        for size in sizes:
            count = math.comb(P.n, size)
            if exhaustive_all or count <= self.strategy.sample_count:
                subsets, full = _all_subsets(P.n, size), True
            else:
                rng = self.seed.generator(0xC0B, size)
                subsets, full = _sampled_subsets(P.n, size, self.strategy.sample_count, rng), False
            src_log = np.empty(len(subsets))
            src_deg = np.empty(len(subsets), dtype=bool)
            for lo in range(0, len(subsets), CHUNK):
                sl = slice(lo, lo + CHUNK)
                src_log[sl], src_deg[sl] = batch_log_volumes(
                    subset_differences(P.points, subsets[sl]), rank_tol
                )
            self.blocks.append(_Block(size, subsets, src_log, src_deg, full))

    @property
    def has_nondegenerate(self) -> bool:
        return any((~b.src_degenerate).any() for b in self.blocks)

    def _chunk_extrema(self, image: np.ndarray, block: _Block, sl: slice):
        keep = ~block.src_degenerate[sl]
        if not keep.any():
            return math.inf, -math.inf
        subsets = block.subsets[sl][keep]
        img_log, img_deg = batch_log_volumes(subset_differences(image, subsets), self.rank_tol)
        with np.errstate(over="ignore"):
            ratios = np.exp((img_log - block.src_log[sl][keep]) / (block.size - 1))
        ratios[img_deg] = 0.0
        return float(ratios.min()), float(ratios.max())

    def evaluate(self, image: np.ndarray, workers: int = 1) -> DistortionReport:
        """Score the map whose images of ``P``'s points are the rows of ``image``."""
        image = np.asarray(image, dtype=float)
        if image.shape[0] != self.P.n:
            raise InvalidInputError(f"image has {image.shape[0]} rows, point set has {self.P.n}")
        jobs = [
            (block, slice(lo, lo + CHUNK))
            for block in self.blocks
            for lo in range(0, len(block.subsets), CHUNK)
        ]
        if workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                extrema = list(pool.map(lambda job: self._chunk_extrema(image, *job), jobs))
        else:
            extrema = [self._chunk_extrema(image, *job) for job in jobs]

        per_size = {}
        for block in self.blocks:
            lows = [lo for (b, _), (lo, _) in zip(jobs, extrema) if b is block]
            highs = [hi for (b, _), (_, hi) in zip(jobs, extrema) if b is block]
            mn, mx = min(lows, default=math.inf), max(highs, default=-math.inf)
            if mn == math.inf:
                mn = mx = math.nan
            per_size[block.size] = SizeStats(
                mn, mx, len(block.subsets), int(block.src_degenerate.sum()), block.exhaustive
            )
        mins = [st.min_ratio for st in per_size.values() if not math.isnan(st.min_ratio)]
        maxs = [st.max_ratio for st in per_size.values() if not math.isnan(st.max_ratio)]
        return DistortionReport(
            self.k,
            per_size,
            min(mins, default=math.nan),
            max(maxs, default=math.nan),
            self.strategy,
            self.seed.seed,
        )


# -- public operations ---------------------------------------------------------


def normalized_volume_ratio(f: LinearMap, S, rank_tol: float = DEFAULT_RANK_TOL) -> Optional[float]:
    """(vol f(S) / vol S)^(1/(|S|-1)); None when S itself spans zero volume."""
    pts = np.asarray(S.points if isinstance(S, PointSet) else S, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise InvalidInputError("a subset needs at least 2 points")
    if pts.shape[1] != f.N:
        raise InvalidInputError(f"map expects dimension {f.N}, subset has dimension {pts.shape[1]}")
    src = log_simplex_volume(pts, rank_tol)
    if src.degenerate:
        return None
    img = log_simplex_volume(f.scale * (pts @ f.matrix.T), rank_tol)
    if img.degenerate:
        return 0.0
    return math.exp((img.value - src.value) / (pts.shape[0] - 1))


def _warn_k_cap(k: int, d: int) -> None:
    if k > d // 2:
        warnings.warn(
            f"k={k} exceeds floor(d/2)={d // 2}; no distortion guarantee applies",
            KCapWarning,
            stacklevel=3,
        )


def distortion_report(
    f: LinearMap,
    P: PointSet,
    k: int,
    strategy: Optional[SubsetStrategy] = None,
    seed=0,
    workers: int = 1,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> DistortionReport:
    _warn_k_cap(k, f.d)
    plan = SubsetPlan(P, k, strategy, seed, rank_tol)
    return plan.evaluate(apply_map(f, P).points, workers)


def distance_distortion(f: LinearMap, P: PointSet, workers: int = 1) -> float:
    """Largest over smallest pairwise expansion ratio, over all pairs."""
    plan = SubsetPlan(P, 1, EXHAUSTIVE, 0)
    if plan.blocks[0].src_degenerate.any():
        i = int(np.argmax(plan.blocks[0].src_degenerate))
        raise InvalidInputError(f"duplicate points at indices {tuple(plan.blocks[0].subsets[i])}")
    return plan.evaluate(apply_map(f, P).points, workers).distortion


class EmbedResult(NamedTuple):
    map: LinearMap
    report: DistortionReport
    trials_used: int


def embed(
    P: PointSet,
    d: int,
    k: int,
    max_trials: int = 20,
    target_distortion: Optional[float] = None,
    strategy: Optional[SubsetStrategy] = None,
    seed=0,
    workers: int = 1,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> EmbedResult:
    """Draw Gaussian maps into R^d and keep the first meeting the target, else the best.

    The chosen map is rescaled by 1 / (its smallest normalized ratio), so its
    report has ``overall_min == 1`` and ``overall_max == distortion``.
    """
    if d < 1 or k < 1 or max_trials < 1:
        raise ValueError(f"need d, k, max_trials >= 1, got d={d}, k={k}, max_trials={max_trials}")
    if d < 3:
        warnings.warn(f"target dimension d={d} is below 3", UserWarning, stacklevel=2)
    _warn_k_cap(k, d)
    seed = as_seed(seed)
    plan = SubsetPlan(P, k, strategy, seed, rank_tol)
    if not plan.has_nondegenerate:
        raise DegenerateInputError("every subset of the input spans zero volume")

    best: Optional[tuple[float, LinearMap, int]] = None
    trials_used = max_trials
    for trial in range(max_trials):
        f = gaussian_matrix(d, P.N, seed.child(trial))
        report = plan.evaluate(apply_map(f, P).points, workers)
        if not report.overall_min > 0:
            continue
        dist = report.distortion
        if best is None or dist < best[0]:
            best = (dist, f.rescaled(1.0 / report.overall_min), trial)
        if target_distortion is not None and dist <= target_distortion:
            trials_used = trial + 1
            best = (dist, f.rescaled(1.0 / report.overall_min), trial)
            break
    if best is None:
        raise DegenerateInputError("every trial map collapsed some subset to zero volume")
    chosen = best[1]
    return EmbedResult(chosen, plan.evaluate(apply_map(chosen, P).points, workers), trials_used)
