"""Seeded random draws: Gaussian maps, chi-square samples and their products.

Every stream is a numpy ``PCG64`` generator keyed by a ``SeedSequence`` built
from ``(seed, stream, *extra)``. Workers derive their own keys, so parallel
code never shares a generator and never needs to coordinate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import l_param, t_param
from .linalg import LinearMap

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomSeed:
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not 0 <= value <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self, *key: int) -> np.random.Generator:
        """Generator for this (seed, stream), optionally narrowed by a sub-key path."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *key))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream: int) -> "RandomSeed":
        # Mix parent stream into the child id so children of different parents differ.
        mixed = np.random.SeedSequence(self.seed, spawn_key=(self.stream, stream)).generate_state(2, np.uint32)
        return RandomSeed(self.seed, int(mixed[0]) << 32 | int(mixed[1]))


def as_seed(seed) -> RandomSeed:
    if isinstance(seed, RandomSeed):
        return seed
    return RandomSeed(int(seed))


@dataclass(frozen=True)
class ChiProductSpec:
    """Law of prod_{i=1}^{s} chi^2_{d-i+1} with independent factors."""

    d: int
    s: int

    def __post_init__(self):
        if self.d < 1 or not 1 <= self.s <= self.d:
            raise ValueError(f"need d >= 1 and 1 <= s <= d, got d={self.d}, s={self.s}")

    @property
    def t(self) -> int:
        return t_param(self.s, self.d)

    @property
    def l(self) -> int:
        return l_param(self.s, self.d)

    @property
    def factor_dofs(self) -> list[int]:
        return [self.d - i + 1 for i in range(1, self.s + 1)]


def gaussian_matrix(d: int, N: int, seed) -> LinearMap:
    if d < 1 or N < 1:
        raise ValueError(f"need d, N >= 1, got d={d}, N={N}")
    rng = as_seed(seed).generator()
    return LinearMap(rng.standard_normal((d, N)), 1.0)


def sample_chi_square(dof: int, count: int, seed) -> np.ndarray:
    if dof < 1 or count < 1:
        raise ValueError(f"need dof, count >= 1, got dof={dof}, count={count}")
    return as_seed(seed).generator().chisquare(dof, size=count)


def chi_square_factors(spec: ChiProductSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Independent factor draws, shape (s, count); row i has dof d-i."""
    return np.stack([rng.chisquare(dof, size=count) for dof in spec.factor_dofs])


def sample_chi_square_product(spec: ChiProductSpec, count: int, seed) -> np.ndarray:
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    factors = chi_square_factors(spec, count, as_seed(seed).generator())
    return factors.prod(axis=0)


def synthetic_points(mode: str, n: int, dim: int, seed=0, scale: float = 1.0) -> np.ndarray:
    """Test point clouds: ``gaussian``, ``sphere`` (radius ``scale``) or ``simplex``.

    The simplex is the origin plus ``scale`` times the first n-1 basis
    vectors, so it needs n <= dim + 1 and is affinely independent.
    """
    if n < 2 or dim < 1:
        raise ValueError(f"need n >= 2 and dim >= 1, got n={n}, dim={dim}")
    if mode == "gaussian":
        return scale * as_seed(seed).generator().standard_normal((n, dim))
    if mode == "sphere":
        g = as_seed(seed).generator().standard_normal((n, dim))
        return scale * g / np.linalg.norm(g, axis=1, keepdims=True)
    if mode == "simplex":
        if n > dim + 1:
            raise ValueError(f"a simplex in R^{dim} has at most {dim + 1} vertices, got n={n}")
        pts = np.zeros((n, dim))
        pts[np.arange(1, n), np.arange(n - 1)] = scale
        return pts
    raise ValueError(f"unknown point mode {mode!r}")
