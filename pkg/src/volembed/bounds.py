"""Tail bounds, distortion formulas and numeric union-bound certificates.

The closed-form tail bounds are kept for reference and tested against exact
chi-square probabilities. Certificates themselves always use the exact
probabilities, which is what makes them sharp enough to hold at small n.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .gamma import (
    DomainError,
    chi_square_logcdf,
    chi_square_logsf,
    log_lower_incgamma_bound,
    log_regularized_gamma,
    log_upper_incgamma_bound,
    stirling_bounds,
)

Mode = Literal["distance", "volume"]

B_RANGE_TOP = 1e3
SEARCH_RTOL = 1e-3


class InfeasibleError(RuntimeError):
    """No threshold pair satisfies the union bound inside the search box."""


class KCapWarning(UserWarning):
    """Subset size cap exceeds floor(d/2), where no guarantee is claimed."""


def t_param(s: int, d: int) -> int:
    """Degrees of freedom s(d-s+1) of the lower sandwich chi-square."""
    if not 1 <= s <= d:
        raise DomainError(f"need 1 <= s <= d, got s={s}, d={d}")
    return s * (d - s + 1)


def l_param(s: int, d: int) -> int:
    """Degrees of freedom s(d-s+1) + (s-1)(s-2)/2 of the upper sandwich chi-square."""
    return t_param(s, d) + (s - 1) * (s - 2) // 2


def log_comb(n: int, r: int) -> float:
    if r < 0 or r > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


# -- closed-form tail bounds ---------------------------------------------------


def log_contraction_tail_bound(s: int, d: int, a: float) -> float:
    t = t_param(s, d) if 1 <= s <= d else 0
    if t <= 2:
        raise DomainError(f"contraction bound needs t = s(d-s+1) > 2, got t={t}")
    if not a > 0:
        raise DomainError(f"need a > 0, got {a}")
    return (t / 2) * (1 + math.log(s) + 2 * math.log(a)) - math.log(t) - (t - 1) / 2 * math.log(t - 2)


def contraction_tail_bound(s: int, d: int, a: float) -> float:
    """Upper bound (e s a^2)^(t/2) / (t (t-2)^((t-1)/2)) on Pr[chi^2_t <= s a^2]."""
    return math.exp(log_contraction_tail_bound(s, d, a))


def log_expansion_tail_bound(s: int, d: int, b: float) -> float:
    l = l_param(s, d) if 1 <= s <= d else 0
    if l <= 2:
        raise DomainError(f"expansion bound needs l > 2, got l={l}")
    x = s * b * b
    if not x > 2 * l + 4:
        raise DomainError(f"expansion bound needs s b^2 > 2l + 4 = {2 * l + 4}, got {x}")
    return -(x - l) / 2 + (l / 2 + 1) * math.log(x) - (l - 1) / 2 * math.log(l - 2)


def expansion_tail_bound(s: int, d: int, b: float) -> float:
    """Upper bound e^(-(s b^2 - l)/2) (s b^2)^(l/2+1) / (l-2)^((l-1)/2) on Pr[chi^2_l >= s b^2]."""
    lv = log_expansion_tail_bound(s, d, b)
    return math.exp(lv) if lv < 709 else math.inf


def exponent_h(d, x):
    """h_d(x) = (x+1) / (x (d-x+1)); exact for int or Fraction arguments."""
    if not 1 <= x <= d:
        raise DomainError(f"exponent_h needs 1 <= x <= d, got x={x}, d={d}")
    return (x + 1) / (x * (d - x + 1))


def distance_distortion_bound(n: int, d: int, c: float) -> float:
    """c n^(2/d) sqrt(ln n / d)."""
    if n < 2 or d < 3 or not c > 0:
        raise DomainError(f"need n >= 2, d >= 3, c > 0, got n={n}, d={d}, c={c}")
    return c * n ** (2 / d) * math.sqrt(math.log(n) / d)


def volume_distortion_bound(n: int, d: int, c: float) -> float:
    """c n^(2/d) sqrt(ln n ln ln n)."""
    if n < 16 or d < 3 or not c > 0:
        raise DomainError(f"need n >= 16, d >= 3, c > 0, got n={n}, d={d}, c={c}")
    ln = math.log(n)
    return c * n ** (2 / d) * math.sqrt(ln * math.log(ln))


# -- union-bound certificates --------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    """A union-bound sum below 1 for the thresholds (a, b)."""

    mode: Mode
    n: int
    d: int
    k: int
    a: float
    b: float
    contraction: float
    expansion: float

    @property
    def failure_bound(self) -> float:
        return self.contraction + self.expansion

    @property
    def distortion(self) -> float:
        return self.b / self.a


def _contraction_sum(n: int, d: int, k: int, a: float) -> float:
    total = 0.0
    for i in range(1, k + 1):
        log_p = chi_square_logcdf(t_param(i, d), i * a * a)
        total += math.exp(min(log_comb(n, i + 1) + log_p, 700.0))
    return total


def _expansion_sum(n: int, d: int, k: int, b: float) -> float:
    total = 0.0
    for i in range(1, k + 1):
        log_p = chi_square_logsf(l_param(i, d), i * b * b)
        total += math.exp(min(log_comb(n, i + 1) + log_p, 700.0))
    return total


def volume_union_bound_sum(n: int, d: int, k: int, a: float, b: float) -> tuple[float, float]:
    """Contraction and expansion parts of the union bound over subsets of up to k+1 points.

    Each part is sum_i C(n, i+1) Pr[...] with the product law replaced by the
    single chi-square that sandwiches it. Values above the guaranteed range
    k <= floor(d/2) are computed with a ``KCapWarning``.
    """
    if not 1 <= k <= d:
        raise DomainError(f"need 1 <= k <= d, got k={k}, d={d}")
    if k > d // 2:
        warnings.warn(f"k={k} exceeds floor(d/2)={d // 2}", KCapWarning, stacklevel=2)
    return _contraction_sum(n, d, k, a), _expansion_sum(n, d, k, b)


def distance_union_bound_feasible(n: int, d: int, a: float, b: float) -> Optional[Certificate]:
    """Certificate when C(n,2) (Pr[chi^2_d <= a^2] + Pr[chi^2_d >= b^2]) < 1."""
    if not 0 < a < b:
        return None
    con, exp_ = _contraction_sum(n, d, 1, a), _expansion_sum(n, d, 1, b)
    if con + exp_ < 1:
        return Certificate("distance", n, d, 1, a, b, con, exp_)
    return None


def volume_union_bound_feasible(n: int, d: int, k: int, a: float, b: float) -> Optional[Certificate]:
    """Certificate for all subsets of 2..k+1 points; refused beyond k = floor(d/2)."""
    if not 0 < a < b:
        return None
    con, exp_ = volume_union_bound_sum(n, d, k, a, b)
    if k > d // 2:
        return None
    if con + exp_ < 1:
        return Certificate("volume", n, d, k, a, b, con, exp_)
    return None


# -- threshold search ----------------------------------------------------------


@dataclass(frozen=True)
class BoundParams:
    n: int
    d: int
    k: int
    a: float
    b: float
    mode: Mode = "volume"
    contraction: float = float("nan")
    expansion: float = float("nan")

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        if self.d < 3:
            raise ValueError(f"need d >= 3, got {self.d}")
        if not 1 <= self.k <= self.n - 1:
            raise ValueError(f"need 1 <= k <= n-1, got k={self.k}, n={self.n}")

    @property
    def failure_bound(self) -> float:
        return self.contraction + self.expansion

    @property
    def distortion(self) -> float:
        return self.b / self.a

    def implied_constant(self) -> Optional[float]:
        """The c for which the closed-form distortion bound equals b/a."""
        if self.mode == "distance":
            return self.distortion / distance_distortion_bound(self.n, self.d, 1.0)
        if self.n < 16:
            return None
        return self.distortion / volume_distortion_bound(self.n, self.d, 1.0)


def _bisect_log(pred, lo: float, hi: float, rtol: float) -> tuple[float, float]:
    # pred(lo) is True, pred(hi) is False; shrink until hi/lo <= 1 + rtol
    while hi / lo > 1 + rtol:
        mid = math.sqrt(lo * hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def search_thresholds(n: int, d: int, k: int, mode: Mode = "volume", split: float = 0.5) -> BoundParams:
    """Largest a and smallest b whose union-bound parts stay below split and 1-split.

    a is searched in (0, sqrt(d)], b in [sqrt(d), 1e3], both by bisection in
    log scale to 1e-3 relative precision. The returned pair always lies on the
    feasible side of each search.
    """
    if not 0 < split < 1:
        raise ValueError(f"split must lie in (0, 1), got {split}")
    if mode == "distance":
        k = 1
    elif mode != "volume":
        raise ValueError(f"unknown mode {mode!r}")
    if d < 3 or n < 2 or not 1 <= k <= n - 1:
        raise DomainError(f"invalid (n, d, k) = ({n}, {d}, {k})")
    if mode == "volume" and k > d // 2:
        raise InfeasibleError(f"certificates only cover k <= floor(d/2) = {d // 2}, got k={k}")

    con_budget, exp_budget = split, 1 - split
    a_top = math.sqrt(d)

    def con_ok(a):
        return _contraction_sum(n, d, k, a) < con_budget

    def exp_ok(b):
        return _expansion_sum(n, d, k, b) < exp_budget

    if con_ok(a_top):
        a_star = a_top
    else:
        lo = a_top
        while not con_ok(lo):
            lo /= 2
            if lo < 1e-300:
                raise InfeasibleError("no contraction threshold found")
        a_star, _ = _bisect_log(con_ok, lo, 2 * lo, SEARCH_RTOL)

    b_bottom = math.sqrt(d)
    if exp_ok(b_bottom):
        b_star = b_bottom
    elif not exp_ok(B_RANGE_TOP):
        raise InfeasibleError(f"expansion union bound stays >= {exp_budget} up to b = {B_RANGE_TOP:g}")
    else:
        _, b_star = _bisect_log(lambda b: not exp_ok(b), b_bottom, B_RANGE_TOP, SEARCH_RTOL)

    if not a_star < b_star:
        raise InfeasibleError(f"search produced a={a_star} >= b={b_star}")
    return BoundParams(
        n, d, k, a_star, b_star, mode,
        _contraction_sum(n, d, k, a_star), _expansion_sum(n, d, k, b_star),
    )


# -- grid verification of the closed forms ---------------------------------------


def analytic_bound_checks() -> list[dict]:
    """Check every closed-form bound against exact values on fixed grids, in log space.

    Each entry reports how many grid points were checked and how many violated
    the bound; all counts should be zero.
    """
    checks = []

    def record(name, excesses):
        ex = np.asarray(excesses, dtype=float)
        checks.append({
            "check": name,
            "points": int(ex.size),
            "violations": int(np.sum(ex >= 0) if name in _STRICT else np.sum(ex > 0)),
            "max_log_excess": float(ex.max()),
        })

    ex = []
    for a in np.geomspace(0.1, 1000, 200):
        pair = stirling_bounds(a)
        lg = math.lgamma(a + 1)
        ex.append(max(pair.log_lower - lg, lg - pair.log_upper))
    record("stirling_sandwich", ex)

    ex = []
    for a in np.linspace(0.5, 20, 20):
        xs = np.linspace(0, 40, 21)[1:]
        log_p, _ = log_regularized_gamma(a, xs)
        ex += [lp + math.lgamma(a) - log_lower_incgamma_bound(a, x) for lp, x in zip(log_p, xs)]
    record("lower_incgamma_bound", ex)

    ex = []
    for a in np.linspace(0.5, 20, 20):
        xs = 2 * (a + 1) + np.geomspace(1e-3, 100, 20)
        _, log_q = log_regularized_gamma(a, xs)
        ex += [lq + math.lgamma(a) - log_upper_incgamma_bound(a, x) for lq, x in zip(log_q, xs)]
    record("upper_incgamma_bound", ex)

    ex = []
    for s in range(1, 9):
        for d in range(max(3, s), 21):
            t = t_param(s, d)
            if t <= 2:
                continue
            for a in np.linspace(0.05, 1.0, 20):
                ex.append(chi_square_logcdf(t, s * a * a) - log_contraction_tail_bound(s, d, a))
    record("contraction_tail_bound", ex)

    ex = []
    for s in range(1, 9):
        for d in range(max(3, s), 21):
            l = l_param(s, d)
            if l <= 2:
                continue
            b0 = math.sqrt((2 * l + 4) / s)
            for factor in (1.0001, 1.01, 1.1, 1.5, 2.0, 3.0, 5.0):
                b = b0 * factor
                ex.append(chi_square_logsf(l, s * b * b) - log_expansion_tail_bound(s, d, b))
    record("expansion_tail_bound", ex)
    return checks


_STRICT = {"stirling_sandwich", "upper_incgamma_bound"}
