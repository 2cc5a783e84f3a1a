"""Gamma-function numerics and the elementary gamma bounds.

The regularized incomplete gamma functions use the power series for
x < a + 1 and the Lentz continued fraction otherwise. Both branches work in
log space, so the complement is recovered with expm1/log1p instead of a
cancelling subtraction. Everything is vectorised over x.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

TOL = 1e-14
MAX_ITER = 10_000
_TINY = 1e-300

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class DomainError(ValueError):
    pass


class GammaBoundPair(NamedTuple):
    lower: float
    upper: float
    log_lower: float
    log_upper: float


def log_gamma(a: float) -> float:
    if not a > 0:
        raise DomainError(f"log_gamma needs a > 0, got {a}")
    return math.lgamma(a)


def _series_log(a: float, x: np.ndarray, log_prefix: np.ndarray) -> np.ndarray:
    # log P(a, x) = log_prefix + log sum_{n>=0} x^n / (a (a+1) ... (a+n))
    term = np.full(x.shape, 1.0 / a)
    total = term.copy()
    ap = a
    active = np.ones(x.shape, dtype=bool)
    for _ in range(MAX_ITER):
        ap += 1.0
        term = np.where(active, term * x / ap, 0.0)
        total += term
        active &= np.abs(term) >= np.abs(total) * TOL
        if not active.any():
            break
    else:
        raise ArithmeticError(f"incomplete gamma series did not converge for a={a}")
    return log_prefix + np.log(total)


def _contfrac_log(a: float, x: np.ndarray, log_prefix: np.ndarray) -> np.ndarray:
    # log Q(a, x) via modified Lentz on the even part of the Legendre fraction
    b = x + 1.0 - a
    c = np.full(x.shape, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, MAX_ITER + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = np.where(active, d * c, 1.0)
        h *= delta
        active &= np.abs(delta - 1.0) >= TOL
        if not active.any():
            break
    else:
        raise ArithmeticError(f"incomplete gamma continued fraction did not converge for a={a}")
    return log_prefix + np.log(h)


def log_regularized_gamma(a: float, x):
    """Return ``(log P(a, x), log Q(a, x))`` with P + Q = 1."""
    if not a > 0:
        raise DomainError(f"incomplete gamma needs a > 0, got {a}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("incomplete gamma needs x >= 0")
    xs = np.atleast_1d(x)
    log_p = np.empty(xs.shape)
    log_q = np.empty(xs.shape)

    zero = xs == 0
    inf = np.isinf(xs)
    log_p[zero], log_q[zero] = -np.inf, 0.0
    log_p[inf], log_q[inf] = 0.0, -np.inf

    finite = ~zero & ~inf
    lg = math.lgamma(a)
    series = finite & (xs < a + 1.0)
    if series.any():
        xv = xs[series]
        lp = _series_log(a, xv, a * np.log(xv) - xv - lg)
        lp = np.minimum(lp, 0.0)
        log_p[series] = lp
        log_q[series] = np.log(-np.expm1(lp))
    frac = finite & (xs >= a + 1.0)
    if frac.any():
        xv = xs[frac]
        lq = _contfrac_log(a, xv, a * np.log(xv) - xv - lg)
        lq = np.minimum(lq, 0.0)
        log_q[frac] = lq
        log_p[frac] = np.log(-np.expm1(lq))

    if x.ndim == 0:
        return float(log_p[0]), float(log_q[0])
    return log_p.reshape(x.shape), log_q.reshape(x.shape)


def _exp(v):
    return float(np.exp(v)) if np.ndim(v) == 0 else np.exp(v)


def regularized_lower_incomplete_gamma(a: float, x):
    """P(a, x) = gamma(a, x) / Gamma(a)."""
    return _exp(log_regularized_gamma(a, x)[0])


def regularized_upper_incomplete_gamma(a: float, x):
    """Q(a, x) = Gamma(a, x) / Gamma(a)."""
    return _exp(log_regularized_gamma(a, x)[1])


def _check_dof(dof) -> None:
    if dof < 1 or int(dof) != dof:
        raise DomainError(f"dof must be a positive integer, got {dof}")


def chi_square_cdf(dof: int, t):
    """Pr[chi^2_dof <= t]."""
    _check_dof(dof)
    return regularized_lower_incomplete_gamma(dof / 2.0, np.asarray(t, dtype=float) / 2.0)


def chi_square_sf(dof: int, t):
    """Pr[chi^2_dof >= t], computed directly rather than as 1 - cdf."""
    _check_dof(dof)
    return regularized_upper_incomplete_gamma(dof / 2.0, np.asarray(t, dtype=float) / 2.0)


def chi_square_logcdf(dof: int, t):
    _check_dof(dof)
    return log_regularized_gamma(dof / 2.0, np.asarray(t, dtype=float) / 2.0)[0]


def chi_square_logsf(dof: int, t):
    _check_dof(dof)
    return log_regularized_gamma(dof / 2.0, np.asarray(t, dtype=float) / 2.0)[1]


def stirling_bounds(a: float) -> GammaBoundPair:
    """Bracket Gamma(a + 1) between sqrt(2 pi) a^(a+1/2) e^-a and that times e^(1/(12a))."""
    if not a > 0:
        raise DomainError(f"stirling_bounds needs a > 0, got {a}")
    log_lower = _LOG_SQRT_2PI + (a + 0.5) * math.log(a) - a
    log_upper = log_lower + 1.0 / (12.0 * a)
    return GammaBoundPair(_safe_exp(log_lower), _safe_exp(log_upper), log_lower, log_upper)


def _safe_exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def log_lower_incgamma_bound(a: float, x: float) -> float:
    if not a > 0 or x < 0:
        raise DomainError(f"need a > 0 and x >= 0, got a={a}, x={x}")
    if x == 0:
        return -math.inf
    return a * math.log(x) - math.log(a)


def lower_incgamma_bound(a: float, x: float) -> float:
    """gamma(a, x) <= x^a / a, from dropping e^-t under the integral."""
    return _safe_exp(log_lower_incgamma_bound(a, x))


def log_upper_incgamma_bound(a: float, x: float) -> float:
    if not a > 0:
        raise DomainError(f"need a > 0, got {a}")
    if not x > 2 * (a + 1):
        raise DomainError(f"bound only holds for x > 2(a+1) = {2 * (a + 1)}, got x={x}")
    return math.log(2.0) - x + (a + 1) * math.log(x)


def upper_incgamma_bound(a: float, x: float) -> float:
    """Gamma(a, x) < 2 e^-x x^(a+1) for x > 2(a+1)."""
    return _safe_exp(log_upper_incgamma_bound(a, x))
