"""Exact error probability of the coherent transmitter with a max-count receiver.

With the target in one of ``m`` slots, the receiver picks the slot with the
largest count and breaks ties uniformly.  The success probability is a
series over the target-slot count ``n`` of background CDF powers,

    p_err = 1 - exp(-kappa mu) / m * G_m(1 + kappa mu / mu_B),
    G_m(x) = sum_n x^n (Q(n+1)^m - Q(n)^m),

where ``Q(n) = P(Poisson(mu_B) <= n - 1)`` is the regularized upper
incomplete gamma function.  The series is summed in log space, so very
large arguments (many copies) do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._lognum import log_pmf_grid, poisson_logpmf
from .exceptions import ConvergenceError, DomainError

DEFAULT_TOL = 1e-14
_RUN = 10
_BLOCK = 512
_MAX_TERMS = 50_000_000
# below this the subtraction in 1 - success would cost more than 4 digits
_DIRECT_BELOW = 1e-4


@dataclass(frozen=True)
class ExactErrorQuery:
    """Arguments of the exact coherent error probability."""

    m: int
    kappa: float
    mu: float
    mu_B: float
    L: int = 1

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"slot count m must be an integer >= 1, got {self.m!r}")
        if int(self.L) != self.L or self.L < 1:
            raise DomainError(f"copy count L must be an integer >= 1, got {self.L!r}")
        if not (0.0 <= self.kappa <= 1.0):
            raise DomainError(f"kappa must lie in [0, 1], got {self.kappa!r}")
        for name in ("mu", "mu_B"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")

    def p_err(self) -> float:
        return p_err_multicopy_coherent(self.m, self.kappa, self.mu, self.mu_B, self.L)


def _poisson_logs(mu, n_hi):
    """``log pmf`` and ``log cdf`` of Poisson(mu) on ``0..n_hi``.

    The CDF is accumulated forward below the median and taken as
    ``log1p(-survival)`` above it, the survival being summed backward from
    a point where the pmf is below ``exp(-750)`` of its peak.  Both
    regimes therefore keep full relative precision.
    """
    log_mu = math.log(mu)
    n0 = int(mu)
    lp0 = poisson_logpmf(n0, mu)
    n_far = max(n_hi, n0) + int(40.0 * math.sqrt(mu)) + 64
    while True:
        logp = log_pmf_grid(n0, lp0, lambda n: log_mu - np.log(n + 1.0), n_far)
        if logp[-1] < lp0 - 750.0:
            break
        n_far *= 2
    log_f = np.logaddexp.accumulate(logp)
    log_s = np.empty_like(logp)
    log_s[:-1] = np.logaddexp.accumulate(logp[:0:-1])[::-1]
    log_s[-1] = -np.inf
    upper = log_s < math.log(0.5)
    log_f[upper] = np.log1p(-np.exp(log_s[upper]))
    return logp[: n_hi + 1], log_f[: n_hi + 1]


def regularized_gamma_q(n: int, mu: float) -> float:
    """``Gamma(n, mu) / Gamma(n)``, i.e. ``P(Poisson(mu) <= n - 1)``; zero for ``n = 0``."""
    if int(n) != n or n < 0:
        raise DomainError(f"n must be an integer >= 0, got {n!r}")
    if not math.isfinite(mu) or mu < 0:
        raise DomainError(f"mu must be finite and >= 0, got {mu!r}")
    if n == 0:
        return 0.0
    if mu == 0:
        return 1.0
    _, log_f = _poisson_logs(mu, n - 1)
    return min(1.0, math.exp(log_f[-1]))


def _log_brackets(m, logp, logF):
    """``log(F(n)^m - F(n-1)^m)`` given log pmf and log cdf at the same ``n``."""
    log_eps = logp - logF  # log(p(n) / F(n)), <= 0
    eps = np.exp(log_eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = np.log(-np.expm1(m * np.log1p(-eps)))
        approx = math.log(m) + log_eps + np.log1p(-0.5 * (m - 1) * eps)
    small = log_eps < -30.0
    return m * logF + np.where(small, approx, exact)


def _first_run_end(small, carry):
    """Index ending the first run of ``_RUN`` true flags (with ``carry`` leading trues)."""
    flags = np.concatenate([np.ones(carry, dtype=bool), small])
    counts = np.convolve(flags.astype(int), np.ones(_RUN, dtype=int), "valid")
    hits = np.flatnonzero(counts == _RUN)
    if hits.size == 0:
        return None
    return int(hits[0]) + _RUN - 1 - carry


def _series(m, log_x, mu_B, tol, log_shift):
    """``exp(-log_shift) * G_m(exp(log_x))`` with the run-of-small-terms stop."""
    peak = math.exp(log_x) * mu_B
    n_hi = int(peak + 20.0 * math.sqrt(peak) + _BLOCK)
    done = 0
    running = 0.0
    carry = 0
    kept = []
    while n_hi < _MAX_TERMS:
        logp, log_f = _poisson_logs(mu_B, n_hi)
        log_br = _log_brackets(m, logp, log_f)
        n = np.arange(done, n_hi + 1)
        terms = np.exp(n * log_x + log_br[done:] - log_shift)
        sums = running + np.cumsum(terms)
        small = (terms < tol * sums) & (sums > 0)
        end = _first_run_end(small, carry)
        if end is not None:
            kept.append(terms[: end + 1])
            return math.fsum(np.concatenate(kept))
        kept.append(terms)
        running = float(sums[-1])
        if small.all():
            carry = min(_RUN - 1, carry + small.size)
        else:
            carry = min(_RUN - 1, int(np.argmin(small[::-1])))
        done = n_hi + 1
        n_hi *= 2
    raise ConvergenceError(
        f"G_m series did not meet its stopping rule within {_MAX_TERMS} terms",
        iterates=(running,),
    )


def _error_series(m, signal, mu_B):
    """``p_err`` summed term by term as ``sum_n P_target(n) e(n)``.

    ``e(n)``, the error probability given ``n`` counts in the target slot,
    is ``mean_k [1 - F(n)^k F(n-1)^(m-1-k)]`` over ``k = 0..m-1``, with
    ``F`` the background CDF.  Every term is non-negative and computed with
    ``expm1``, so tiny error probabilities keep their relative precision
    where ``1 - success`` would cancel.
    """
    total = signal + mu_B
    n0 = int(total)
    log_t = math.log(total)
    n_hi = n0 + int(40.0 * math.sqrt(total)) + 64
    while True:
        log_pt = log_pmf_grid(n0, poisson_logpmf(n0, total), lambda n: log_t - np.log(n + 1.0), n_hi)
        if log_pt[-1] < log_pt[n0] - 750.0:
            break
        n_hi *= 2
    _, log_f = _poisson_logs(mu_B, n_hi)
    # F(-1) = 0; a huge finite log keeps 0 * log F(-1) = 0 for the k = m-1 term
    log_f_prev = np.concatenate([[-1e300], log_f[:-1]])
    k = np.arange(m)[:, None]
    expo = k * log_f[None, :] + (m - 1 - k) * log_f_prev[None, :]
    err_given_n = -np.expm1(expo).mean(axis=0)
    return math.fsum(np.exp(log_pt) * err_given_n)


def generating_g(m: int, x: float, mu_B: float, tol: float = DEFAULT_TOL) -> float:
    """Generating function ``G_m(x) = sum_n x^n (Q(n+1)^m - Q(n)^m)``.

    Summation stops once ten consecutive terms are each below
    ``tol`` times the running sum.  Overflows to ``inf`` for extreme ``x``;
    :func:`p_err_single_shot` sums the rescaled series instead.
    """
    if int(m) != m or m < 1:
        raise DomainError(f"m must be an integer >= 1, got {m!r}")
    if not (x >= 1.0) or not math.isfinite(x):
        raise DomainError(f"x must be finite and >= 1, got {x!r}")
    if not (mu_B > 0) or not math.isfinite(mu_B):
        raise DomainError(f"mu_B must be > 0, got {mu_B!r}")
    return _series(int(m), math.log(x), mu_B, tol, 0.0)


def p_err_single_shot(
    m: int, kappa: float, mu: float, mu_B: float, tol: float = DEFAULT_TOL
) -> float:
    """Single-copy error probability of max-count ranging with a coherent probe.

    Evaluated as ``1 - exp(-kappa mu) G_m(1 + kappa mu / mu_B) / m``.  When
    that result falls below 1e-4 the same quantity is re-summed term by term
    as an error series, which keeps relative precision down to 1e-300.
    ``mu_B = 0`` uses the analytic limit ``(1 - 1/m) exp(-kappa mu)``.
    """
    q = ExactErrorQuery(m, kappa, mu, mu_B)
    signal = q.kappa * q.mu
    chance = 1.0 - 1.0 / q.m
    if q.m == 1:
        return 0.0
    if signal == 0:
        return chance
    if q.mu_B == 0:
        return chance * math.exp(-signal)
    log_x = math.log1p(signal / q.mu_B)
    p = 1.0 - _series(q.m, log_x, q.mu_B, tol, signal) / q.m
    if p < _DIRECT_BELOW:
        p = _error_series(q.m, signal, q.mu_B)
    return min(chance, max(0.0, p))


def p_err_multicopy_coherent(
    m: int, kappa: float, mu: float, mu_B: float, L: int, tol: float = DEFAULT_TOL
) -> float:
    """Error probability with ``L`` coherent copies and summed slot counts.

    Summing ``L`` independent copies is a single shot in which both the
    signal and the background means are multiplied by ``L``.
    """
    q = ExactErrorQuery(m, kappa, mu, mu_B, L)
    return p_err_single_shot(q.m, q.kappa, q.L * q.mu, q.L * q.mu_B, tol)
