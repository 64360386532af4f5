"""Photon-count distributions at the ranging receiver.

Every distribution is a truncated PMF: an array of probabilities for
counts ``0..n_max`` plus the mass that was cut off (``tail_mass``).  The
tail is bookkeeping only; the stored probabilities are never renormalized.

Optical loss (target reflectance) acts by binomial thinning, i.e. every
photon survives independently with probability ``kappa``.  Background light
is Poissonian and adds incoherently to the returning signal.  For the
entangled probe the idler arm is ideal: unit efficiency, no background.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz
from scipy.stats import binom

from ._lognum import log_pmf_grid, neg_binomial_logpmf, poisson_logpmf
from .exceptions import DomainError

DEFAULT_EPS = 1e-12
NORM_TOL = 1e-12


def _check_eps(eps):
    if not (0.0 < eps < 1.0):
        raise DomainError(f"truncation tolerance must lie in (0, 1), got {eps!r}")


def _check_mean(name, value):
    if not math.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be finite and >= 0, got {value!r}")


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CountPmf:
    """Truncated PMF over photon counts ``n = 0..n_max``."""

    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or probs.size == 0:
            raise DomainError("CountPmf needs a non-empty 1-D probability array")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DomainError("probabilities must be finite and non-negative")
        tail = float(self.tail_mass)
        if tail < 0:
            if tail < -NORM_TOL:
                raise DomainError(f"negative tail mass {tail!r}")
            tail = 0.0
        if abs(math.fsum(probs) + tail - 1.0) > NORM_TOL:
            raise DomainError("probabilities plus tail mass must sum to 1")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_mass", tail)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def padded(self, size: int) -> np.ndarray:
        """Probabilities zero-padded (never cut) to at least ``size`` entries."""
        if size <= self.probs.size:
            return np.array(self.probs)
        return np.concatenate([self.probs, np.zeros(size - self.probs.size)])

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)


@dataclass(frozen=True, eq=False)
class JointCountPmf:
    """Truncated joint PMF over (signal count, idler count) for one slot.

    ``probs[n_s, n_i]`` is the probability of ``n_s`` signal and ``n_i``
    idler counts.
    """

    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 2 or probs.size == 0:
            raise DomainError("JointCountPmf needs a non-empty 2-D probability array")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DomainError("probabilities must be finite and non-negative")
        tail = float(self.tail_mass)
        if tail < 0:
            if tail < -NORM_TOL:
                raise DomainError(f"negative tail mass {tail!r}")
            tail = 0.0
        if abs(math.fsum(probs.ravel()) + tail - 1.0) > NORM_TOL:
            raise DomainError("probabilities plus tail mass must sum to 1")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_mass", tail)

    @property
    def n_S_max(self) -> int:
        return self.probs.shape[0] - 1

    @property
    def n_I_max(self) -> int:
        return self.probs.shape[1] - 1

    def signal_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def idler_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=0)


@dataclass(frozen=True)
class ChannelParams:
    """Target reflectance ``kappa`` and mean background photons per slot ``mu_B``."""

    kappa: float
    mu_B: float

    def __post_init__(self):
        if not (0.0 <= self.kappa <= 1.0):
            raise DomainError(f"kappa must lie in [0, 1], got {self.kappa!r}")
        _check_mean("mu_B", self.mu_B)


@dataclass(frozen=True)
class TmsvProbe:
    """``R`` copies of a two-mode squeezed vacuum carrying ``mu`` signal photons in total."""

    mu: float
    R: int
    mu0: float = field(init=False)

    def __post_init__(self):
        if not math.isfinite(self.mu) or self.mu <= 0:
            raise DomainError(f"TMSV mean photon number must be > 0, got {self.mu!r}")
        if int(self.R) != self.R or self.R < 1:
            raise DomainError(f"copy count R must be an integer >= 1, got {self.R!r}")
        object.__setattr__(self, "R", int(self.R))
        object.__setattr__(self, "mu0", self.mu / self.R)


def _from_log_recurrence(n0, log_p_n0, log_ratio, eps, size_hint):
    """Build a truncated PMF from its mode ``n0`` and ``log(p[n+1] / p[n])``.

    The grid is extended until the ratio has dropped below one and the
    geometric bound on the remaining tail is negligible next to ``eps``.
    Tails are summed from the far end so that small tails keep full
    relative precision.
    """
    n_hi = max(int(size_hint), n0 + 16)
    beyond = 0.0
    while True:
        logp = log_pmf_grid(n0, log_p_n0, log_ratio, n_hi)
        if logp[-1] == -np.inf:
            break
        r = math.exp(float(log_ratio(np.array([n_hi]))[0]))
        if r < 1.0:
            bound = math.exp(logp[-1]) * r / (1.0 - r)
            if bound <= eps * 1e-6:
                beyond = bound
                break
        n_hi *= 2
    p = np.exp(logp)
    tails = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]]) + beyond
    n_max = int(np.argmax(tails <= eps))
    return CountPmf(p[: n_max + 1], tail_mass=float(tails[n_max]))


def poisson_pmf(mu: float, eps: float = DEFAULT_EPS) -> CountPmf:
    """Poisson PMF truncated at the smallest ``n_max`` whose tail is at most ``eps``."""
    _check_mean("mu", mu)
    _check_eps(eps)
    if mu == 0:
        return CountPmf(np.array([1.0]), 0.0)
    log_mu = math.log(mu)
    n0 = int(mu)
    return _from_log_recurrence(
        n0,
        poisson_logpmf(n0, mu),
        lambda n: log_mu - np.log(n + 1.0),
        eps,
        mu + 12.0 * math.sqrt(mu) + 32,
    )


def neg_binomial_pmf(R: int, mu0: float, eps: float = DEFAULT_EPS) -> CountPmf:
    """Photon-number law of ``R`` independent thermal modes of mean ``mu0`` each.

    ``p[n] = C(n+R-1, n) (1-q)^R q^n`` with ``q = mu0 / (1 + mu0)``; ``R = 1``
    is the thermal (Bose-Einstein) law.
    """
    if int(R) != R or R < 1:
        raise DomainError(f"R must be an integer >= 1, got {R!r}")
    _check_mean("mu0", mu0)
    _check_eps(eps)
    if mu0 == 0:
        return CountPmf(np.array([1.0]), 0.0)
    R = int(R)
    log_q = math.log(mu0) - math.log1p(mu0)
    mean = R * mu0
    sd = math.sqrt(mean * (1.0 + mu0))
    n0 = int((R - 1) * mu0)
    return _from_log_recurrence(
        n0,
        neg_binomial_logpmf(n0, R, mu0),
        lambda n: np.log(n + float(R)) - np.log(n + 1.0) + log_q,
        eps,
        mean + 12.0 * sd + 32,
    )


def binomial_thin(p: CountPmf, kappa: float) -> CountPmf:
    """Law of the surviving count when each photon survives with probability ``kappa``."""
    if not (0.0 <= kappa <= 1.0):
        raise DomainError(f"kappa must lie in [0, 1], got {kappa!r}")
    if kappa == 0:
        # the tail is lost as well, so this is exact
        return CountPmf(np.array([1.0]), 0.0)
    if kappa == 1:
        return p
    n = np.arange(p.probs.size)
    kernel = binom.pmf(n[None, :], n[:, None], kappa)
    return CountPmf(p.probs @ kernel, p.tail_mass)


def convolve(a: CountPmf, b: CountPmf) -> CountPmf:
    """Law of the sum of two independent counts."""
    tail = a.tail_mass + b.tail_mass - a.tail_mass * b.tail_mass
    return CountPmf(np.convolve(a.probs, b.probs), tail)


def product_pmf(a: CountPmf, b: CountPmf) -> JointCountPmf:
    """Joint law of two independent counts (e.g. two time slots)."""
    tail = a.tail_mass + b.tail_mass - a.tail_mass * b.tail_mass
    return JointCountPmf(np.outer(a.probs, b.probs), tail)


def coherent_slot_pmf(
    mu: float, ch: ChannelParams, target_present: bool, eps: float = DEFAULT_EPS
) -> CountPmf:
    """Counts in one slot for a coherent probe of mean ``mu``."""
    _check_mean("mu", mu)
    if target_present:
        return poisson_pmf(ch.kappa * mu + ch.mu_B, eps)
    return poisson_pmf(ch.mu_B, eps)


def _signal_given_idler(n_i_max, kappa, background):
    """Rows ``n_i``: law of Binomial(n_i, kappa) + background, untruncated."""
    n = np.arange(n_i_max + 1)
    thin = binom.pmf(n[None, :], n[:, None], kappa)
    width = n_i_max + background.size
    col = np.zeros(n_i_max + 1)
    col[0] = background[0]
    row = np.zeros(width)
    row[: background.size] = background
    return thin @ toeplitz(col, row)


def quantum_slot_joint_pmf(
    probe: TmsvProbe,
    ch: ChannelParams,
    target_present: bool,
    eps: float = DEFAULT_EPS,
) -> JointCountPmf:
    """Joint (signal, idler) counts in one slot for the multi-copy TMSV probe.

    The idler count is the photon number ``N`` of the probe.  With the target
    in the slot the signal count is ``Binomial(N, kappa) + Poisson(mu_B)``;
    without it the signal is background only and independent of ``N``.

    Truncation budget: ``eps/2`` on the idler axis, ``eps/4`` on the
    background law and ``eps/4`` on the signal axis.
    """
    _check_eps(eps)
    idler = neg_binomial_pmf(probe.R, probe.mu0, eps / 2)
    background = poisson_pmf(ch.mu_B, eps / 4)
    kappa = ch.kappa if target_present else 0.0
    cond = _signal_given_idler(idler.n_max, kappa, background.probs)
    joint = (cond * idler.probs[:, None]).T

    marginal = joint.sum(axis=1)
    sig_tails = np.concatenate([np.cumsum(marginal[::-1])[::-1][1:], [0.0]])
    n_s_max = int(np.argmax(sig_tails <= eps / 4))
    joint = joint[: n_s_max + 1]
    tail = max(0.0, 1.0 - math.fsum(joint.ravel()))
    return JointCountPmf(joint, tail)
