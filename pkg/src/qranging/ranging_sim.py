"""Monte Carlo and exact enumeration of the full ranging experiment.

A trial sends ``L`` probe copies towards a target hidden in one of ``m``
time slots, records the photon counts and decides which slot holds the
target:

* ``MAX_TOTAL_COUNT`` picks the slot with the largest count summed over
  copies (coherent probe, or either probe ignoring the idler);
* ``IDLER_CORRELATION`` picks the slot maximizing ``c_j = n_j . n_I``, the
  scalar product of the slot counts with the idler counts (TMSV probe).

Ties are broken uniformly at random.

Reproducibility: trials are grouped in fixed-size blocks and block ``b``
draws from ``Philox`` keyed by ``SeedSequence(seed, spawn_key=(b,))``.
Workers receive whole blocks and only integer error counts are summed, so
the estimate is bit-identical for any number of workers.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import binom

from .exceptions import DomainError, FeasibilityError, RuleMismatchError
from .info_measures import xi_coherent_closed, xi_quantum
from .photon_stats import (
    DEFAULT_EPS,
    ChannelParams,
    TmsvProbe,
    neg_binomial_pmf,
    poisson_pmf,
)

BLOCK_TRIALS = 1 << 16
WORKERS_ENV = "QRANGING_WORKERS"
_CHUNK_DRAWS = 1 << 21
_GEOMETRIC_MAX_R = 64
_SAMPLING_EPS = 1e-15
_Z95 = 1.959963984540054


class DecisionRule(str, Enum):
    MAX_TOTAL_COUNT = "max_total"
    IDLER_CORRELATION = "idler_correlation"


@dataclass(frozen=True)
class CoherentProbe:
    """Coherent pulse with mean photon number ``mu`` per copy."""

    mu: float

    def __post_init__(self):
        if not math.isfinite(self.mu) or self.mu < 0:
            raise DomainError(f"coherent mean photon number must be >= 0, got {self.mu!r}")


@dataclass(frozen=True)
class Scenario:
    m: int
    L: int
    probe: CoherentProbe | TmsvProbe
    channel: ChannelParams
    target_slot: int = 0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise DomainError(f"slot count m must be an integer >= 2, got {self.m!r}")
        if int(self.L) != self.L or self.L < 1:
            raise DomainError(f"copy count L must be an integer >= 1, got {self.L!r}")
        if not (0 <= self.target_slot < self.m):
            raise DomainError(f"target_slot must lie in [0, {self.m}), got {self.target_slot!r}")
        if not isinstance(self.probe, (CoherentProbe, TmsvProbe)):
            raise DomainError(f"unsupported probe {self.probe!r}")

    @property
    def is_tmsv(self) -> bool:
        return isinstance(self.probe, TmsvProbe)


@dataclass(frozen=True)
class ShotOutcome:
    """Counts of one trial: ``signal_counts[slot, copy]`` and ``idler_counts[copy]``."""

    signal_counts: np.ndarray
    idler_counts: np.ndarray
    has_idler: bool = True


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    trials: int
    errors: int
    std_err: float
    ci95_low: float
    ci95_high: float
    seed: int


@dataclass(frozen=True)
class SlopeRow:
    L: int
    p_hat: float
    std_err: float
    errors: int
    norm_log_err: float
    xi_ref: float
    needs_more_trials: bool


def _as_rule(rule) -> DecisionRule:
    return rule if isinstance(rule, DecisionRule) else DecisionRule(rule)


def _check_rule(s: Scenario, rule: DecisionRule):
    if rule is DecisionRule.IDLER_CORRELATION and not s.is_tmsv:
        raise RuleMismatchError("idler-correlation decisions need a TMSV probe")


# -- sampling ---------------------------------------------------------------


def sample_neg_binomial(R, mu0, rng, size):
    """Photon number of ``R`` thermal modes of mean ``mu0``.

    Sum of ``R`` geometric draws for ``R <= 64``, otherwise a Poisson draw
    with Gamma(R, mu0) distributed mean.
    """
    if mu0 == 0:
        return np.zeros(size, dtype=np.int64)
    if R <= _GEOMETRIC_MAX_R:
        draws = rng.geometric(1.0 / (1.0 + mu0), size=(R,) + tuple(np.atleast_1d(size)))
        return (draws - 1).sum(axis=0)
    return rng.poisson(rng.gamma(R, mu0, size=size))


def _sample_counts(s: Scenario, rng, n):
    """Per-copy counts of ``n`` trials: signal ``(n, m, L)``, idler ``(n, L)``."""
    ch = s.channel
    signal = rng.poisson(ch.mu_B, size=(n, s.m, s.L))
    if s.is_tmsv:
        idler = sample_neg_binomial(s.probe.R, s.probe.mu0, rng, (n, s.L))
        signal[:, s.target_slot, :] += rng.binomial(idler, ch.kappa)
    else:
        idler = np.zeros((n, s.L), dtype=np.int64)
        signal[:, s.target_slot, :] += rng.poisson(ch.kappa * s.probe.mu, size=(n, s.L))
    return signal, idler


def sample_shot(s: Scenario, rng: np.random.Generator) -> ShotOutcome:
    """Draw the counts of a single trial."""
    signal, idler = _sample_counts(s, rng, 1)
    return ShotOutcome(signal[0], idler[0], has_idler=s.is_tmsv)


def _statistic(signal, idler, rule):
    if rule is DecisionRule.MAX_TOTAL_COUNT:
        return signal.sum(axis=-1)
    return np.einsum("...jl,...l->...j", signal, idler)


def _argmax_random_ties(stats, rng):
    """Row-wise argmax of ``stats`` (n, m) with uniform tie-breaking."""
    top = stats == stats.max(axis=1, keepdims=True)
    ties = top.sum(axis=1)
    pick = (rng.random(stats.shape[0]) * ties).astype(np.int64)
    rank = np.cumsum(top, axis=1) - 1
    return np.argmax(top & (rank == pick[:, None]), axis=1)


def decide(o: ShotOutcome, rule, rng: np.random.Generator) -> int:
    """Slot chosen by ``rule`` for one outcome."""
    rule = _as_rule(rule)
    if rule is DecisionRule.IDLER_CORRELATION and not o.has_idler:
        raise RuleMismatchError("idler-correlation decisions need idler counts")
    stats = _statistic(np.asarray(o.signal_counts), np.asarray(o.idler_counts), rule)
    return int(_argmax_random_ties(stats[None, :], rng)[0])


def _aggregate_stats(s: Scenario, rule, rng, n, hist_pvals):
    """Decision statistics drawn directly from their law, without per-copy counts.

    Sums of independent Poisson / binomial counts are drawn as one Poisson /
    binomial variate.  For the correlation statistic the copies are grouped
    by idler count ``k`` (multinomial histogram ``h``); the slot statistic is
    then ``sum_k k * (Poisson(mu_B h_k) [+ Binomial(k h_k, kappa)])``.
    """
    ch, L, t = s.channel, s.L, s.target_slot
    if not s.is_tmsv:
        stats = rng.poisson(L * ch.mu_B, size=(n, s.m))
        stats[:, t] += rng.poisson(L * ch.kappa * s.probe.mu, size=n)
        return stats
    if rule is DecisionRule.MAX_TOTAL_COUNT:
        total = sample_neg_binomial(L * s.probe.R, s.probe.mu0, rng, n)
        stats = rng.poisson(L * ch.mu_B, size=(n, s.m))
        stats[:, t] += rng.binomial(total, ch.kappa)
        return stats
    hist = rng.multinomial(L, hist_pvals, size=n)[:, 1:]
    k = np.arange(1, hist_pvals.size)
    noise = rng.poisson(ch.mu_B * hist[:, None, :], size=(n, s.m, k.size))
    stats = noise @ k
    stats[:, t] += rng.binomial(hist * k, ch.kappa) @ k
    return stats


def _hist_pvals(s: Scenario, rule, method):
    if method != "aggregate" or not s.is_tmsv or rule is not DecisionRule.IDLER_CORRELATION:
        return None
    pmf = neg_binomial_pmf(s.probe.R, s.probe.mu0, _SAMPLING_EPS).probs
    if pmf.size < 2:
        pmf = np.array([pmf[0], 0.0])
    return pmf / pmf.sum()


def _block_errors(s: Scenario, rule, method, seed, block, n):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))
    hist_pvals = _hist_pvals(s, rule, method)
    if method == "aggregate":
        width = s.m * (hist_pvals.size if hist_pvals is not None else 1)
    else:
        width = s.m * s.L + s.L
    chunk = max(1, _CHUNK_DRAWS // width)
    errors = 0
    done = 0
    while done < n:
        size = min(chunk, n - done)
        if method == "aggregate":
            stats = _aggregate_stats(s, rule, rng, size, hist_pvals)
        else:
            signal, idler = _sample_counts(s, rng, size)
            stats = _statistic(signal, idler, rule)
        errors += int(np.count_nonzero(_argmax_random_ties(stats, rng) != s.target_slot))
        done += size
    return errors


def _block_errors_star(args):
    return _block_errors(*args)


def resolve_workers(workers=None) -> int:
    """Explicit count, else ``$QRANGING_WORKERS``, else all CPUs."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    if workers < 1:
        raise DomainError(f"worker count must be >= 1, got {workers!r}")
    return workers


def wilson_interval(errors, trials, z=_Z95):
    p = errors / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


def mc_error_probability(
    s: Scenario,
    rule,
    trials: int,
    seed: int,
    workers: int | None = None,
    method: str = "aggregate",
) -> McEstimate:
    """Monte Carlo estimate of the ranging error probability.

    ``method="per_copy"`` simulates every slot and copy count;
    ``"aggregate"`` (default) draws the decision statistics from their exact
    law at a cost independent of ``L``.
    """
    rule = _as_rule(rule)
    _check_rule(s, rule)
    if method not in ("aggregate", "per_copy"):
        raise DomainError(f"unknown sampling method {method!r}")
    if int(trials) != trials or trials < 1:
        raise DomainError(f"trials must be an integer >= 1, got {trials!r}")
    if int(seed) != seed or not (0 <= seed < 2**64):
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    n_blocks = -(-trials // BLOCK_TRIALS)
    jobs = [
        (s, rule, method, int(seed), b, min(BLOCK_TRIALS, trials - b * BLOCK_TRIALS))
        for b in range(n_blocks)
    ]
    workers = min(resolve_workers(workers), n_blocks)
    if workers == 1:
        errors = sum(map(_block_errors_star, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = sum(pool.map(_block_errors_star, jobs))
    p_hat = errors / trials
    low, high = wilson_interval(errors, trials)
    return McEstimate(
        p_hat=p_hat,
        trials=int(trials),
        errors=errors,
        std_err=math.sqrt(p_hat * (1.0 - p_hat) / trials),
        ci95_low=low,
        ci95_high=high,
        seed=int(seed),
    )


# -- exact enumeration -------------------------------------------------------


def _stat_law(copy_laws, weights, rule):
    """Law of the slot statistic: enumerate every tuple of per-copy counts."""
    grids = np.meshgrid(*[np.arange(law.size) for law in copy_laws], indexing="ij")
    prob = np.ones(grids[0].shape)
    stat = np.zeros(grids[0].shape, dtype=np.int64)
    for law, grid, w in zip(copy_laws, grids, weights):
        prob = prob * law[grid]
        stat = stat + (grid if rule is DecisionRule.MAX_TOTAL_COUNT else grid * w)
    values, inverse = np.unique(stat.ravel(), return_inverse=True)
    return values, np.bincount(inverse, weights=prob.ravel())


def _error_over_slots(target, background, m):
    """Expected error credit: enumerate every m-tuple of slot statistics."""
    t_val, t_p = target
    b_val, b_p = background
    axes = [t_val] + [b_val] * (m - 1)
    probs = [t_p] + [b_p] * (m - 1)
    grids = np.meshgrid(*axes, indexing="ij")
    weight = np.prod(np.stack(np.meshgrid(*probs, indexing="ij")), axis=0)
    top = np.max(np.stack(grids), axis=0)
    ties = sum((g == top).astype(int) for g in grids)
    credit = (grids[0] == top) / ties
    return math.fsum((weight * (1.0 - credit)).ravel())


def enumerate_error_probability(s: Scenario, rule, eps: float = DEFAULT_EPS, budget: int = 10**8) -> float:
    """Exact error probability by summing the truncated product PMF.

    Every configuration of slot and idler counts is visited; a tie among
    ``k`` maximal slots earns credit ``1/k`` if the target is among them.
    Error credit is summed directly (not as ``1 - success``), so tiny error
    probabilities keep their relative precision; truncation leaves out at
    most ``(m + 1) L eps`` of probability.
    """
    rule = _as_rule(rule)
    _check_rule(s, rule)
    ch, L, m = s.channel, s.L, s.m
    background = poisson_pmf(ch.mu_B, eps).probs
    if s.is_tmsv:
        idler = neg_binomial_pmf(s.probe.R, s.probe.mu0, eps).probs
        configs = itertools.product(range(idler.size), repeat=L)
        n_configs = idler.size**L
    else:
        target_law = poisson_pmf(ch.kappa * s.probe.mu + ch.mu_B, eps).probs
        configs = [(1,) * L]
        n_configs = 1
    lower = n_configs * background.size**L
    if lower > budget:
        raise FeasibilityError(
            f"enumeration needs at least {lower} terms (budget {budget})", lower
        )
    used = 0
    error = []
    for config in configs:
        if s.is_tmsv:
            weight = math.prod(idler[i] for i in config)
            t_laws = [
                np.convolve(binom.pmf(np.arange(i + 1), i, ch.kappa), background) for i in config
            ]
        else:
            weight = 1.0
            t_laws = [target_law] * L
        t_stat = _stat_law(t_laws, config, rule)
        b_stat = _stat_law([background] * L, config, rule)
        used += math.prod(x.size for x in t_laws) + background.size**L
        used += t_stat[0].size * b_stat[0].size ** (m - 1)
        if used > budget:
            raise FeasibilityError(
                f"enumeration exceeded its budget of {budget} terms", used
            )
        error.append(weight * _error_over_slots(t_stat, b_stat, m))
    return math.fsum(error)


# -- slope of the log error --------------------------------------------------


def slope_report(
    s: Scenario,
    rule,
    L_list,
    trials: int,
    seed: int,
    workers: int | None = None,
    xi_ref: float | None = None,
) -> list[SlopeRow]:
    """Normalized log error ``-ln(p_hat) / L`` next to the asymptotic exponent."""
    rule = _as_rule(rule)
    if xi_ref is None:
        if s.is_tmsv:
            xi_ref, _ = xi_quantum(s.probe.mu, s.channel)
        else:
            xi_ref = xi_coherent_closed(s.channel, s.probe.mu)
    rows = []
    for L in L_list:
        est = mc_error_probability(
            Scenario(s.m, L, s.probe, s.channel, s.target_slot), rule, trials, seed, workers
        )
        zero = est.errors == 0
        rows.append(
            SlopeRow(
                L=int(L),
                p_hat=est.p_hat,
                std_err=est.std_err,
                errors=est.errors,
                norm_log_err=math.inf if zero else -math.log(est.p_hat) / L,
                xi_ref=xi_ref,
                needs_more_trials=zero,
            )
        )
    return rows
