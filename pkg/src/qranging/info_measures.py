"""Alpha-information, Chernoff and Bhattacharyya exponents, quantum advantage.

All exponents are in nats per probe copy.  Disjoint distributions carry
infinite information and are reported as ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, DomainError, UndefinedAdvantageError
from .photon_stats import (
    DEFAULT_EPS,
    ChannelParams,
    CountPmf,
    JointCountPmf,
    TmsvProbe,
    coherent_slot_pmf,
    poisson_pmf,
    quantum_slot_joint_pmf,
)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
ALPHA_TOL = 1e-6
# truncation depth for Chernoff searches assumes the optimum lies in [0.2, 0.8]
CHERNOFF_ALPHA_MIN = 0.2


@dataclass(frozen=True)
class ExponentReport:
    """Asymptotic exponents of both transmitters at one operating point."""

    xi_coh: float
    xi_q: float
    alpha_star: float
    advantage_q: float
    q_emp: float
    r_used: int


def _aligned(p, q):
    a = np.asarray(p.probs if hasattr(p, "probs") else p, dtype=float)
    b = np.asarray(q.probs if hasattr(q, "probs") else q, dtype=float)
    if a.ndim != b.ndim:
        raise DomainError("distributions must have the same dimensionality")
    shape = tuple(max(x, y) for x, y in zip(a.shape, b.shape))
    pa = np.zeros(shape)
    pb = np.zeros(shape)
    pa[tuple(slice(0, s) for s in a.shape)] = a
    pb[tuple(slice(0, s) for s in b.shape)] = b
    return pa.ravel(), pb.ravel()


def alpha_information(
    p: CountPmf | JointCountPmf, q: CountPmf | JointCountPmf, alpha: float
) -> float:
    """``-ln sum p^alpha q^(1-alpha)`` over the common (zero-padded) support.

    The overlap is evaluated as ``1 + D`` with
    ``D = sum [p^a q^(1-a) - a p - (1-a) q] <= 0``, which avoids forming
    ``1 - overlap`` by subtraction and leaves the truncated tails out of the
    deficit.  Cells where either mass is zero contribute no overlap.

    Truncating either input at tail mass ``eps`` drops at most
    ``eps ** min(alpha, 1 - alpha)`` of overlap (Hoelder), so small ``alpha``
    needs much deeper tails than the PMF default; see
    :func:`poisson_alpha_series`.
    """
    if not (0.0 <= alpha <= 1.0):
        raise DomainError(f"alpha must lie in [0, 1], got {alpha!r}")
    a, b = _aligned(p, q)
    both = (a > 0) & (b > 0)
    if not np.any(both):
        return math.inf
    pa, qb = a[both], b[both]
    if alpha == 0.5:
        deficit = -0.5 * np.square(np.sqrt(pa) - np.sqrt(qb))
    else:
        la, lb = np.log(pa), np.log(qb)
        lr = la - lb
        with np.errstate(over="ignore"):
            near = qb * np.expm1(alpha * lr)
        far = np.exp(alpha * la + (1.0 - alpha) * lb) - qb
        deficit = np.where(alpha * lr < 700.0, near, far) - alpha * (pa - qb)
    d = math.fsum(deficit)
    d -= alpha * math.fsum(a[(a > 0) & (b == 0)])
    d -= (1.0 - alpha) * math.fsum(b[(b > 0) & (a == 0)])
    if d < -0.5:
        # small overlap: 1 + d would cancel, sum the positive terms instead
        overlap = math.fsum(np.exp(alpha * np.log(pa) + (1.0 - alpha) * np.log(qb)))
        return -math.log(overlap) if overlap > 0 else math.inf
    return max(0.0, -math.log1p(min(d, 0.0)))


def poisson_alpha_closed(mu1: float, mu2: float, alpha: float) -> float:
    """Closed-form alpha-information between Poisson laws of means ``mu1``, ``mu2``."""
    if mu1 < 0 or mu2 < 0:
        raise DomainError("Poisson means must be >= 0")
    if not (0.0 <= alpha <= 1.0):
        raise DomainError(f"alpha must lie in [0, 1], got {alpha!r}")
    return mu2 + alpha * (mu1 - mu2) - mu1**alpha * mu2 ** (1.0 - alpha)


def tail_eps_for(alpha: float, tol: float) -> float:
    """Truncation tolerance keeping the neglected overlap at ``alpha`` below ``tol``."""
    a = min(alpha, 1.0 - alpha)
    eps = tol ** (1.0 / a) if a > 0 else 0.0
    return min(tol, max(eps, 1e-300))


def poisson_alpha_series(mu1: float, mu2: float, alpha: float, tol: float = 1e-13) -> float:
    """Alpha-information of two Poisson laws by direct summation of the overlap."""
    eps = tail_eps_for(alpha, tol)
    return alpha_information(poisson_pmf(mu1, eps), poisson_pmf(mu2, eps), alpha)


def golden_section_max(f, a=0.0, b=1.0, tol=ALPHA_TOL):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``.

    The returned ``x`` is within ``tol / 2`` of the maximizer.
    """
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def chernoff_information(p, q) -> tuple[float, float]:
    """Chernoff information ``max_alpha C_alpha(p, q)`` and its maximizer.

    Golden-section search relies on the concavity of ``alpha -> C_alpha``.
    """
    half = alpha_information(p, q, 0.5)
    if math.isinf(half):
        return math.inf, 0.5
    alpha, xi = golden_section_max(lambda al: alpha_information(p, q, al))
    for edge in (0.0, 1.0):
        val = alpha_information(p, q, edge)
        if val > xi:
            alpha, xi = edge, val
    return xi, alpha


def xi_ranging(p_target, p_background) -> float:
    """Ranging exponent: twice the Bhattacharyya information of the slot laws."""
    return 2.0 * alpha_information(p_target, p_background, 0.5)


def coherent_slot_laws(mu: float, ch: ChannelParams, eps: float = DEFAULT_EPS):
    """``(target present, target absent)`` slot laws of the coherent probe."""
    return coherent_slot_pmf(mu, ch, True, eps), coherent_slot_pmf(mu, ch, False, eps)


def xi_coherent_closed(ch: ChannelParams, mu: float) -> float:
    """Ranging exponent of the coherent transmitter with photon counting.

    ``2 mu_B + kappa mu - 2 sqrt(mu_B (mu_B + kappa mu))``, evaluated as
    ``(kappa mu / (sqrt(mu_B + kappa mu) + sqrt(mu_B)))**2`` which is
    algebraically identical, cancellation-free and equal to ``kappa mu`` at
    ``mu_B = 0``.
    """
    if not math.isfinite(mu) or mu < 0:
        raise DomainError(f"mu must be finite and >= 0, got {mu!r}")
    signal = ch.kappa * mu
    if signal == 0:
        return 0.0
    return (signal / (math.sqrt(ch.mu_B + signal) + math.sqrt(ch.mu_B))) ** 2


def _xi_quantum_at(mu, R, ch, eps):
    probe = TmsvProbe(mu, R)
    eps = tail_eps_for(0.5, eps)
    present = quantum_slot_joint_pmf(probe, ch, True, eps)
    absent = quantum_slot_joint_pmf(probe, ch, False, eps)
    return xi_ranging(present, absent)


def xi_quantum(
    mu: float,
    ch: ChannelParams,
    eps: float = DEFAULT_EPS,
    r_start: int | None = None,
    rel_tol: float = 1e-6,
    max_doublings: int = 20,
) -> tuple[float, int]:
    """Ranging exponent of the multi-copy TMSV probe with joint photon counting.

    The copy count ``R`` (at fixed total mean ``mu``) starts at
    ``ceil(100 mu)`` and doubles until successive exponents agree to
    ``rel_tol``.  Returns ``(xi, R)`` for the last, converged ``R``.
    ``eps`` bounds the neglected overlap, so the joint PMFs are truncated
    at ``eps**2``.
    """
    if not math.isfinite(mu) or mu <= 0:
        raise DomainError(f"mu must be > 0, got {mu!r}")
    R = r_start if r_start is not None else max(1, math.ceil(100.0 * mu))
    prev = cur = _xi_quantum_at(mu, R, ch, eps)
    for _ in range(max_doublings):
        R *= 2
        cur = _xi_quantum_at(mu, R, ch, eps)
        if abs(cur - prev) <= rel_tol * abs(cur):
            return cur, R
        prev = cur
    raise ConvergenceError(
        f"xi_quantum did not converge within {max_doublings} doublings (R={R})",
        iterates=(prev, cur),
    )


def quantum_advantage(
    ch: ChannelParams, mu: float, eps: float = DEFAULT_EPS
) -> ExponentReport:
    """Both exponents, their ratio and the empirical bound ``1 + 1/mu``."""
    xi_coh = xi_coherent_closed(ch, mu)
    if xi_coh == 0:
        raise UndefinedAdvantageError(
            "coherent exponent is zero (mu = 0 or kappa = 0); advantage undefined"
        )
    xi_q, r_used = xi_quantum(mu, ch, eps)
    _, alpha_star = chernoff_information(
        *coherent_slot_laws(mu, ch, tail_eps_for(CHERNOFF_ALPHA_MIN, eps))
    )
    return ExponentReport(
        xi_coh=xi_coh,
        xi_q=xi_q,
        alpha_star=alpha_star,
        advantage_q=xi_q / xi_coh,
        q_emp=1.0 + 1.0 / mu,
        r_used=r_used,
    )
