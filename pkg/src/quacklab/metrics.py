"""The judge's learning statistics in the truth-telling benchmark equilibrium.

After the messages arrive, the judge's posterior on the state has at most two
support points: the consistent messages.  She learns the state exactly when
the quack's message is inconsistent (or coincides with the truth), which
happens with probability one minus the quack's average consistency
probability:

    learn_probability(eps) = 1 - (eps - eps^2/3).

The published statement of this quantity (1 - eps^2/3) disagrees with the
integral it is derived from; this module ships the value certified by the
Monte Carlo oracle and co-reports the published constant in
``paper_stated`` fields rather than silently correcting it.  The same
applies to the conditional version, where only an 8*eps denominator in the
tail correction aggregates back to the unconditional value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DegenerateInputError,
    DomainError,
    STREAM_NOISE,
    STREAM_QUACK,
    STREAM_STATE,
    is_consistent,
    substream,
)

__all__ = [
    "PosteriorSummary",
    "posterior",
    "learn_probability",
    "learn_probability_paper_stated",
    "learn_probability_conditional",
    "learn_probability_conditional_paper_stated",
    "variance_reduction",
    "learning_summary",
    "mc_learning_estimates",
]


@dataclass(frozen=True)
class PosteriorSummary:
    """Two-point posterior over the state: support, weights, and learned flag."""

    support: tuple
    weights: tuple
    learned: bool


def posterior(s: float, m1: float, m2: float, eps: float) -> PosteriorSummary:
    """Judge's posterior on the state in the uniform benchmark equilibrium.

    Consistent messages form the support with equal weights; a single
    consistent message (or two equal ones) means the state is learned.  Two
    inconsistent messages are off the equilibrium path.
    """
    c1 = is_consistent(m1, s, eps)
    c2 = is_consistent(m2, s, eps)
    if not c1 and not c2:
        raise DegenerateInputError("no consistent message: off the equilibrium path")
    if c1 and c2:
        if m1 == m2:
            return PosteriorSummary(support=(m1,), weights=(1.0,), learned=True)
        return PosteriorSummary(support=(m1, m2), weights=(0.5, 0.5), learned=False)
    m = m1 if c1 else m2
    return PosteriorSummary(support=(m,), weights=(1.0,), learned=True)


def _check_eps(eps: float, closed_low: bool = False) -> float:
    eps = float(eps)
    lo_ok = eps >= 0.0 if closed_low else eps > 0.0
    if not (lo_ok and eps <= 1.0):
        raise DomainError("eps must be in (0, 1]")
    return eps


def learn_probability(eps: float) -> float:
    """Probability the judge learns the state: 1 - (eps - eps^2/3)."""
    eps = _check_eps(eps)
    return 1.0 - (eps - eps * eps / 3.0)


def learn_probability_paper_stated(eps: float) -> float:
    """The published constant (1 - eps^2/3), kept for transparency."""
    eps = _check_eps(eps)
    return 1.0 - eps * eps / 3.0


def learn_probability_conditional(omega_hat: np.ndarray | float, eps: float) -> np.ndarray | float:
    """Probability of learning the state conditional on its realization.

    1 - eps on the moderate range |omega| <= 1 - 2 eps, with a quadratic tail
    boost (|omega| - (1 - 2 eps))^2 / (8 eps); when eps > 1/2 and
    |omega| < 2 eps - 1 both edges of the signal window leave the state
    space and the exact value is (1 + omega^2) / (4 eps).  Only this version
    aggregates to :func:`learn_probability`.
    """
    eps = _check_eps(eps)
    a = np.abs(np.asarray(omega_hat, dtype=float))
    if np.any(a > 1.0 + 1e-12):
        raise DomainError("state must lie in [-1, 1]")
    tail = np.maximum(0.0, a - (1.0 - 2.0 * eps)) ** 2 / (8.0 * eps)
    single = 1.0 - eps + tail
    both = (1.0 + a * a) / (4.0 * eps)
    out = np.where(a < 2.0 * eps - 1.0, both, single)
    return out if out.ndim else float(out)


def learn_probability_conditional_paper_stated(
    omega_hat: np.ndarray | float, eps: float
) -> np.ndarray | float:
    """Published display with the 4*eps tail denominator, kept for transparency."""
    eps = _check_eps(eps)
    a = np.abs(np.asarray(omega_hat, dtype=float))
    out = 1.0 - eps + np.maximum(0.0, a - (1.0 - 2.0 * eps)) ** 2 / (4.0 * eps)
    return out if out.ndim else float(out)


def variance_reduction(eps: float) -> float:
    """Expected drop in posterior variance from hearing the two speakers."""
    eps = _check_eps(eps, closed_low=True)
    return eps**2 / 3.0 - eps**3 / 3.0 + eps**4 / 10.0


def learning_summary(eps: float) -> dict:
    """All learning formulas at one eps, published variants included."""
    return {
        "eps": float(eps),
        "learn_prob": learn_probability(eps),
        "learn_prob_paper_stated": learn_probability_paper_stated(eps),
        "var_reduction": variance_reduction(eps),
    }


def mc_learning_estimates(eps: float, rounds: int, seed: int, batches: int = 100) -> dict:
    """Monte Carlo oracle for the learning metrics (truthful-expert benchmark).

    Per round: the judge learns iff the quack's message is inconsistent; the
    per-round variance drop uses the exact interval/two-point posterior
    variances (window^2/12 before messages; 0 if learned, (m_E - m_Q)^2/4 if
    both consistent).
    """
    eps = _check_eps(eps)
    batches = min(batches, rounds)
    per = [rounds // batches + (1 if b < rounds % batches else 0) for b in range(batches)]
    learn_b = np.empty(batches)
    var_b = np.empty(batches)
    for b, nb in enumerate(per):
        omega = substream(seed, STREAM_STATE, b).uniform(-1.0, 1.0, size=nb)
        s = omega + substream(seed, STREAM_NOISE, b).uniform(-eps, eps, size=nb)
        m_q = substream(seed, STREAM_QUACK, b).uniform(-1.0, 1.0, size=nb)
        consistent = np.abs(m_q - s) <= eps
        learn_b[b] = 1.0 - consistent.mean()
        window = np.minimum(s + eps, 1.0) - np.maximum(s - eps, -1.0)
        var_before = window**2 / 12.0
        var_after = np.where(consistent, (omega - m_q) ** 2 / 4.0, 0.0)
        var_b[b] = (var_before - var_after).mean()
    out = {
        "learn_freq": float(learn_b.mean()),
        "learn_freq_se": float(learn_b.std(ddof=1) / np.sqrt(batches)) if batches > 1 else 0.0,
        "var_reduction": float(var_b.mean()),
        "var_reduction_se": float(var_b.std(ddof=1) / np.sqrt(batches)) if batches > 1 else 0.0,
        "rounds": rounds,
        "seed": seed,
    }
    return out
