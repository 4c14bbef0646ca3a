"""Seeded Monte Carlo simulator and quadrature evaluators for best responses.

The simulator plays the uniform-noise benchmark game round by round: draw an
expert identity, a state, a signal, messages from a strategy profile, and
resolve the judge's choice through a selection rule.  Quadrature twins of the
same payoffs (quack indifference, expert deviation values) provide the
deterministic oracle the Monte Carlo estimates are checked against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    DomainError,
    GameConfig,
    PriorSpec,
    STREAM_IDENTITY,
    STREAM_NOISE,
    STREAM_OFFPATH,
    STREAM_QUACK,
    STREAM_STATE,
    STREAM_TIE,
    substream,
)
from .rules import KIND_CONTINUOUS_EPS1, KIND_MIN, PiecewiseRule, _pl_cumulative

__all__ = [
    "ExpertStrategy",
    "QuackStrategy",
    "StrategyProfile",
    "SimulationReport",
    "simulate",
    "quack_message_payoff",
    "mc_quack_message_payoff",
    "expert_deviation_payoff",
    "best_response_scan",
]


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpertStrategy:
    """Expert reporting rule: truthful, a fixed map, or a tabulated map."""

    kind: str = "truthful"  # "truthful" | "fixed_deviation" | "tabulated"
    deviation_map: Optional[Callable[[np.ndarray], np.ndarray]] = None
    omega_grid: Optional[np.ndarray] = None
    message_grid: Optional[np.ndarray] = None

    @staticmethod
    def truthful() -> "ExpertStrategy":
        return ExpertStrategy(kind="truthful")

    @staticmethod
    def fixed_deviation(fn: Callable[[np.ndarray], np.ndarray]) -> "ExpertStrategy":
        return ExpertStrategy(kind="fixed_deviation", deviation_map=fn)

    @staticmethod
    def tabulated(omega_grid: np.ndarray, message_grid: np.ndarray) -> "ExpertStrategy":
        return ExpertStrategy(
            kind="tabulated",
            omega_grid=np.asarray(omega_grid, float),
            message_grid=np.asarray(message_grid, float),
        )

    def message(self, omega: np.ndarray) -> np.ndarray:
        if self.kind == "truthful":
            return omega
        if self.kind == "fixed_deviation":
            return np.clip(self.deviation_map(omega), -1.0, 1.0)
        return np.interp(omega, self.omega_grid, self.message_grid)

    def to_json_dict(self) -> dict:
        if self.kind == "tabulated":
            return {
                "kind": "tabulated",
                "omega": self.omega_grid.tolist(),
                "m": self.message_grid.tolist(),
            }
        if self.kind == "fixed_deviation":
            raise DomainError("fixed_deviation strategies are in-process only; tabulate them")
        return {"kind": "truthful"}

    @staticmethod
    def from_json_dict(d: dict) -> "ExpertStrategy":
        if d["kind"] == "truthful":
            return ExpertStrategy.truthful()
        if d["kind"] == "tabulated":
            return ExpertStrategy.tabulated(d["omega"], d["m"])
        raise DomainError(f"unknown expert strategy {d['kind']!r}")


@dataclass(frozen=True)
class QuackStrategy:
    """Quack message distribution: uniform, truncated prior, or a density table."""

    kind: str = "uniform"  # "uniform" | "truncated_prior" | "density_table"
    half_width: float = 1.0
    m_bar: float = 1.0
    m_grid: Optional[np.ndarray] = None
    density_grid: Optional[np.ndarray] = None
    _cdf: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @staticmethod
    def uniform(half_width: float = 1.0) -> "QuackStrategy":
        if not 0.0 < half_width <= 1.0:
            raise DomainError("uniform quack support must be (0, 1]")
        return QuackStrategy(kind="uniform", half_width=float(half_width))

    @staticmethod
    def truncated_prior(m_bar: float) -> "QuackStrategy":
        if not 0.0 < m_bar <= 1.0:
            raise DomainError("m_bar must be in (0, 1]")
        return QuackStrategy(kind="truncated_prior", m_bar=float(m_bar))

    @staticmethod
    def density_table(m_grid, density_grid) -> "QuackStrategy":
        m_grid = np.asarray(m_grid, float)
        density_grid = np.maximum(np.asarray(density_grid, float), 0.0)
        total = np.trapezoid(density_grid, m_grid)
        if abs(total - 1.0) > 1e-8:
            raise DomainError(f"quack density integrates to {total}, not 1")
        cdf = _pl_cumulative(m_grid, density_grid)
        cdf /= cdf[-1]
        return QuackStrategy(
            kind="density_table", m_grid=m_grid, density_grid=density_grid, _cdf=cdf
        )

    def sample(self, gen: np.random.Generator, n: int, prior: PriorSpec) -> np.ndarray:
        if self.kind == "uniform":
            return gen.uniform(-self.half_width, self.half_width, size=n)
        if self.kind == "truncated_prior":
            lo = float(prior.cdf(-self.m_bar))  # also materializes the cdf table
            hi = float(prior.cdf(self.m_bar))
            u = gen.uniform(lo, hi, size=n)
            if prior.kind == "uniform":
                return 2.0 * u - 1.0
            return np.interp(u, prior._cdf_grid, prior.grid)
        u = gen.uniform(0.0, 1.0, size=n)
        return np.interp(u, self._cdf, self.m_grid)

    def to_json_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "half_width": self.half_width}
        if self.kind == "truncated_prior":
            return {"kind": "truncated_prior", "m_bar": self.m_bar}
        return {
            "kind": "density_table",
            "m": self.m_grid.tolist(),
            "f": self.density_grid.tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "QuackStrategy":
        if d["kind"] == "uniform":
            return QuackStrategy.uniform(d.get("half_width", 1.0))
        if d["kind"] == "truncated_prior":
            return QuackStrategy.truncated_prior(d["m_bar"])
        if d["kind"] == "density_table":
            return QuackStrategy.density_table(d["m"], d["f"])
        raise DomainError(f"unknown quack strategy {d['kind']!r}")


@dataclass
class StrategyProfile:
    expert: ExpertStrategy
    quack: QuackStrategy
    judge: PiecewiseRule
    off_path: str = "coin"  # judge's policy when both messages are inconsistent

    def to_json_dict(self) -> dict:
        return {
            "expert": self.expert.to_json_dict(),
            "quack": self.quack.to_json_dict(),
            "judge": self.judge.to_json_dict(),
            "off_path": self.off_path,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "StrategyProfile":
        return StrategyProfile(
            expert=ExpertStrategy.from_json_dict(d["expert"]),
            quack=QuackStrategy.from_json_dict(d["quack"]),
            judge=PiecewiseRule.from_json_dict(d["judge"]),
            off_path=d.get("off_path", "coin"),
        )

    @staticmethod
    def load(path: str) -> "StrategyProfile":
        with open(path) as fh:
            return StrategyProfile.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass
class SimulationReport:
    rounds: int
    seed: int
    judge_accuracy: float
    judge_accuracy_se: float
    quack_win_rate: float
    quack_win_rate_se: float
    learn_state_freq: float
    learn_state_freq_se: float
    per_message_payoff: list  # rows (m_center, payoff, stderr)

    def to_json_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "seed": self.seed,
            "judge_accuracy": self.judge_accuracy,
            "judge_accuracy_se": self.judge_accuracy_se,
            "quack_win_rate": self.quack_win_rate,
            "quack_win_rate_se": self.quack_win_rate_se,
            "learn_state_freq": self.learn_state_freq,
            "learn_state_freq_se": self.learn_state_freq_se,
            "per_message_payoff": self.per_message_payoff,
        }

    def payoff_table_csv(self) -> str:
        lines = ["m,payoff,stderr"]
        for m, p, se in self.per_message_payoff:
            lines.append(f"{m!r},{p!r},{se!r}")
        return "\n".join(lines) + "\n"


def _resolve_round(
    profile: StrategyProfile,
    eps: float,
    m1: np.ndarray,
    m2: np.ndarray,
    s: np.ndarray,
    tie_u: np.ndarray,
    off_u: np.ndarray,
) -> np.ndarray:
    """Vectorized judge decision; returns True where speaker 1 wins."""
    c1 = np.abs(m1 - s) <= eps
    c2 = np.abs(m2 - s) <= eps
    p1_win = profile.judge.pick_prob_speaker1(m1, m2)
    if profile.off_path == "speaker1":
        off1 = np.ones_like(off_u, dtype=bool)
    elif profile.off_path == "speaker2":
        off1 = np.zeros_like(off_u, dtype=bool)
    else:
        off1 = off_u < 0.5
    both = c1 & c2
    neither = ~c1 & ~c2
    return np.where(both, tie_u < p1_win, np.where(neither, off1, c1))


def simulate(
    config: GameConfig,
    profile: StrategyProfile,
    rounds: int,
    seed: int,
    batches: int = 100,
    message_bins: int = 21,
) -> SimulationReport:
    """Play the benchmark game for `rounds` rounds; deterministic in `seed`.

    Rounds are split into `batches` shards, each drawing from its own labeled
    substreams, so the result is independent of execution order and standard
    errors come from batch means.
    """
    if rounds < 1:
        raise DomainError("rounds must be >= 1")
    if config.noise.kind != "uniform":
        raise DomainError("simulate() is defined for the uniform-noise benchmark")
    eps = config.epsilon_bar
    batches = min(batches, rounds)
    per = [rounds // batches + (1 if b < rounds % batches else 0) for b in range(batches)]

    acc_batch = np.empty(batches)
    learn_batch = np.empty(batches)
    bin_edges = np.linspace(0.0, 1.0, message_bins + 1)
    bin_wins = np.zeros(message_bins)
    bin_counts = np.zeros(message_bins)

    for b, nb in enumerate(per):
        sp1_expert = substream(seed, STREAM_IDENTITY, b).uniform(size=nb) < config.p1
        omega = config.prior.sample(substream(seed, STREAM_STATE, b), nb)
        noise = config.noise.sample(substream(seed, STREAM_NOISE, b), nb)
        s = omega + noise
        m_e = profile.expert.message(omega)
        m_q = profile.quack.sample(substream(seed, STREAM_QUACK, b), nb, config.prior)
        tie_u = substream(seed, STREAM_TIE, b).uniform(size=nb)
        off_u = substream(seed, STREAM_OFFPATH, b).uniform(size=nb)

        m1 = np.where(sp1_expert, m_e, m_q)
        m2 = np.where(sp1_expert, m_q, m_e)
        win1 = _resolve_round(profile, eps, m1, m2, s, tie_u, off_u)
        correct = win1 == sp1_expert

        c_e = np.abs(m_e - s) <= eps
        c_q = np.abs(m_q - s) <= eps
        learned = (c_e ^ c_q) | (c_e & c_q & (m_e == m_q))

        acc_batch[b] = correct.mean()
        learn_batch[b] = learned.mean()
        idx = np.minimum((np.abs(m_q) * message_bins).astype(int), message_bins - 1)
        np.add.at(bin_counts, idx, 1.0)
        np.add.at(bin_wins, idx, (~correct).astype(float))

    acc = float(acc_batch.mean())
    acc_se = float(acc_batch.std(ddof=1) / np.sqrt(batches)) if batches > 1 else 0.0
    learn = float(learn_batch.mean())
    learn_se = float(learn_batch.std(ddof=1) / np.sqrt(batches)) if batches > 1 else 0.0
    table = []
    for j in range(message_bins):
        if bin_counts[j] > 0:
            p = bin_wins[j] / bin_counts[j]
            se = float(np.sqrt(max(p * (1.0 - p), 1e-12) / bin_counts[j]))
            table.append((float( 0.5 * (bin_edges[j] + bin_edges[j + 1])), float(p), se))
    return SimulationReport(
        rounds=rounds,
        seed=seed,
        judge_accuracy=acc,
        judge_accuracy_se=acc_se,
        quack_win_rate=1.0 - acc,
        quack_win_rate_se=acc_se,
        learn_state_freq=learn,
        learn_state_freq_se=learn_se,
        per_message_payoff=table,
    )


# ---------------------------------------------------------------------------
# Quadrature payoffs
# ---------------------------------------------------------------------------


def _split_simpson(fn, breakpoints, total_panels: int) -> float:
    """Composite Simpson between sorted breakpoints (vectorized integrand)."""
    pts = np.unique(np.asarray(breakpoints, float))
    total = 0.0
    span = pts[-1] - pts[0]
    if span <= 0.0:
        return 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= 1e-15:
            continue
        n = max(8, int(np.ceil(total_panels * (b - a) / span / 2.0)) * 2)
        grid = np.linspace(a, b, n + 1)
        # segment ends sit on breakpoints, where integrands may carry
        # measure-zero tie conventions; evaluate one-sided limits instead
        grid[0] += 1e-12 * (b - a)
        grid[-1] -= 1e-12 * (b - a)
        vals = fn(grid)
        total += (b - a) / n / 3.0 * (
            vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-2:2].sum()
        )
    return float(total)


def quack_message_payoff(
    rule: PiecewiseRule,
    m: float,
    method: str = "quadrature",
    samples: int = 10**6,
    seed: int = 0,
    panels: int = 2048,
) -> float:
    """Expected probability the quack is selected with message m (truthful expert)."""
    if abs(m) > 1.0:
        raise DomainError("message must lie in [-1, 1]")
    if method == "mc":
        return mc_quack_message_payoff(rule, m, samples, seed)[0]
    eps = rule.epsilon_bar
    a = abs(float(m))

    def integrand(omega: np.ndarray) -> np.ndarray:
        w = np.maximum(0.0, 1.0 - np.abs(m - omega) / (2.0 * eps))
        return 0.5 * w * rule.pick_prob_speaker1(np.full_like(omega, m), omega)

    brk = [-1.0, 1.0, m - 2.0 * eps, m + 2.0 * eps, a, -a]
    if "m_bar" in rule.flags:
        brk += [rule.flags["m_bar"], -rule.flags["m_bar"]]
    brk = [b for b in brk if -1.0 <= b <= 1.0] + [-1.0, 1.0]
    return _split_simpson(integrand, brk, panels)


def mc_quack_message_payoff(
    rule: PiecewiseRule, m: float, samples: int = 10**6, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo twin of :func:`quack_message_payoff`; returns (mean, stderr)."""
    if samples < 10**6:
        samples = 10**6
    eps = rule.epsilon_bar
    omega = substream(seed, STREAM_STATE).uniform(-1.0, 1.0, size=samples)
    s = omega + substream(seed, STREAM_NOISE).uniform(-eps, eps, size=samples)
    tie = substream(seed, STREAM_TIE).uniform(size=samples)
    consistent = np.abs(m - s) <= eps
    win = consistent & (tie < rule.pick_prob_speaker1(np.full_like(omega, m), omega))
    p = float(win.mean())
    return p, float(np.sqrt(max(p * (1.0 - p), 1e-12) / samples))


# ---------------------------------------------------------------------------
# Expert deviation values
# ---------------------------------------------------------------------------


class _RuleIntegrals:
    """Closed-form inner integrals of a rule's pick probability over windows.

    ``expected_pick(m, lo, hi)`` is the integral over m' in [lo, hi] of the
    probability the m-sender is picked against a consistent m', times the
    opposing density 1/2.  The outer/inner split around |m'| = |m| folds onto
    [0, 1] and uses exact cumulatives of the stored piecewise-linear tables.
    """

    def __init__(self, rule: PiecewiseRule):
        self.rule = rule
        self.x = rule.grid_m
        self.psi_cum = _pl_cumulative(self.x, 1.0 - rule.grid_phi)
        self.phi_cum = _pl_cumulative(self.x, rule.grid_phi)

    def _seg(self, cum: np.ndarray, lo, hi):
        return np.interp(hi, self.x, cum) - np.interp(lo, self.x, cum)

    def expected_pick(self, m, lo, hi):
        m = np.asarray(m, float)
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        a = np.abs(m)
        inner_len = np.maximum(0.0, np.minimum(hi, a) - np.maximum(lo, -a))
        # fold m' > a and m' < -a onto magnitude segments [pos_lo, pos_hi], ...
        pos_lo, pos_hi = np.maximum(lo, a), np.maximum(hi, a)
        neg_lo, neg_hi = np.maximum(-hi, a), np.maximum(-lo, a)
        if self.rule.kind == KIND_MIN:
            outer_len = (pos_hi - pos_lo) + (neg_hi - neg_lo)
            phi_inner = self._fold_inner_phi(lo, hi, a)
            win_inner = inner_len - phi_inner  # opponent moderate: m-sender gets 1 - phi
            return 0.5 * (np.interp(a, self.x, self.rule.grid_phi) * outer_len + win_inner)
        if self.rule.kind == KIND_CONTINUOUS_EPS1:
            return _continuous_expected_pick(a, lo, hi)
        # max-style: m-sender extreme inside, opponent extreme outside
        outer = self._seg(self.psi_cum, pos_lo, pos_hi) + self._seg(self.psi_cum, neg_lo, neg_hi)
        return 0.5 * (np.interp(a, self.x, self.rule.grid_phi) * inner_len + outer)

    def _fold_inner_phi(self, lo, hi, a):
        # integral of phi(|m'|) over the |m'| < a part of [lo, hi]
        lo_c = np.minimum(np.maximum(lo, -a), np.minimum(hi, a))
        hi_c = np.minimum(hi, a)
        pos = self._seg(self.phi_cum, np.maximum(lo_c, 0.0), np.maximum(hi_c, 0.0))
        neg = self._seg(self.phi_cum, np.maximum(-hi_c, 0.0), np.maximum(-lo_c, 0.0))
        return pos + neg


def _continuous_expected_pick(a, lo, hi):
    """Window integral of the eps = 1 continuous rule's pick probability."""

    def f_inner(x):  # antiderivative of 1/2 + (a^2 - x^2)/(4 (2 - a)) in x
        return 0.5 * x + (a * a * x - x**3 / 3.0) / (4.0 * (2.0 - a))

    def f_outer(x):  # antiderivative of 1/2 - (x^2 - a^2)/(4 (2 - x)), x = |m'| >= 0
        poly = -0.5 * x * x - 2.0 * x - (4.0 - a * a) * np.log(2.0 - x)
        return 0.5 * x - 0.25 * poly

    lo_c = np.minimum(np.maximum(lo, -a), np.minimum(hi, a))
    hi_c = np.maximum(np.minimum(hi, a), lo_c)
    inner = f_inner(hi_c) - f_inner(lo_c)
    pos_lo, pos_hi = np.maximum(lo, a), np.maximum(hi, a)
    neg_lo, neg_hi = np.maximum(-hi, a), np.maximum(-lo, a)
    outer = (f_outer(pos_hi) - f_outer(pos_lo)) + (f_outer(neg_hi) - f_outer(neg_lo))
    return 0.5 * (inner + outer)


def expert_deviation_payoff(
    rule: PiecewiseRule,
    omega: float,
    m: float,
    alpha_policy: str = "adversarial1",
    s_panels: int = 2048,
) -> float:
    """Expert's selection probability from reporting m at true state omega.

    Quadrature over the signal and the opposing uniform message: off-path
    (both inconsistent) events award the expert ``alpha`` (1 under the
    adversarial policy, 1/2 under "coin"); sole-consistency awards 1; shared
    consistency goes through the rule.
    """
    vals = _deviation_payoffs(rule, float(omega), np.asarray([m], float), alpha_policy, s_panels)
    return float(vals[0])


def _lambda_integral(omega: float, eps: float) -> float:
    """Exact integral of the opposing-message consistency probability.

    Lambda(s) = (min(s+eps, 1) - max(s-eps, -1)) / 2 is piecewise linear in
    s with kinks at +-(1 - eps), so the trapezoid rule between kinks is
    exact over the signal support [omega - eps, omega + eps].
    """

    def lam(s: float) -> float:
        return 0.5 * (min(s + eps, 1.0) - max(s - eps, -1.0))

    pts = np.unique(np.clip([omega - eps, omega + eps, 1.0 - eps, -(1.0 - eps)],
                            omega - eps, omega + eps))
    return float(sum(0.5 * (b - a) * (lam(a) + lam(b)) for a, b in zip(pts[:-1], pts[1:])))


def _deviation_payoffs(
    rule: PiecewiseRule,
    omega: float,
    m_arr: np.ndarray,
    alpha_policy: str,
    s_panels: int,
) -> np.ndarray:
    """V_E(m, omega) for a batch of messages (vectorized over m).

    Split as  alpha * integral(1 - Lambda)  over the whole signal support
    plus  integral over the m-consistency window of
    (1 - alpha) (1 - Lambda) + I_rho(s, m),  which keeps the consistency
    jump out of the quadrature (the window bounds are exact).
    """
    eps = rule.epsilon_bar
    alpha = 1.0 if alpha_policy == "adversarial1" else 0.5
    integ = _RuleIntegrals(rule)
    base = alpha * (1.0 - _lambda_integral(omega, eps) / (2.0 * eps))

    lo = np.maximum(omega - eps, m_arr - eps)
    hi = np.minimum(omega + eps, m_arr + eps)
    width = hi - lo
    n = max(64, int(s_panels) // 2 * 2)
    t = np.linspace(0.0, 1.0, n + 1)
    s = lo[:, None] + width[:, None] * t[None, :]
    w_lo = np.maximum(s - eps, -1.0)
    w_hi = np.minimum(s + eps, 1.0)
    lam = 0.5 * (w_hi - w_lo)
    vals = (1.0 - alpha) * (1.0 - lam) + integ.expected_pick(
        np.broadcast_to(m_arr[:, None], s.shape), w_lo, w_hi
    )
    simp = np.ones(n + 1)
    simp[1:-1:2] = 4.0
    simp[2:-2:2] = 2.0
    window = (vals * simp[None, :]).sum(axis=1) * (width / n / 3.0) / (2.0 * eps)
    return base + np.where(width > 0.0, window, 0.0)


def best_response_scan(
    rule: PiecewiseRule,
    strategy_side: str,
    grid_n: int = 201,
    m_grid_n: int = 401,
    alpha_policy: str = "adversarial1",
    s_panels: int = 2048,
) -> float:
    """Certify equilibrium play on a finite grid.

    Expert side: max over (omega, m) of V_E(m, omega) - V_E(omega, omega)
    with the adversarial off-path award; nonpositive regret certifies
    truth-telling.  Quack side: max - min of the quadrature message payoff
    over the message grid; a near-zero spread certifies indifference.
    """
    if grid_n < 101:
        raise DomainError("grid_n must be >= 101")
    if strategy_side == "quack":
        grid = np.linspace(0.0, 1.0, grid_n)
        vals = np.array([quack_message_payoff(rule, m) for m in grid])
        return float(vals.max() - vals.min())
    if strategy_side != "expert":
        raise DomainError("strategy_side must be 'expert' or 'quack'")
    eps = rule.epsilon_bar
    # the game is symmetric under (m, omega) -> (-m, -omega); scan omega >= 0
    omegas = np.linspace(0.0, 1.0, (grid_n + 1) // 2)
    base_m = np.linspace(-1.0, 1.0, m_grid_n)
    worst = -np.inf
    for omega in omegas:
        offsets = omega + np.array(
            [-2.0 * eps, -eps / 10, -eps / 100, eps / 100, eps / 10, 2.0 * eps, 2.5 * eps, -2.5 * eps]
        )
        m_arr = np.clip(np.concatenate([base_m, offsets]), -1.0, 1.0)
        vals = _deviation_payoffs(rule, float(omega), m_arr, alpha_policy, s_panels)
        truth = _deviation_payoffs(rule, float(omega), np.asarray([omega]), alpha_policy, s_panels)[0]
        regret = float(vals.max() - truth)
        if regret > worst:
            worst = regret
    return worst
