"""Game-form variants: asymmetric identity priors, sequential talk, one speaker.

Asymmetric identities: when the judge thinks speaker 1 is the expert with
probability p1 > 1/2, the speaker-1 quack pools on [-m_bar, m_bar] with
m_bar = p2/p1 (clipped at 1 - 2 eps), which is exactly what keeps the judge
indifferent between two consistent moderate messages.  The tie-break is a
paired max-style rule in which speaker 1's magnitude gets a head start of
1 - m_bar in the extremeness comparison.

Sequential ("polite") talk: the judge picks the first speaker iff his message
is consistent; the first-speaking quack pools on the always-plateau messages
and earns eps/2 per identity, strictly more than the simultaneous value.

One speaker vs outside option: regimes split by V = (1-q)(1-U)/(q U)
against eps; low outside options give truncated-uniform pandering to the
mean ("lemon dropping"), high ones a density rising toward extreme messages
("cherry picking") pinned by 1/eps - 1/V = 2 z - 2 atanh(z).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .core import (
    ConstructionError,
    DomainError,
    STREAM_IDENTITY,
    STREAM_NOISE,
    STREAM_ORDER,
    STREAM_QUACK,
    STREAM_STATE,
    STREAM_TIE,
    signal_cdf,
    signal_cdf_inv,
    substream,
)
from .rules import _hat_coeff, integrate_pl, quack_value

__all__ = [
    "IdentityEquilibrium",
    "IdentityRulePair",
    "identity_equilibrium",
    "identity_rule_pair",
    "identity_quack_payoff",
    "simulate_identity",
    "SequentialReport",
    "sequential_equilibrium",
    "simulate_sequential",
    "OneSpeakerEquilibrium",
    "one_speaker_equilibrium",
]


# ---------------------------------------------------------------------------
# Asymmetric identity priors
# ---------------------------------------------------------------------------


@dataclass
class IdentityRulePair:
    """Paired tie-break tables for the identity game.

    Speaker 1's message counts as the more extreme one when
    |m1| + (1 - m_bar) > |m2|; the winner-side probabilities phi1/phi2 are
    keyed on the extreme speaker's identity.  Speaker 1 wins outright when
    his message is outside [-m_bar, m_bar] (his quack version never sends
    those).
    """

    epsilon_bar: float
    m_bar: float
    grid1_m: np.ndarray
    grid1_phi: np.ndarray
    grid2_m: np.ndarray
    grid2_phi: np.ndarray
    feasible: bool = True
    max_excursion: float = 0.0

    @property
    def delta(self) -> float:
        return 1.0 - self.m_bar

    def phi1(self, m) -> np.ndarray | float:
        out = np.interp(np.abs(np.asarray(m, float)), self.grid1_m, self.grid1_phi)
        return out if out.ndim else float(out)

    def phi2(self, m) -> np.ndarray | float:
        out = np.interp(np.abs(np.asarray(m, float)), self.grid2_m, self.grid2_phi)
        return out if out.ndim else float(out)

    def pick_prob_speaker1(self, m1, m2) -> np.ndarray | float:
        a1 = np.abs(np.asarray(m1, float))
        a2 = np.abs(np.asarray(m2, float))
        a1, a2 = np.broadcast_arrays(a1, a2)
        sp1_higher = a1 + self.delta > a2
        p = np.where(
            sp1_higher,
            np.interp(a1, self.grid1_m, self.grid1_phi),
            1.0 - np.interp(a2, self.grid2_m, self.grid2_phi),
        )
        out = np.where(a1 > self.m_bar, 1.0, p)
        return out if out.ndim else float(out)

    def to_json_dict(self) -> dict:
        return {
            "kind": "identity_pair",
            "epsilon_bar": self.epsilon_bar,
            "m_bar": self.m_bar,
            "grid1": [[float(a), float(b)] for a, b in zip(self.grid1_m, self.grid1_phi)],
            "grid2": [[float(a), float(b)] for a, b in zip(self.grid2_m, self.grid2_phi)],
            "feasible": self.feasible,
            "max_excursion": self.max_excursion,
        }


@dataclass
class IdentityEquilibrium:
    regime: str  # "moderate" | "extreme"
    p1: float
    epsilon_bar: float
    m_bar: float
    pi1: float
    pi2: float
    judge_loss: float
    judge_loss_doubled_closed_form: float
    pi1_strict: float
    pi2_strict: float
    rule_pair: Optional[IdentityRulePair] = None

    def to_json_dict(self) -> dict:
        return {
            "regime": self.regime,
            "p1": self.p1,
            "epsilon_bar": self.epsilon_bar,
            "m_bar": self.m_bar,
            "pi1": self.pi1,
            "pi2": self.pi2,
            "convention": "per_identity",
            "judge_loss": self.judge_loss,
            "judge_loss_doubled_closed_form": self.judge_loss_doubled_closed_form,
            "judge_loss_doubled_convention": "doubled",
            "pi1_strict": self.pi1_strict,
            "pi2_strict": self.pi2_strict,
            "rule_pair": self.rule_pair.to_json_dict() if self.rule_pair else None,
        }


def identity_equilibrium(
    p1: float, eps: float, build_pair: bool = False, grid_n: int = 4096, strict_pair: bool = False
) -> IdentityEquilibrium:
    """Equilibrium objects for prior identity beliefs p1 > 1/2.

    The regime is moderate iff p1 <= 1/(2 - 2 eps).  ``pi1``/``pi2`` carry
    the closed forms Pi1 = (eps - (m_bar - (1-2 eps))^3 / (24 m_bar eps))/2
    and Pi2 = m_bar * Pi1 with m_bar clipped into [1-2 eps, 1]; they are the
    equilibrium payoffs in the moderate regime and extend continuously across
    the boundary.  In the extreme regime the judge strictly prefers speaker 1
    whenever consistent, so the literal payoffs jump to (eps, 0); those are
    reported as ``pi1_strict``/``pi2_strict``.
    """
    p1 = float(p1)
    eps = float(eps)
    if not 0.5 < p1 < 1.0:
        raise DomainError("p1 must be in (1/2, 1)")
    if not 0.0 < eps < 0.5:
        raise DomainError("identity equilibrium construction requires eps in (0, 1/2)")
    p2 = 1.0 - p1
    regime = "moderate" if p1 <= 1.0 / (2.0 - 2.0 * eps) else "extreme"
    m_bar = float(np.clip(p2 / p1, 1.0 - 2.0 * eps, 1.0))
    d = m_bar - (1.0 - 2.0 * eps)
    pi1 = 0.5 * (eps - d**3 / (24.0 * m_bar * eps))
    pi2 = m_bar * pi1
    loss = (1.0 - p1) * pi1 + p1 * pi2
    e = m_bar + 2.0 * eps - 1.0
    loss_doubled = (24.0 * eps**2 * (m_bar + 2.0 * eps) - e**3 - 48.0 * eps**3) / (
        12.0 * (m_bar + 1.0) * eps
    )
    if regime == "extreme":
        pi1_strict, pi2_strict = eps, 0.0
    else:
        pi1_strict, pi2_strict = pi1, pi2
    pair = identity_rule_pair(p1, eps, grid_n, strict=strict_pair) if build_pair else None
    return IdentityEquilibrium(
        regime=regime,
        p1=p1,
        epsilon_bar=eps,
        m_bar=m_bar,
        pi1=pi1,
        pi2=pi2,
        judge_loss=loss,
        judge_loss_doubled_closed_form=loss_doubled,
        pi1_strict=pi1_strict,
        pi2_strict=pi2_strict,
        rule_pair=pair,
    )


def _wsum_psi(
    xg: np.ndarray, psi: np.ndarray, eps: float, m: float, lo: float, hi: float
) -> float:
    """integral over x in [lo, hi] of the folded weight times psi-hat.

    The folded weight collects the two signs of the opposing message at
    magnitude x: (1 - |m - x|/(2 eps))^+ from +x and (1 - (m + x)/(2 eps))^+
    from -x.
    """
    inv2e = 0.5 / eps
    total = 0.0
    # +x side, below m
    a, b = max(lo, m - 2.0 * eps), min(hi, m)
    if b > a:
        total += integrate_pl(xg, psi, a, b, w0=1.0, ws=inv2e, wref=m)
    # +x side, above m
    a, b = max(lo, m), min(hi, m + 2.0 * eps)
    if b > a:
        total += integrate_pl(xg, psi, a, b, w0=1.0, ws=-inv2e, wref=m)
    # -x side
    a, b = max(lo, 0.0), min(hi, 2.0 * eps - m)
    if b > a:
        total += integrate_pl(xg, psi, a, b, w0=1.0 - m * inv2e, ws=-inv2e, wref=0.0)
    return total


def _wsum_mass(eps: float, m: float, lo: float, hi: float) -> float:
    """Same folded weight integrated against 1 (closed form)."""

    def lin(a: float, b: float, w0: float, ws: float, ref: float) -> float:
        if b <= a:
            return 0.0
        return (w0 - ws * ref) * (b - a) + ws * 0.5 * (b * b - a * a)

    inv2e = 0.5 / eps
    total = lin(max(lo, m - 2.0 * eps), min(hi, m), 1.0 - m * inv2e, inv2e, 0.0)
    total += lin(max(lo, m), min(hi, m + 2.0 * eps), 1.0 + m * inv2e, -inv2e, 0.0)
    total += lin(max(lo, 0.0), min(hi, 2.0 * eps - m), 1.0 - m * inv2e, -inv2e, 0.0)
    return total


def identity_rule_pair(
    p1: float, eps: float, grid_n: int = 4096, strict: bool = True
) -> IdentityRulePair:
    """Couple-march the paired indifference identities for the identity game.

    Descends levels y (speaker 2's magnitude) and x = y - (1 - m_bar)
    (speaker 1's) together, solving a 2x2 linear system per level because
    each identity's tail starts at the other table's current unknown.  The
    published construction is only self-consistent for mild asymmetry: the
    extreme-message identity for the dis-favored quack caps his payoff at
    (2 eps - delta)^2 / (8 eps), which falls below Pi2 once delta grows, so
    phi2 escapes [0, 1].  With ``strict`` the construction then fails; with
    ``strict=False`` the tables are clipped and flagged infeasible (the
    ex-ante payoffs are tie-break invariant, so clipped tables still
    reproduce Pi1/Pi2 in simulation).
    """
    eq = identity_equilibrium(p1, eps)
    if eq.regime != "moderate":
        raise DomainError("rule pair construction applies to the moderate regime")
    m_bar = eq.m_bar
    delta = 1.0 - m_bar
    two_pi1 = 2.0 * eq.pi1
    two_pi2 = 2.0 * eq.pi2
    n = max(int(grid_n), int(np.ceil(256.0 / eps)) + 1)
    h = 1.0 / n
    y_nodes = np.linspace(0.0, 1.0, n + 1)
    psi2 = np.zeros(n + 1)
    k1 = int(np.floor(m_bar / h + 1e-12))
    x1_desc = m_bar - h * np.arange(0, k1 + 1)
    x_nodes = x1_desc[::-1].copy()
    pad_zero = x_nodes[0] > 1e-12
    if pad_zero:
        x_nodes = np.concatenate(([0.0], x_nodes))
    psi1 = np.zeros_like(x_nodes)
    inv2e = 0.5 / eps

    # below this level the unknowns' coefficients vanish like x and the
    # pointwise identities amplify discretization error (the published
    # construction is only sketched there); both tables are extended flat
    x_freeze = max(24.0 * h, eps / 16.0)
    for j in range(n + 1):
        y = 1.0 - j * h
        iy = n - j  # index of y in y_nodes
        x = y - delta
        hi2 = min(m_bar, y + 2.0 * eps)
        lo2 = max(x, 0.0)
        c2 = _wsum_mass(eps, y, 0.0, max(x, 0.0))
        a2 = _wsum_psi(x_nodes, psi1, eps, y, lo2, hi2) if hi2 > lo2 else 0.0
        if x < x_freeze:
            psi2[iy] = psi2[iy + 1]
            ix = int(np.argmin(np.abs(x_nodes - max(x, 0.0))))
            if x >= -1e-12 and psi1[ix] == 0.0 and ix + 1 < len(psi1):
                psi1[ix] = psi1[ix + 1]
            continue
        ix = int(np.argmin(np.abs(x_nodes - x)))
        # unknown psi1(x) weight inside a2's first panel(s)
        b2 = 0.0
        if hi2 > x:
            b2 += _hat_coeff(h, min(h, hi2 - x), 1.0 - delta * inv2e, inv2e)
            r_hi = min(hi2, 2.0 * eps - y)
            if r_hi > x:
                b2 += _hat_coeff(h, min(h, r_hi - x), 1.0 - (y + x) * inv2e, -inv2e)
        hi1 = min(1.0, x + 2.0 * eps)
        lo1 = y
        c1 = _wsum_mass(eps, x, 0.0, min(x + delta, 1.0))
        a1 = _wsum_psi(y_nodes, psi2, eps, x, lo1, hi1) if hi1 > lo1 else 0.0
        b1 = 0.0
        if hi1 > y:
            b1 += _hat_coeff(h, min(h, hi1 - y), 1.0 - delta * inv2e, -inv2e)
            r_hi = min(hi1, 2.0 * eps - x)
            if r_hi > y:
                b1 += _hat_coeff(h, min(h, r_hi - y), 1.0 - (x + y) * inv2e, -inv2e)
        # [c2, -b2; -b1, c1] [psi2, psi1]^T = [c2 + a2 - 2 Pi2, c1 + a1 - 2 Pi1]
        det = c2 * c1 - b2 * b1
        r2 = c2 + a2 - two_pi2
        r1 = c1 + a1 - two_pi1
        psi2[iy] = (r2 * c1 + b2 * r1) / det
        psi1[ix] = (r1 * c2 + b1 * r2) / det
    if pad_zero:
        psi1[0] = psi1[1]
    phi1 = 1.0 - psi1
    phi2 = 1.0 - psi2
    excursion = max(
        float(np.max(phi1 - 1.0, initial=0.0)),
        float(np.max(-phi1, initial=0.0)),
        float(np.max(phi2 - 1.0, initial=0.0)),
        float(np.max(-phi2, initial=0.0)),
    )
    feasible = excursion <= 1e-6
    if strict and not feasible:
        raise ConstructionError(
            f"identity rule pair leaves [0,1] by {excursion:.3e}; the published "
            "construction is infeasible at this asymmetry"
        )
    return IdentityRulePair(
        epsilon_bar=eps,
        m_bar=m_bar,
        grid1_m=x_nodes,
        grid1_phi=np.clip(phi1, 0.0, 1.0),
        grid2_m=y_nodes,
        grid2_phi=np.clip(phi2, 0.0, 1.0),
        feasible=feasible,
        max_excursion=excursion,
    )


def identity_quack_payoff(pair: IdentityRulePair, speaker: int, m: float, panels: int = 4096) -> float:
    """Quadrature payoff of the speaker-`speaker` quack sending m (expert truthful)."""
    eps = pair.epsilon_bar
    m = abs(float(m))
    wg = np.linspace(-1.0, 1.0, panels + 1)
    wg[0] += 1e-12
    wg[-1] -= 1e-12
    weight = np.maximum(0.0, 1.0 - np.abs(m - wg) / (2.0 * eps))
    if speaker == 1:
        pick = pair.pick_prob_speaker1(np.full_like(wg, m), wg)
    else:
        pick = 1.0 - pair.pick_prob_speaker1(wg, np.full_like(wg, m))
        pick = np.where(np.abs(wg) > pair.m_bar, 0.0, pick)  # expert 1 extreme: he wins
    vals = 0.5 * weight * pick
    simp = np.ones(panels + 1)
    simp[1:-1:2] = 4.0
    simp[2:-2:2] = 2.0
    return float((2.0 / panels) / 3.0 * np.dot(simp, vals))


def simulate_identity(
    p1: float,
    eps: float,
    rounds: int,
    seed: int,
    pair: Optional[IdentityRulePair] = None,
    batches: int = 100,
) -> dict:
    """Monte Carlo payoffs of each quack identity under the asymmetric profile.

    The tie-break uses the supplied rule pair, falling back to a coin; the
    ex-ante mistake probabilities are invariant to the tie-break because the
    judge is posterior-indifferent whenever it is invoked.
    """
    eq = identity_equilibrium(p1, eps)
    m_bar = eq.m_bar
    batches = min(batches, rounds)
    per = [rounds // batches + (1 if b < rounds % batches else 0) for b in range(batches)]
    win1 = np.zeros(batches)  # quack-1 payoff estimate per batch
    win2 = np.zeros(batches)
    n1 = np.zeros(batches)
    n2 = np.zeros(batches)
    for b, nb in enumerate(per):
        sp1_expert = substream(seed, STREAM_IDENTITY, b).uniform(size=nb) < p1
        omega = substream(seed, STREAM_STATE, b).uniform(-1.0, 1.0, size=nb)
        s = omega + substream(seed, STREAM_NOISE, b).uniform(-eps, eps, size=nb)
        gen_q = substream(seed, STREAM_QUACK, b)
        mq_1 = gen_q.uniform(-m_bar, m_bar, size=nb)  # used when speaker 1 is the quack
        mq_2 = gen_q.uniform(-1.0, 1.0, size=nb)
        tie = substream(seed, STREAM_TIE, b).uniform(size=nb)
        m1 = np.where(sp1_expert, omega, mq_1)
        m2 = np.where(sp1_expert, mq_2, omega)
        c1 = np.abs(m1 - s) <= eps
        c2 = np.abs(m2 - s) <= eps
        if pair is not None:
            p1_win = pair.pick_prob_speaker1(m1, m2)
        else:
            p1_win = np.where(np.abs(m1) > m_bar, 1.0, 0.5)
        pick1 = np.where(c1 & c2, tie < p1_win, c1)
        quack_wins = np.where(sp1_expert, ~pick1, pick1)
        q1 = ~sp1_expert
        n1[b] = q1.sum()
        n2[b] = nb - n1[b]
        win1[b] = (quack_wins & q1).sum()
        win2[b] = (quack_wins & ~q1).sum()
    rate1 = win1.sum() / max(n1.sum(), 1.0)
    rate2 = win2.sum() / max(n2.sum(), 1.0)
    se1 = float(np.sqrt(max(rate1 * (1 - rate1), 1e-12) / max(n1.sum(), 1.0)))
    se2 = float(np.sqrt(max(rate2 * (1 - rate2), 1e-12) / max(n2.sum(), 1.0)))
    loss = (win1.sum() + win2.sum()) / rounds
    return {
        "pi1_hat": float(rate1),
        "pi1_se": se1,
        "pi2_hat": float(rate2),
        "pi2_se": se2,
        "judge_loss_hat": float(loss),
        "rounds": rounds,
        "seed": seed,
    }


# ---------------------------------------------------------------------------
# Sequential ("polite") talk
# ---------------------------------------------------------------------------


@dataclass
class SequentialReport:
    epsilon_bar: float
    quack_payoff_seq: float        # per-identity: eps/2
    quack_payoff_sim: float        # per-identity: eps/2 - eps^2/6
    quack_payoff_seq_doubled: float
    quack_payoff_sim_doubled: float
    judge_prefers_simultaneous: bool
    strategies: dict

    def to_json_dict(self) -> dict:
        return {
            "epsilon_bar": self.epsilon_bar,
            "quack_payoff_seq": self.quack_payoff_seq,
            "quack_payoff_sim": self.quack_payoff_sim,
            "convention": "per_identity",
            "quack_payoff_seq_doubled": self.quack_payoff_seq_doubled,
            "quack_payoff_sim_doubled": self.quack_payoff_sim_doubled,
            "doubled_convention": "doubled",
            "judge_prefers_simultaneous": self.judge_prefers_simultaneous,
            "strategies": self.strategies,
        }


def sequential_equilibrium(eps: float) -> SequentialReport:
    """Equilibrium of the publicly sequential game for eps < 1/4.

    First-speaking quack: uniform on the always-plateau window
    [-(1-2 eps), 1-2 eps]; second-speaking quack: uniform on the m1-centered
    consistency window; judge selects speaker 1 iff consistent.  His payoff
    is eps/2 per identity (eps doubled) against eps/2 - eps^2/6 simultaneous.
    """
    eps = float(eps)
    if not 0.0 < eps < 0.25:
        raise DomainError("the sequential construction assumes eps < 1/4")
    sim = quack_value(eps).per_identity_payoff
    seq = eps / 2.0
    strategies = {
        "expert": "truthful in either slot",
        "quack_first": {"kind": "uniform", "support": [-(1.0 - 2.0 * eps), 1.0 - 2.0 * eps]},
        "quack_second": {
            "kind": "uniform_window",
            "support": "[max(-1, m1 - 2 eps), min(1, m1 + 2 eps)]",
        },
        "judge": "select speaker 1 iff his message is consistent",
    }
    return SequentialReport(
        epsilon_bar=eps,
        quack_payoff_seq=seq,
        quack_payoff_sim=sim,
        quack_payoff_seq_doubled=2.0 * seq,
        quack_payoff_sim_doubled=2.0 * sim,
        judge_prefers_simultaneous=sim < seq,
        strategies=strategies,
    )


def simulate_sequential(eps: float, rounds: int, seed: int, batches: int = 100) -> dict:
    """Monte Carlo oracle of the sequential equilibrium.

    Tracks the quack's selection rate, the judge's accuracy, and the
    second-speaking quack's selection rate (exactly zero under the stated
    judge rule, since a first-speaking expert is always consistent).
    """
    eps = float(eps)
    batches = min(batches, rounds)
    per = [rounds // batches + (1 if b < rounds % batches else 0) for b in range(batches)]
    quack_win = np.empty(batches)
    second_quack_win = np.empty(batches)
    correct = np.empty(batches)
    for b, nb in enumerate(per):
        quack_first = substream(seed, STREAM_ORDER, b).uniform(size=nb) < 0.5
        omega = substream(seed, STREAM_STATE, b).uniform(-1.0, 1.0, size=nb)
        s = omega + substream(seed, STREAM_NOISE, b).uniform(-eps, eps, size=nb)
        mq_first = substream(seed, STREAM_QUACK, b).uniform(
            -(1.0 - 2.0 * eps), 1.0 - 2.0 * eps, size=nb
        )
        # the second-speaking quack's draw never affects outcomes: the judge
        # keys only on the first message's consistency
        m1 = np.where(quack_first, mq_first, omega)
        c1 = np.abs(m1 - s) <= eps
        pick1 = c1  # judge: first speaker iff consistent
        win_q = np.where(quack_first, pick1, ~pick1)
        quack_win[b] = win_q.mean()
        second_quack_win[b] = (~quack_first & ~pick1).sum() / max((~quack_first).sum(), 1)
        correct[b] = 1.0 - win_q.mean()
    return {
        "quack_win_rate": float(quack_win.mean()),
        "quack_win_se": float(quack_win.std(ddof=1) / np.sqrt(batches)),
        "judge_accuracy": float(correct.mean()),
        "second_quack_win_rate": float(second_quack_win.mean()),
        "rounds": rounds,
        "seed": seed,
    }


# ---------------------------------------------------------------------------
# One speaker with an outside option
# ---------------------------------------------------------------------------

REGIME_LEMON = "lemon_dropping"
REGIME_LEMON_MULTI = "lemon_dropping_multiple"
REGIME_CHERRY = "cherry_picking"


@dataclass
class OneSpeakerEquilibrium:
    regime: str
    q: float
    u: float
    epsilon_bar: float
    v_gain: float
    pi: float
    m_bar: Optional[float]
    z: Optional[float]
    omega1: Optional[float]
    f_grid_m: np.ndarray
    f_grid: np.ndarray
    cutoff_grid_m: np.ndarray
    cutoff_grid: np.ndarray

    def density(self, m) -> np.ndarray | float:
        out = np.interp(np.abs(np.asarray(m, float)), self.f_grid_m, self.f_grid)
        return out if out.ndim else float(out)

    def cutoff(self, m) -> np.ndarray | float:
        out = np.interp(np.abs(np.asarray(m, float)), self.cutoff_grid_m, self.cutoff_grid)
        return out if out.ndim else float(out)

    def to_json_dict(self) -> dict:
        return {
            "regime": self.regime,
            "q": self.q,
            "u": self.u,
            "epsilon_bar": self.epsilon_bar,
            "v_gain": self.v_gain,
            "pi": self.pi,
            "convention": "per_identity",
            "m_bar": self.m_bar,
            "z": self.z,
            "omega1": self.omega1,
            "density": [[float(a), float(b)] for a, b in zip(self.f_grid_m, self.f_grid)],
            "cutoffs": [
                [float(a), float(b)]
                for a, b in zip(self.cutoff_grid_m, self.cutoff_grid)
                if np.isfinite(b)
            ],
        }


def _solve_z(target: float) -> float:
    # 2 z - 2 atanh(z) = target < 0; substitute z = tanh(t) so the equation
    # becomes 2 tanh(t) - 2 t = target, monotone on t > 0
    def fn(t: float) -> float:
        return 2.0 * np.tanh(t) - 2.0 * t - target

    hi = max(1.0, -target / 2.0 + 2.0)
    return float(np.tanh(brentq(fn, 1e-14, hi, xtol=1e-15, rtol=8.9e-16)))


def one_speaker_equilibrium(
    q: float, u: float, eps: float, m_bar: Optional[float] = None, grid_points: int = 4097
) -> OneSpeakerEquilibrium:
    """Best equilibrium of the one-speaker game against an outside option.

    Regimes by V = (1-q)(1-U)/(q U): cherry-picking for V < eps (density flat
    then rising, pinned by the atanh root), lemon-dropping for
    V in [eps, eps/(1-2 eps)) with m_bar = eps/V, and the multiple-equilibria
    branch above, defaulting to the judge-best m_bar = 1 - 2 eps.  Cutoffs
    are represented as the deterministic signal thresholds s(m) solving
    H(m + eps) - H(s(m)) = Pi, one valid implementation of the judge's
    plateau mixing.
    """
    q = float(q)
    u = float(u)
    eps = float(eps)
    if not (0.0 < q < 1.0 and 0.0 < u < 1.0):
        raise DomainError("q and the outside option must be in (0, 1)")
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must be in (0, 1)")
    v = (1.0 - q) * (1.0 - u) / (q * u)
    mg = np.linspace(0.0, 1.0, grid_points)
    z = None
    omega1 = None
    if v < eps:
        regime = REGIME_CHERRY
        z = _solve_z(1.0 / eps - 1.0 / v)
        pi = (1.0 - z * z) * eps / 2.0
        omega1 = 1.0 - 2.0 * eps * z
        if m_bar is not None:
            raise DomainError("m_bar is not a free parameter in the cherry-picking regime")
        m_bar_out = None
        # the kink at omega1 becomes an exact grid node
        mg = np.unique(np.concatenate((mg, [omega1])))
        flat = v / (2.0 * eps)
        rising = v / np.sqrt((1.0 - mg) ** 2 + 4.0 * eps**2 * (1.0 - z * z))
        f = np.where(mg <= omega1, flat, rising)
        support_hi = 1.0
    else:
        boundary = eps / (1.0 - 2.0 * eps) if eps < 0.5 else np.inf
        if v >= boundary:
            regime = REGIME_LEMON_MULTI
            lo_allowed = eps / v
            hi_allowed = 1.0 - 2.0 * eps
            if m_bar is None:
                m_bar = hi_allowed  # judge-best default
            if not lo_allowed - 1e-12 <= m_bar <= hi_allowed + 1e-12:
                raise DomainError(
                    f"m_bar must lie in [{lo_allowed}, {hi_allowed}] in the multiple regime"
                )
        else:
            regime = REGIME_LEMON
            if m_bar is not None:
                raise DomainError("m_bar is pinned at eps/V in the lemon-dropping regime")
            m_bar = eps / v
        m_bar_out = float(m_bar)
        # represent the support-edge jump with adjacent nodes at m_bar, m_bar+
        if m_bar_out < 1.0:
            mg = np.unique(np.concatenate((mg, [m_bar_out, m_bar_out + 1e-12])))
        f = np.where(mg <= m_bar_out, 1.0 / (2.0 * m_bar_out), 0.0)
        pi = float(
            eps - np.maximum(0.0, m_bar_out - (1.0 - 2.0 * eps)) ** 2 / (8.0 * eps)
        )  # consistency probability at the support edge
        support_hi = m_bar_out
    # cutoff representation: pick iff s >= s(m), with H(m+eps) - H(s(m)) = Pi
    sup_mask = mg <= support_hi + 1e-12
    cut = np.full_like(mg, np.nan)
    cut[sup_mask] = signal_cdf_inv(
        np.clip(signal_cdf(np.minimum(mg[sup_mask] + eps, 1.0 + eps), eps) - pi, 0.0, 1.0), eps
    )
    return OneSpeakerEquilibrium(
        regime=regime,
        q=q,
        u=u,
        epsilon_bar=eps,
        v_gain=v,
        pi=float(pi),
        m_bar=m_bar_out,
        z=z,
        omega1=omega1,
        f_grid_m=mg,
        f_grid=f,
        cutoff_grid_m=mg,
        cutoff_grid=cut,
    )
