import numpy as np
import pytest
from numpy.testing import assert_allclose

from quacklab import (
    DomainError,
    build_max_rule,
    identity_equilibrium,
    identity_quack_payoff,
    identity_rule_pair,
    one_speaker_equilibrium,
    quack_value,
    sequential_equilibrium,
    signal_cdf,
    signal_density,
    simulate_identity,
    simulate_sequential,
)
from quacklab.core import ConstructionError


class TestIdentityEquilibrium:
    def test_moderate_example(self):
        eq = identity_equilibrium(0.55, 0.25)
        assert eq.regime == "moderate"
        assert_allclose(eq.m_bar, 9 / 11)
        assert_allclose(eq.pi1, 0.1217, atol=5e-5)
        assert_allclose(eq.pi2, 0.0996, atol=5e-5)
        assert_allclose(eq.pi2, eq.m_bar * eq.pi1, rtol=1e-12)

    def test_extreme_example(self):
        eq = identity_equilibrium(0.8, 0.25)
        assert eq.regime == "extreme"
        assert eq.m_bar == 0.5  # favored quack pools on [-(1-2 eps), 1-2 eps]
        assert eq.pi1_strict == 0.25
        assert eq.pi2_strict == 0.0

    def test_boundary_continuity_of_closed_forms(self):
        eps = 0.25
        p_star = 1 / (2 - 2 * eps)
        lo = identity_equilibrium(p_star - 1e-9, eps)
        hi = identity_equilibrium(p_star + 1e-9, eps)
        assert abs(lo.m_bar - hi.m_bar) <= 1e-6
        assert abs(lo.pi1 - hi.pi1) <= 1e-6
        assert abs(lo.pi2 - hi.pi2) <= 1e-6

    def test_judge_loss_decreasing_in_p1(self):
        losses = [identity_equilibrium(p, 0.25).judge_loss for p in np.linspace(0.51, 0.99, 33)]
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_doubled_closed_form_consistency(self):
        for p1, eps in [(0.55, 0.25), (0.6, 0.3), (0.52, 0.1)]:
            eq = identity_equilibrium(p1, eps)
            assert_allclose(eq.judge_loss_doubled_closed_form, 2 * eq.judge_loss, rtol=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            identity_equilibrium(0.5, 0.25)
        with pytest.raises(DomainError):
            identity_equilibrium(0.6, 0.6)

    def test_symmetric_limit_matches_benchmark_value(self):
        eq = identity_equilibrium(0.5 + 1e-9, 0.25)
        assert_allclose(eq.pi1, quack_value(0.25).per_identity_payoff, atol=1e-7)


class TestIdentityRulePair:
    def test_converges_to_benchmark_rule(self):
        # sup gap to the symmetric max rule shrinks ~linearly in the asymmetry
        bench = build_max_rule(0.25)
        g = np.linspace(0.0, 1.0, 201)
        gaps = []
        for p1 in (0.505, 0.5005):
            pair = identity_rule_pair(p1, 0.25)
            assert pair.feasible
            g1 = np.max(np.abs(pair.phi1(np.clip(g, 0, pair.m_bar)) - bench.phi(np.clip(g, 0, pair.m_bar))))
            g2 = np.max(np.abs(pair.phi2(g) - bench.phi(g)))
            gaps.append(max(g1, g2))
        assert gaps[1] < gaps[0] / 3
        assert gaps[1] <= 0.01

    def test_both_quacks_indifferent(self):
        pair = identity_rule_pair(0.505, 0.25)
        eq = identity_equilibrium(0.505, 0.25)
        pays1 = [identity_quack_payoff(pair, 1, m) for m in np.linspace(0, pair.m_bar, 21)]
        pays2 = [identity_quack_payoff(pair, 2, m) for m in np.linspace(0, 1, 21)]
        assert max(pays1) - min(pays1) <= 1e-3
        assert max(pays2) - min(pays2) <= 1e-3
        assert abs(np.median(pays1) - eq.pi1) <= 1e-4
        assert abs(np.median(pays2) - eq.pi2) <= 1e-4

    def test_infeasible_asymmetry_raises(self):
        # the published construction caps the dis-favored quack's payoff at
        # extreme messages below Pi2 once the asymmetry is non-trivial
        with pytest.raises(ConstructionError):
            identity_rule_pair(0.55, 0.25, strict=True)
        pair = identity_rule_pair(0.55, 0.25, strict=False)
        assert not pair.feasible
        assert pair.max_excursion > 1e-6

    @pytest.mark.parametrize("p1,eps", [(0.55, 0.25), (0.6, 0.3)])
    def test_mc_confirms_closed_forms(self, p1, eps):
        # the coin tie-break is posterior-valid on the indifference event and
        # splits it evenly, which is what the closed forms express
        eq = identity_equilibrium(p1, eps)
        mc = simulate_identity(p1, eps, 10**6, seed=31, pair=None)
        assert abs(mc["pi1_hat"] - eq.pi1) <= 4 * mc["pi1_se"]
        assert abs(mc["pi2_hat"] - eq.pi2) <= 4 * mc["pi2_se"]

    def test_mc_with_feasible_pair(self):
        # where the pair construction is feasible, simulating with it also
        # reproduces the closed forms (each quack is indifferent at his value)
        p1, eps = 0.505, 0.25
        eq = identity_equilibrium(p1, eps)
        pair = identity_rule_pair(p1, eps)
        mc = simulate_identity(p1, eps, 10**6, seed=37, pair=pair)
        assert abs(mc["pi1_hat"] - eq.pi1) <= 4 * mc["pi1_se"]
        assert abs(mc["pi2_hat"] - eq.pi2) <= 4 * mc["pi2_se"]

    def test_judge_loss_invariant_to_tie_break(self):
        # only the aggregate loss is tie-break invariant; with the clipped
        # (infeasible) pair the individual payoffs shift but the loss stays
        p1, eps = 0.55, 0.25
        eq = identity_equilibrium(p1, eps)
        pair = identity_rule_pair(p1, eps, strict=False)
        mc = simulate_identity(p1, eps, 10**6, seed=41, pair=pair)
        se = mc["pi1_se"] + mc["pi2_se"]
        assert abs(mc["judge_loss_hat"] - eq.judge_loss) <= 4 * se


class TestSequential:
    def test_values(self):
        rep = sequential_equilibrium(0.2)
        assert_allclose(rep.quack_payoff_seq_doubled, 0.2)
        assert_allclose(rep.quack_payoff_sim_doubled, 0.18667, atol=5e-6)
        assert_allclose(rep.quack_payoff_seq, 0.1)
        assert_allclose(rep.quack_payoff_sim, 0.09333, atol=5e-6)
        assert rep.judge_prefers_simultaneous

    def test_gap_at_regime_edge(self):
        # the doubled payoff gap eps^2/3 approaches 1/48 as eps -> 1/4
        eps = 0.25 - 1e-9
        rep = sequential_equilibrium(eps)
        gap = rep.quack_payoff_seq_doubled - rep.quack_payoff_sim_doubled
        assert_allclose(gap, 1 / 48, atol=1e-8)

    def test_judge_density_comparison(self):
        # both-consistent tie: the first-speaking quack's density is smaller
        # than the second's iff eps < 1/4, so the judge backs speaker 1
        for eps in (0.05, 0.15, 0.24):
            assert 1 / (2 * (1 - 2 * eps)) < 1 / (4 * eps)

    def test_domain(self):
        with pytest.raises(DomainError):
            sequential_equilibrium(0.25)

    def test_dominance_on_grid(self):
        for eps in np.linspace(0.02, 0.24, 12):
            rep = sequential_equilibrium(eps)
            assert rep.quack_payoff_seq > rep.quack_payoff_sim

    def test_mc_oracle(self):
        rep = simulate_sequential(0.2, 10**6, seed=13)
        assert abs(rep["quack_win_rate"] - 0.1) <= 4 * rep["quack_win_se"]
        assert rep["second_quack_win_rate"] == 0.0
        assert_allclose(rep["judge_accuracy"], 1 - rep["quack_win_rate"], rtol=1e-12)


class TestOneSpeaker:
    def test_regime_classification_grid(self):
        for q in (0.3, 0.5, 0.7):
            for u in (0.4, 0.6, 0.8):
                for eps in (0.2, 1 / 3, 0.45):
                    v = (1 - q) * (1 - u) / (q * u)
                    eq = one_speaker_equilibrium(q, u, eps)
                    if v < eps:
                        assert eq.regime == "cherry_picking"
                    elif eps < 0.5 and v >= eps / (1 - 2 * eps):
                        assert eq.regime == "lemon_dropping_multiple"
                    else:
                        assert eq.regime == "lemon_dropping"

    def test_cherry_picking_example(self):
        eq = one_speaker_equilibrium(0.5, 0.8, 1 / 3)
        assert eq.regime == "cherry_picking"
        assert_allclose(eq.v_gain, 0.25)
        assert abs(eq.z - 0.881) <= 1e-3
        assert_allclose(eq.omega1, 0.413, atol=1e-3)
        assert_allclose(eq.density(0.0), 0.375, rtol=1e-12)
        assert_allclose(eq.density(1.0), 0.79, atol=5e-3)

    def test_omega1_two_ways(self):
        eq = one_speaker_equilibrium(0.5, 0.8, 1 / 3)
        eps = 1 / 3
        alt = 1 - 2 * eps * np.sqrt(1 - 2 * eq.pi / eps)
        assert abs(eq.omega1 - alt) <= 1e-10

    def test_lemon_dropping_example(self):
        eq = one_speaker_equilibrium(0.5, 2 / 3, 1 / 3)
        assert eq.regime == "lemon_dropping"
        assert_allclose(eq.v_gain, 0.5)
        assert_allclose(eq.m_bar, 2 / 3, rtol=1e-12)
        assert_allclose(eq.density(0.0), 0.75, rtol=1e-12)

    @pytest.mark.parametrize(
        "q,u,eps", [(0.5, 0.8, 1 / 3), (0.5, 2 / 3, 1 / 3), (0.2, 0.3, 0.2), (0.6, 0.9, 0.4)]
    )
    def test_density_normalization(self, q, u, eps):
        eq = one_speaker_equilibrium(q, u, eps)
        mg = np.concatenate((-eq.f_grid_m[::-1], eq.f_grid_m[1:]))
        fg = np.concatenate((eq.f_grid[::-1], eq.f_grid[1:]))
        assert abs(np.trapezoid(fg, mg) - 1.0) <= 1e-8

    def test_judge_indifference_at_cutoffs(self):
        eq = one_speaker_equilibrium(0.5, 0.8, 1 / 3)
        eps = 1 / 3
        mask = eq.cutoff_grid_m > eq.omega1 + 1e-9
        num = (1 - eq.q) / 2 / (2 * eps)
        post = num / (
            num + eq.q * eq.f_grid[mask] * signal_density(eq.cutoff_grid[mask], eps)
        )
        assert np.max(np.abs(post - eq.u)) <= 1e-8

    @pytest.mark.parametrize("q,u,eps", [(0.5, 0.8, 1 / 3), (0.5, 2 / 3, 1 / 3)])
    def test_quack_indifference_across_support(self, q, u, eps):
        eq = one_speaker_equilibrium(q, u, eps)
        sup = np.isfinite(eq.cutoff_grid)
        pays = signal_cdf(np.minimum(eq.cutoff_grid_m[sup] + eps, 1 + eps), eps) - signal_cdf(
            eq.cutoff_grid[sup], eps
        )
        assert np.max(np.abs(pays - eq.pi)) <= 1e-6

    def test_multiple_regime_selector(self):
        eq = one_speaker_equilibrium(0.2, 0.3, 0.2)
        assert eq.regime == "lemon_dropping_multiple"
        assert_allclose(eq.m_bar, 1 - 2 * 0.2)  # judge-best default
        assert_allclose(eq.pi, 0.2)
        custom = one_speaker_equilibrium(0.2, 0.3, 0.2, m_bar=0.5)
        assert_allclose(custom.m_bar, 0.5)
        with pytest.raises(DomainError):
            one_speaker_equilibrium(0.2, 0.3, 0.2, m_bar=0.01)

    def test_regime_value_continuity_at_v_equals_eps(self):
        eps = 1 / 3
        # pick u so that V straddles eps; the value gap scales like the 2/3
        # power of the overshoot (z ~ cube root near the boundary)
        eq_lo = one_speaker_equilibrium(0.5, 1 / (1 + eps) + 1e-9, eps)
        eq_hi = one_speaker_equilibrium(0.5, 1 / (1 + eps) - 1e-9, eps)
        assert eq_lo.regime == "cherry_picking"
        assert eq_hi.regime == "lemon_dropping"
        assert abs(eq_lo.pi - eq_hi.pi) <= 1e-5
        assert abs(eq_lo.pi - eps / 2) <= 1e-5
        assert abs(eq_lo.density(0.0) - eq_hi.density(0.0)) <= 1e-5
