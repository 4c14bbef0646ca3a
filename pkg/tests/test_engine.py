import numpy as np
import pytest
from numpy.testing import assert_allclose

from quacklab import (
    DomainError,
    ExpertStrategy,
    GameConfig,
    NoiseSpec,
    PriorSpec,
    QuackStrategy,
    StrategyProfile,
    best_response_scan,
    build_max_rule,
    build_min_rule,
    coin_rule,
    expert_deviation_payoff,
    mc_quack_message_payoff,
    quack_message_payoff,
    quack_value,
    simulate,
)


def profile_truthful_uniform(rule):
    return StrategyProfile(ExpertStrategy.truthful(), QuackStrategy.uniform(), rule)


class TestQuackMessagePayoff:
    @pytest.mark.parametrize("eps", [0.25, 0.5, 0.9])
    def test_indifference_under_max_rule(self, eps, message_grid_201):
        rule = build_max_rule(eps)
        pi = quack_value(eps).per_identity_payoff
        vals = np.array([quack_message_payoff(rule, m) for m in message_grid_201[::10]])
        assert np.max(np.abs(vals - pi)) <= 1e-6

    def test_min_rule_indifference(self, min_rule_02):
        pi = quack_value(0.2).per_identity_payoff
        vals = [quack_message_payoff(min_rule_02, m) for m in np.linspace(0, 1, 21)]
        assert max(abs(v - pi) for v in vals) <= 1e-6

    def test_eps1_rule_indifference(self, eps1_rule):
        pi = quack_value(1.0).per_identity_payoff
        vals = [quack_message_payoff(eps1_rule, m) for m in np.linspace(0, 1, 21)]
        assert max(abs(v - pi) for v in vals) <= 1e-12

    def test_endpoint_identities(self, max_rule_half):
        # phi(1) * K^-(1) picks up the full quack value at the edge message
        pi = quack_value(0.5).per_identity_payoff
        assert_allclose(quack_message_payoff(max_rule_half, 1.0), pi, atol=1e-8)
        assert_allclose(quack_message_payoff(max_rule_half, 0.0), pi, atol=1e-8)

    def test_naive_judge_rewards_moderation(self):
        rule = coin_rule(1 / 3)
        v0 = quack_message_payoff(rule, 0.0)
        v1 = quack_message_payoff(rule, 1.0)
        assert v0 > v1
        # interior messages are consistent w.p. eps, split half-half
        assert_allclose(v0, (1 / 3) / 2, atol=1e-10)

    @pytest.mark.parametrize("eps", [0.25, 0.5, 0.9])
    @pytest.mark.parametrize("m", [0.0, 0.5, 1.0])
    def test_quadrature_vs_mc(self, eps, m):
        rule = build_max_rule(eps)
        quad = quack_message_payoff(rule, m)
        est, se = mc_quack_message_payoff(rule, m, samples=10**6, seed=17)
        assert abs(quad - est) <= 4 * se


class TestExpertDeviation:
    def test_truth_is_fixed_point(self, max_rule_half):
        v = expert_deviation_payoff(max_rule_half, 0.3, 0.3)
        assert 0 < v < 1

    def test_small_deviation_strictly_worse(self, max_rule_half):
        v_truth = expert_deviation_payoff(max_rule_half, 0.0, 0.0)
        v_dev = expert_deviation_payoff(max_rule_half, 0.0, 0.01)
        assert v_truth - v_dev > 0

    def test_far_deviation_worse_even_adversarial(self, max_rule_half):
        # message always inconsistent: only the off-path award remains
        v_truth = expert_deviation_payoff(max_rule_half, -0.5, -0.5)
        v_far = expert_deviation_payoff(max_rule_half, -0.5, 0.9, alpha_policy="adversarial1")
        assert v_far < v_truth

    def test_coin_alpha_lower(self, max_rule_half):
        adv = expert_deviation_payoff(max_rule_half, -0.5, 0.9, alpha_policy="adversarial1")
        coin = expert_deviation_payoff(max_rule_half, -0.5, 0.9, alpha_policy="coin")
        assert coin < adv


class TestBestResponseScan:
    @pytest.mark.parametrize("eps", [0.25, 0.5])
    def test_expert_regret_nonpositive(self, eps):
        rule = build_max_rule(eps)
        regret = best_response_scan(rule, "expert", grid_n=101, m_grid_n=201, s_panels=1024)
        assert regret <= 1e-6

    def test_quack_spread_max_rule(self, max_rule_half):
        spread = best_response_scan(max_rule_half, "quack", grid_n=101)
        assert spread <= 1e-4

    def test_quack_spread_naive_rule(self):
        spread = best_response_scan(coin_rule(1 / 3), "quack", grid_n=101)
        assert spread > 0.01

    def test_grid_validation(self, max_rule_half):
        with pytest.raises(DomainError):
            best_response_scan(max_rule_half, "quack", grid_n=50)


class TestSimulate:
    def test_equilibrium_win_rate(self, max_rule_half):
        cfg = GameConfig(0.5)
        rep = simulate(cfg, profile_truthful_uniform(max_rule_half), 10**6, seed=2)
        pi = quack_value(0.5).per_identity_payoff
        assert abs(rep.quack_win_rate - pi) <= 4 * rep.quack_win_rate_se
        assert abs(rep.learn_state_freq - (1 - 0.5 + 0.25 / 3)) <= 4 * rep.learn_state_freq_se

    def test_zero_sum_accounting(self, max_rule_half):
        cfg = GameConfig(0.5)
        rep = simulate(cfg, profile_truthful_uniform(max_rule_half), 10**5, seed=3)
        assert rep.judge_accuracy + rep.quack_win_rate == 1.0

    def test_babbling_symmetry(self):
        # a measure-preserving scrambling map makes the expert's message
        # uniform and uninformative; with a coin judge accuracy is 1/2
        def scramble(w):
            return np.mod((w + 1.0) * 997.0, 2.0) - 1.0

        cfg = GameConfig(0.5)
        prof = StrategyProfile(
            ExpertStrategy.fixed_deviation(scramble), QuackStrategy.uniform(), coin_rule(0.5)
        )
        rep = simulate(cfg, prof, 10**6, seed=4)
        assert abs(rep.judge_accuracy - 0.5) <= 4 * rep.judge_accuracy_se

    @pytest.mark.parametrize("make_rule", [
        lambda: build_max_rule(0.5),
        lambda: coin_rule(0.5),
        lambda: build_min_rule(0.2),
    ])
    def test_value_bound_any_judge(self, make_rule):
        # against the mimicking quack no judge rule beats the equilibrium value
        rule = make_rule()
        eps = rule.epsilon_bar
        cfg = GameConfig(eps)
        rep = simulate(cfg, profile_truthful_uniform(rule), 10**6, seed=5)
        pi = quack_value(eps).per_identity_payoff
        assert rep.quack_win_rate >= pi - 4 * rep.quack_win_rate_se

    def test_seed_determinism(self, max_rule_half):
        cfg = GameConfig(0.5)
        prof = profile_truthful_uniform(max_rule_half)
        a = simulate(cfg, prof, 200_000, seed=6)
        b = simulate(cfg, prof, 200_000, seed=6)
        assert a.to_json_dict() == b.to_json_dict()
        c = simulate(cfg, prof, 200_000, seed=7)
        assert a.judge_accuracy != c.judge_accuracy

    def test_requires_uniform_noise(self, max_rule_half):
        cfg = GameConfig(0.5, noise=NoiseSpec.gaussian(0.1))
        with pytest.raises(DomainError):
            simulate(cfg, profile_truthful_uniform(max_rule_half), 10, seed=0)

    def test_per_message_table(self, max_rule_half):
        cfg = GameConfig(0.5)
        rep = simulate(cfg, profile_truthful_uniform(max_rule_half), 10**6, seed=8)
        pi = quack_value(0.5).per_identity_payoff
        for m, payoff, se in rep.per_message_payoff:
            assert abs(payoff - pi) <= 5 * se
        csv = rep.payoff_table_csv()
        assert csv.splitlines()[0] == "m,payoff,stderr"


class TestStrategies:
    def test_tabulated_expert(self, max_rule_half):
        # a tabulated identity map reproduces truth-telling
        grid = np.linspace(-1, 1, 257)
        tab = ExpertStrategy.tabulated(grid, grid)
        cfg = GameConfig(0.5)
        prof_tab = StrategyProfile(tab, QuackStrategy.uniform(), max_rule_half)
        prof_tru = StrategyProfile(ExpertStrategy.truthful(), QuackStrategy.uniform(), max_rule_half)
        a = simulate(cfg, prof_tab, 10**5, seed=12)
        b = simulate(cfg, prof_tru, 10**5, seed=12)
        assert a.judge_accuracy == b.judge_accuracy

    def test_truncated_prior_sampling(self):
        prior = PriorSpec.uniform()
        q = QuackStrategy.truncated_prior(0.6)
        from quacklab.core import substream

        draws = q.sample(substream(9, 3), 10**5, prior)
        assert np.all(np.abs(draws) <= 0.6)
        assert abs(np.mean(draws)) < 0.01

    def test_density_table_roundtrip(self):
        m = np.linspace(-1, 1, 513)
        f = 0.5 + 0.25 * (1 - np.abs(m))
        f = f / np.trapezoid(f, m)
        q = QuackStrategy.density_table(m, f)
        d = q.to_json_dict()
        back = QuackStrategy.from_json_dict(d)
        assert np.array_equal(back.density_grid, q.density_grid)

    def test_profile_roundtrip(self, tmp_path, max_rule_half):
        prof = StrategyProfile(
            ExpertStrategy.truthful(), QuackStrategy.uniform(0.8), max_rule_half
        )
        import json

        path = tmp_path / "prof.json"
        path.write_text(json.dumps(prof.to_json_dict()))
        back = StrategyProfile.load(str(path))
        assert back.quack.half_width == 0.8
        assert np.array_equal(back.judge.grid_phi, max_rule_half.grid_phi)
