"""Tests of the equilibrium construction"""

import math
from unittest import TestCase

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
import pytest

from exitduel.diffusion import FixedNoise, simulate_path, simulate_paths
from exitduel.equilibrium import (ExitGame, Exiter, IntegrationError, SupportError,
                                  TabulatedTypes, UniformTypes, big_a, big_y, exit_indices,
                                  exit_schedule, exit_time, game_outcome, index_times,
                                  integrate_belief, integrate_beliefs, lambda_eps, lambda_max,
                                  lambda_rate, simulate_game)
from exitduel.montecarlo import first_true
from exitduel.payoffs import AssumptionError, FunctionalProfit, ResolventPair

from .tools import (assert_nondecreasing, assert_nonincreasing, worked_game, worked_model,
                    worked_profit, worked_resolvents, worked_types)


class TestTypes(TestCase):

    def setUp(self):
        self.dist = worked_types()

    def test_uniform_values(self):
        """Closed-form generating values of the uniform prior"""
        assert big_a(1.5, self.dist) == 0.0
        assert big_y(0.0, self.dist) == 1.5
        assert_allclose(big_a(1.0, self.dist), math.log(2.0))
        assert big_a(0.5, self.dist) == math.inf

    def test_round_trip(self):
        """A and Y invert each other"""
        ys = np.linspace(0.5, 1.5, 101)[1:]
        assert_allclose(big_y(big_a(ys, self.dist), self.dist), ys, rtol=0, atol=1e-12)
        us = np.linspace(0.0, 1.0, 101)
        assert_allclose(self.dist.cdf(self.dist.inverse_cdf(us)), us, atol=1e-12)

    def test_decreasing(self):
        ys = np.linspace(0.5, 1.5, 101)
        assert_nonincreasing(big_a(ys, self.dist))
        assert_nonincreasing(big_y(np.linspace(0.0, 10.0, 101), self.dist))

    def test_outside_support(self):
        """Beliefs outside the support are rejected"""
        with pytest.raises(SupportError):
            big_a(1.6, self.dist)
        with pytest.raises(SupportError):
            self.dist.big_a(0.5, sentinel=False)
        with pytest.raises(SupportError):
            big_y(-0.1, self.dist)
        with pytest.raises(SupportError):
            UniformTypes(1.0, 1.0)

    def test_tabulated(self):
        """Tabulated priors interpolate their distribution function"""
        dist = TabulatedTypes([0.5, 1.0, 1.5], [0.0, 0.25, 1.0])
        assert (dist.theta_lo, dist.theta_hi) == (0.5, 1.5)
        assert_allclose(dist.cdf(1.0), 0.25)
        assert_allclose(dist.inverse_cdf(0.625), 1.25)
        assert_allclose(dist.big_a(1.0), math.log(4.0))
        us = np.linspace(0.0, 1.0, 51)
        assert_allclose(dist.cdf(dist.inverse_cdf(us)), us, atol=1e-12)

    def test_tabulated_errors(self):
        with pytest.raises(SupportError):
            TabulatedTypes([0.5, 1.0, 1.5], [0.0, 0.5, 0.9])
        with pytest.raises(SupportError):
            TabulatedTypes([0.5, 1.0, 0.9], [0.0, 0.5, 1.0])
        with pytest.raises(SupportError):
            TabulatedTypes([0.5, 1.5], [0.0, 0.5, 1.0])


class TestGenerator(TestCase):

    def setUp(self):
        self.game = worked_game()
        self.resolvents = self.game.resolvents
        self.table = self.game.table
        self.xs = np.linspace(0.05, 2.0, 50)
        self.ys = np.linspace(0.5, 1.5, 50)

    def rate(self, x, y):
        return lambda_rate(x, y, self.resolvents, self.table)

    def test_outside_action_region(self):
        """No exits above the threshold"""
        for y in (0.6, 1.0, 1.5):
            assert self.rate(1.2 * self.table.alpha(y), y) == 0.0

    def test_identity(self):
        """Indifference pins the intensity inside the action region"""
        spec = self.game.spec
        for theta in (0.5, 0.9, 1.3, 1.5):
            xs = np.linspace(0.01, self.table.alpha(theta), 20)
            residual = (spec.duopoly_flow(xs) - self.game.r * theta
                        + self.rate(xs, theta) * (self.resolvents.m(xs) - theta))
            assert np.max(np.abs(residual)) < 1e-12

    def test_bounds(self):
        """0 <= lambda <= lambda_max on the grid"""
        x, y = np.meshgrid(self.xs, self.ys)
        values = self.rate(x, y)
        assert np.all(values >= 0)
        assert np.all(values <= self.game.lambda_max)
        assert_allclose(lambda_max(self.resolvents, 1.5), 3.0)

    def test_derivative_in_type(self):
        """The intensity increases in the belief at a bounded slope"""
        x, h = 0.1, 1e-6
        ys = np.linspace(0.55, 1.45, 19)
        slopes = (self.rate(x, ys + h) - self.rate(x, ys - h)) / (2 * h)
        m_min = self.resolvents.m_min
        assert np.all(slopes > 0)
        assert np.all(slopes <= self.game.r * m_min / (m_min - 1.5) ** 2)

    def test_joint_monotonicity(self):
        """lambda(x, Y(a)) decreases in x and in a"""
        a = np.linspace(0.0, 5.0, 50)
        x, y = np.meshgrid(self.xs, big_y(a, self.game.dist))
        values = self.rate(x, y)
        assert_nonincreasing(values, tol=1e-12, axis=1)
        assert_nonincreasing(values, tol=1e-12, axis=0)

    def test_discontinuity(self):
        """Jumps in x only across the threshold"""
        xs = np.linspace(0.05, 3.0, 2951)
        jumps = np.abs(np.diff(self.rate(xs, 1.0)))
        big = np.flatnonzero(jumps > 0.01)
        threshold = self.table.alpha(1.0)
        assert len(big) == 1
        assert xs[big[0]] <= threshold < xs[big[0] + 1]

    def test_monopoly_too_small(self):
        """The intensity needs m(x) > theta_U"""
        spec = FunctionalProfit(np.sqrt, lambda x: np.sqrt(x) + 1.0, 1.0, (31.6, 32.6),
                                (0.0, 1000.0))

        def flat(x):
            return np.full_like(x, 1.2)

        resolvents = ResolventPair(worked_resolvents().d, flat, 1.2, spec)
        with pytest.raises(AssumptionError):
            lambda_rate(0.1, 1.0, resolvents, self.table)


class TestSmoothedGenerator(TestCase):

    def setUp(self):
        self.game = worked_game()
        self.resolvents = self.game.resolvents
        self.table = self.game.table

    def smoothed(self, x, y, eps):
        return lambda_eps(x, y, eps, self.resolvents, self.table)

    def test_branches(self):
        """Unsmoothed above the boundary, ramp below, zero beyond the ramp"""
        x = float(self.table.alpha(1.0))
        above = self.smoothed(x, 1.2, 0.1)
        assert_allclose(above, lambda_rate(x, 1.2, self.resolvents, self.table), rtol=1e-12)
        assert_allclose(self.smoothed(x, 1.2, 0.01), above, rtol=1e-12)
        assert self.smoothed(x, 0.89, 0.1) == 0.0
        edge = float(lambda_rate(x, 1.0, self.resolvents, self.table))
        assert_allclose(self.smoothed(x, 0.95, 0.1), 0.5 * edge, rtol=1e-9)

    def test_dominates(self):
        """The smoothed rate lies above lambda and shrinks with eps"""
        x, y = np.meshgrid(np.linspace(0.05, 2.0, 50), np.linspace(0.5, 1.5, 50))
        exact = lambda_rate(x, y, self.resolvents, self.table)
        previous = self.smoothed(x, y, 0.08)
        for eps in (0.04, 0.02, 0.01):
            current = self.smoothed(x, y, eps)
            assert np.all(current <= previous + 1e-15)
            assert np.all(current >= exact - 1e-12)
            previous = current

    def test_continuous(self):
        """No jumps across the boundary once smoothed"""
        xs = np.linspace(0.05, 3.0, 2951)
        assert np.max(np.abs(np.diff(self.smoothed(xs, 1.0, 0.05)))) < 0.01

    def test_continuous_at_top(self):
        """No jump where the state crosses the threshold of the top type"""
        top = float(self.table.alphas[-1])
        below = self.smoothed(top * (1 - 1e-9), 1.5, 0.05)
        above = self.smoothed(top * (1 + 1e-9), 1.5, 0.05)
        assert below > 0.1
        assert_allclose(above, below, rtol=1e-6)
        assert self.smoothed(2.0 * top, 1.5, 0.05) == 0.0

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            self.smoothed(0.5, 1.0, 0.0)


class TestBelief(TestCase):

    def setUp(self):
        self.game = worked_game()
        noise = self.game.noise(41, 3.0, 20)
        self.noise = noise
        self.states = simulate_paths(self.game.model, 1.0, noise)

    def test_constant_above_threshold(self):
        """The belief stays put while the state is above every threshold"""
        path = simulate_path(self.game.model, 2.72, 0.3, FixedNoise.zeros(0.01, 30))
        belief = integrate_belief(self.game, path)
        assert_array_equal(belief.a_values, 0.0)
        assert belief.converged
        assert belief.epsilon_used == 0.05

    def test_increments(self):
        """Belief paths rise by at most lambda_max dt per step"""
        a_values, converged = integrate_beliefs(self.game, self.states)
        steps = np.diff(a_values, axis=1)
        assert np.all(steps >= 0)
        assert np.all(steps <= self.game.lambda_max * self.game.dt + 1e-12)
        assert np.all(a_values[:, 0] == 0.0)
        assert converged.shape == (20,)
        ys = big_y(a_values, self.game.dist)
        assert np.all((ys > 0.5) & (ys <= 1.5))

    def test_moves_below_threshold(self):
        """The belief only drops while the state is below the smoothed threshold"""
        a_values, _ = integrate_beliefs(self.game, self.states)
        moved = np.diff(a_values, axis=1) > 0
        ys = big_y(a_values[:, :-1], self.game.dist)
        inverse = self.game.table.alpha_inverse(self.states[:, :-1][moved])
        assert np.all(inverse < ys[moved] + self.game.eps_ladder[-1] + 1e-12)

    def test_lipschitz_in_start(self):
        """Beliefs started apart do not drift further apart"""
        low, _ = integrate_beliefs(self.game, self.states, a0=0.0)
        high, _ = integrate_beliefs(self.game, self.states, a0=0.1)
        gap = high - low
        assert np.all(gap >= -1e-12)
        assert np.all(gap <= 0.1 + 1e-12)

    def test_monotone_in_state(self):
        """A higher initial state slows the belief down"""
        high_states = simulate_paths(self.game.model, 1.3, self.noise)
        low, _ = integrate_beliefs(self.game, self.states)
        high, _ = integrate_beliefs(self.game, high_states)
        assert np.all(high <= low + 2 * self.game.lambda_max * self.game.dt)

    def test_ladder(self):
        """The eps ladder must decrease strictly"""
        with pytest.raises(IntegrationError):
            integrate_beliefs(self.game, self.states, eps_ladder=(0.1, 0.2))
        with pytest.raises(IntegrationError):
            integrate_beliefs(self.game, self.states, eps_ladder=())
        with pytest.raises(SupportError):
            integrate_beliefs(self.game, self.states, a0=-1.0)

    def test_single_rung(self):
        """A single rung reports convergence trivially"""
        _, converged = integrate_beliefs(self.game, self.states, eps_ladder=(0.05,))
        assert np.all(converged)


class TestExitTimes(TestCase):

    def setUp(self):
        self.game = worked_game()

    def test_top_type_in_action_region(self):
        """The highest type leaves at once below its threshold"""
        path = simulate_path(self.game.model, 1.0, 2.0, self.game.noise(3, 2.0))
        belief = integrate_belief(self.game, path)
        assert exit_time(self.game, 1.5, belief, path) == (0.0, 0.0)

    def test_top_type_waits(self):
        """Above its threshold the highest type waits for the state to fall"""
        noise = self.game.noise(5, 4.0, 30)
        states = simulate_paths(self.game.model, 2.72, noise)
        a_values, _ = integrate_beliefs(self.game, states)
        _, by_rect = exit_indices(self.game, 1.5, states, a_values)
        hitting = first_true(states <= self.game.table.alpha(1.5))
        assert_array_equal(by_rect, hitting)
        assert np.any(by_rect < states.shape[1])

    def test_never(self):
        """Never reaching the boundary gives infinite exit times"""
        path = simulate_path(self.game.model, 2.72, 0.3, FixedNoise.zeros(0.01, 30))
        belief = integrate_belief(self.game, path)
        assert exit_time(self.game, 1.2, belief, path) == (math.inf, math.inf)

    def test_index_times(self):
        times = np.array([0.0, 0.5, 1.0])
        assert_array_equal(index_times([0, 2, 3], times), [0.0, 1.0, math.inf])

    def test_type_outside_support(self):
        path = simulate_path(self.game.model, 1.0, 0.3, FixedNoise.zeros(0.01, 30))
        belief = integrate_belief(self.game, path)
        with pytest.raises(SupportError):
            exit_time(self.game, 1.7, belief, path)

    def test_monotone_in_type(self):
        """Higher types leave no later"""
        noise = self.game.noise(13, 4.0, 50)
        states = simulate_paths(self.game.model, 1.2, noise)
        a_values, _ = integrate_beliefs(self.game, states)
        thetas = np.linspace(0.55, 1.5, 20)
        columns = [exit_indices(self.game, theta, states, a_values)[1] for theta in thetas]
        assert_nonincreasing(np.column_stack(columns), axis=1)

    def test_schedule(self):
        """The schedule of one path decreases in the type"""
        noise = self.game.noise(17, 4.0)
        path = simulate_path(self.game.model, 1.0, 4.0, noise)
        belief = integrate_belief(self.game, path)
        thetas = np.linspace(0.51, 1.5, 100)
        schedule = exit_schedule(self.game, belief, thetas)
        assert schedule[-1] == 0.0
        finite = schedule[np.isfinite(schedule)]
        assert_nonincreasing(finite)
        for theta, tau in zip(thetas[::10], schedule[::10]):
            assert tau == exit_time(self.game, theta, belief, path)[0]


def test_exit_forms_agree():
    """Both exit forms agree to two steps on almost every path"""
    game = worked_game(dt=0.002, eps_ladder=(0.08, 0.04, 0.02, 0.01))
    noise = game.noise(2024, 3.0, 1000)
    states = simulate_paths(game.model, 1.0, noise)
    a_values, _ = integrate_beliefs(game, states)
    thetas = game.dist.sample(noise.uniforms(0, 1000))
    by_belief, by_rect = exit_indices(game, thetas, states, a_values)
    n_times = states.shape[1]
    both = (by_belief < n_times) & (by_rect < n_times)
    assert np.count_nonzero(both) > 100
    close = np.abs(by_belief[both] - by_rect[both]) <= 2
    assert np.mean(close) >= 0.95


class TestExitGame(TestCase):

    def test_build_refuses(self):
        """Building a game checks the standing assumptions"""
        with pytest.raises(AssumptionError) as info:
            ExitGame.build(worked_model(), worked_profit(m0=1.4), worked_types(), dt=0.01)
        assert not info.value.report.passed

    def test_build_needs_resolvents(self):
        spec = FunctionalProfit(np.sqrt, lambda x: np.sqrt(x) + 2.0, 1.0, (31.6, 33.6),
                                (0.0, 1000.0))
        with pytest.raises(ValueError):
            ExitGame.build(worked_model(), spec, worked_types())

    def test_with_types(self):
        """A narrower prior gets its own threshold table"""
        game = worked_game().with_types(UniformTypes(0.9, 1.1))
        assert len(game.table) == 51
        assert game.table.theta_lo == 0.9
        assert_allclose(game.table.alpha(1.0), worked_game().table.alpha(1.0), rtol=1e-6)
        assert game.dt == worked_game().dt

    def test_with_types_refuses(self):
        """A prior that breaks the assumptions is refused like in build"""
        with pytest.raises(AssumptionError) as raised:
            worked_game().with_types(UniformTypes(0.5, 2.5))
        assert 'M0 > r*theta_U' in [clause.name for clause in raised.value.report.failures]

    def test_noise(self):
        noise = worked_game().noise(1, 2.0, 5)
        assert noise.n_steps == 200 and noise.n_paths == 5


class TestGame(TestCase):

    def setUp(self):
        self.game = worked_game()

    def test_tie(self):
        """Equal types leave together"""
        for seed in range(5):
            outcome = simulate_game(self.game, 1.2, 1.1, 1.1, seed, 4.0)
            assert outcome.exit_time_1 == outcome.exit_time_2
            assert outcome.first_exiter in (Exiter.BOTH, Exiter.NONE)

    def test_immediate_tie(self):
        """The highest types below their threshold both collect at once"""
        outcome = simulate_game(self.game, 1.0, 1.5, 1.5, 0, 1.0)
        assert outcome.first_exiter is Exiter.BOTH
        assert (outcome.exit_time_1, outcome.exit_time_2) == (0.0, 0.0)
        assert outcome.payoff_1 + outcome.payoff_2 == 3.0

    def test_higher_type_leaves_first(self):
        """The higher exit value never outlasts the lower one"""
        for seed in range(10):
            outcome = simulate_game(self.game, 1.2, 1.4, 1.0, seed, 4.0)
            assert outcome.exit_time_1 <= outcome.exit_time_2
            if outcome.first_exiter is Exiter.FIRST:
                # the stayer collects the monopoly value, which beats any exit value
                assert outcome.payoff_2 > outcome.payoff_1
            if math.isfinite(outcome.exit_time_1):
                assert outcome.first_exiter is not Exiter.NONE

    def test_payoffs(self):
        """Payoffs on a fixed path follow the leaver and stayer terms"""
        first_exits = 0
        for seed in range(5):
            noise = self.game.noise(seed, 4.0)
            path = simulate_path(self.game.model, 1.2, 4.0, noise)
            belief = integrate_belief(self.game, path)
            outcome = game_outcome(self.game, path, belief, 1.4, 0.6)
            if outcome.first_exiter is not Exiter.FIRST:
                continue
            first_exits += 1
            n = int(round(outcome.exit_time_1 / self.game.dt))
            discount = math.exp(-outcome.exit_time_1)
            stay = float(self.game.resolvents.m(path.states[n])) * discount
            assert_allclose(outcome.payoff_2 - outcome.payoff_1, stay - 1.4 * discount)
        assert first_exits > 0


    def test_no_exit(self):
        """Without exits both earn the truncated duopoly profit"""
        path = simulate_path(self.game.model, 2.72, 0.3, FixedNoise.zeros(0.01, 30))
        belief = integrate_belief(self.game, path)
        outcome = game_outcome(self.game, path, belief, 1.0, 1.2)
        assert outcome.first_exiter is Exiter.NONE
        assert outcome.payoff_1 == outcome.payoff_2 > 0
