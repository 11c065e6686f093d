"""
The symmetric equilibrium of the exit game.

Both players' beliefs about the opponent are carried by one increasing
generating process A_t = -log F(Y_t), where Y_t is the highest type that
may still be in the market. It solves

    dA_t = lambda(X_t, Y(A_t)) dt

with the equilibrium exit intensity

    lambda(x, y) = (r y - D(x)) / (m(x) - y)    if x <= alpha(y), else 0.

The right-hand side jumps on the graph of alpha, so the belief path is
integrated with the continuous smoothed rate lambda^eps on a ladder of
shrinking eps; the result for the smallest eps is reported together with a
convergence flag.

A player of type theta leaves at the first time the belief crosses A(theta),
or equivalently, once Y(A_t) <= theta and X_t <= alpha(theta).

"""

from abc import ABCMeta, abstractmethod
from collections import namedtuple
from enum import Enum
import logging

import numpy as np
from scipy.integrate import trapezoid

from .config import get_float, get_floats
from .diffusion import NoiseGrid, SamplePath, simulate_paths
from .montecarlo import first_true
from .payoffs import AssumptionError, ExampleProfit, example_resolvents, validate_assumptions
from .single_player import build_threshold_table, fundamental_decreasing


logger = logging.getLogger(__name__)


class SupportError(ValueError):
    """Raised when a type or belief lies outside the support of the type distribution."""
    pass


class IntegrationError(ArithmeticError):
    """Raised when the belief integration ladder is inconsistent."""
    pass


class TypeDistribution(metaclass=ABCMeta):
    """
    The common prior F of the players' exit values on [theta_lo, theta_hi].

    F has to be continuous and strictly increasing on its support.

    """

    family = None

    def __init__(self, theta_lo, theta_hi):
        if not theta_lo < theta_hi:
            raise SupportError('empty type support [{0}, {1}]'.format(theta_lo, theta_hi))
        self.theta_lo = float(theta_lo)
        self.theta_hi = float(theta_hi)

    @abstractmethod
    def cdf(self, y):
        pass

    @abstractmethod
    def inverse_cdf(self, u):
        pass

    def contains(self, theta):
        theta = np.asarray(theta)
        return (theta >= self.theta_lo) & (theta <= self.theta_hi)

    def big_a(self, y, sentinel=True):
        """
        A(y) = -log F(y), with A(theta_lo) = +inf.

        Without ``sentinel`` any y <= theta_lo is an error.

        """
        y = np.asarray(y, dtype=float)
        if np.any(y > self.theta_hi + 1e-12 * max(1.0, abs(self.theta_hi))):
            raise SupportError('belief above the support: {0}'.format(np.max(y)))
        if not sentinel and np.any(y <= self.theta_lo):
            raise SupportError('belief at or below theta_lo={0}'.format(self.theta_lo))
        with np.errstate(divide='ignore'):
            return -np.log(np.where(y <= self.theta_lo, 0.0, self.cdf(y)))

    def big_y(self, a):
        """Y(a) = F^{-1}(e^{-a}), the inverse of A."""
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise SupportError('negative generating value {0}'.format(np.min(a)))
        return self.inverse_cdf(np.exp(-a))

    def sample(self, uniforms):
        return self.inverse_cdf(uniforms)


class UniformTypes(TypeDistribution):
    """
    Uniform prior on [theta_lo, theta_hi].

    >>> float(UniformTypes(0.5, 1.5).cdf(1.0))
    0.5

    """

    family = 'uniform'

    def cdf(self, y):
        width = self.theta_hi - self.theta_lo
        return np.clip((np.asarray(y, dtype=float) - self.theta_lo) / width, 0.0, 1.0)

    def inverse_cdf(self, u):
        return self.theta_lo + np.asarray(u, dtype=float) * (self.theta_hi - self.theta_lo)

    def __repr__(self):
        return 'UniformTypes({0!r}, {1!r})'.format(self.theta_lo, self.theta_hi)


class TabulatedTypes(TypeDistribution):
    """
    A prior given by knots of its distribution function, interpolated
    linearly. The probabilities must rise strictly from 0 to 1.

    """

    family = 'tabulated'

    def __init__(self, knots, probabilities):
        knots = np.asarray(knots, dtype=float)
        probabilities = np.asarray(probabilities, dtype=float)
        if knots.shape != probabilities.shape or knots.size < 2:
            raise SupportError('need matching knots and probabilities')
        if np.any(np.diff(knots) <= 0) or np.any(np.diff(probabilities) <= 0):
            raise SupportError('tabulated distribution not strictly increasing')
        if probabilities[0] != 0.0 or probabilities[-1] != 1.0:
            raise SupportError('tabulated probabilities must run from 0 to 1')
        super(TabulatedTypes, self).__init__(knots[0], knots[-1])
        self.knots = knots
        self.probabilities = probabilities

    def cdf(self, y):
        return np.interp(y, self.knots, self.probabilities)

    def inverse_cdf(self, u):
        return np.interp(u, self.probabilities, self.knots)


def big_a(y, dist):
    return dist.big_a(y)


def big_y(a, dist):
    return dist.big_y(a)


def _l(duopoly, monopoly, y, r):
    return (r * y - duopoly) / (monopoly - y)


def _check_monopoly(monopoly, theta_hi):
    if np.any(monopoly <= theta_hi):
        raise AssumptionError('m(x) <= theta_U = {0}'.format(theta_hi))


def lambda_rate(x, y, resolvents, table):
    """The equilibrium exit intensity lambda(x, y)."""
    x = np.asarray(x, dtype=float)
    monopoly = resolvents.m(x)
    _check_monopoly(monopoly, table.theta_hi)
    rate = _l(resolvents.spec.duopoly_flow(x), monopoly, y, resolvents.r)
    return np.where(x <= table.alpha(y), rate, 0.0)


def _smoothed_rate(duopoly, monopoly, inverse, y, eps, r, theta_lo, theta_hi):
    ramp = np.clip((y - inverse + eps) / eps, 0.0, 1.0)
    edge = np.clip(inverse, theta_lo, theta_hi)
    return np.where(y >= inverse,
                    _l(duopoly, monopoly, y, r),
                    _l(duopoly, monopoly, edge, r) * ramp)


def lambda_eps(x, y, eps, resolvents, table):
    """
    The continuous smoothing of lambda across the graph of alpha:

        l(x, y)                                               if y >= alpha^{-1}(x)
        l(x, alpha^{-1}(x)) (y - alpha^{-1}(x) + eps)^+ / eps   otherwise

    """
    if eps <= 0:
        raise ValueError('smoothing width must be positive')
    x = np.asarray(x, dtype=float)
    monopoly = resolvents.m(x)
    _check_monopoly(monopoly, table.theta_hi)
    return _smoothed_rate(resolvents.spec.duopoly_flow(x), monopoly, table.alpha_inverse(x),
                          np.asarray(y, dtype=float), eps, resolvents.r,
                          table.theta_lo, table.theta_hi)


def lambda_max(resolvents, theta_hi):
    """Upper bound r theta_U / (m_min - theta_U) of the exit intensity."""
    return resolvents.r * theta_hi / (resolvents.m_min - theta_hi)


def _check_ladder(ladder):
    ladder = tuple(float(eps) for eps in ladder)
    if not ladder or ladder[-1] <= 0 or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise IntegrationError('eps ladder must be positive and strictly decreasing: {0}'.format(
            ladder))
    return ladder


def _require_assumptions(model, spec, dist, resolvents):
    report = validate_assumptions(model, spec, dist, resolvents)
    if not report.passed:
        error = AssumptionError('assumptions violated: {0}'.format(
            ', '.join(clause.name for clause in report.failures)))
        error.report = report
        raise error


class ExitGame(object):
    """
    Everything the equilibrium construction needs in one place: the state
    model, the profit flows and their resolvents, the type prior, the
    threshold table and the numerical settings of the belief integration.

    """

    def __init__(self, model, spec, dist, resolvents, table, dt=None, eps_ladder=None,
                 conv_tol=None):
        self.model = model
        self.spec = spec
        self.dist = dist
        self.resolvents = resolvents
        self.table = table
        self.dt = get_float('dt') if dt is None else float(dt)
        self.eps_ladder = _check_ladder(get_floats('eps-ladder') if eps_ladder is None
                                        else eps_ladder)
        self.conv_tol = get_float('conv-tol') if conv_tol is None else float(conv_tol)

    @classmethod
    def build(cls, model, spec, dist, dt=None, eps_ladder=None, conv_tol=None,
              resolvents=None, phi=None, n_thetas=201):
        """
        Assemble a game, checking the standing assumptions first.

        The resolvents and phi default to the closed forms of the capped power
        family under a geometric Brownian motion.

        """
        if resolvents is None:
            if not isinstance(spec, ExampleProfit) or getattr(model, 'kind', None) != 'GBM':
                raise ValueError('resolvents must be supplied outside the closed-form example')
            resolvents = example_resolvents(model, spec)
        _require_assumptions(model, spec, dist, resolvents)
        phi = phi or fundamental_decreasing(model, spec.r)
        table = build_threshold_table(resolvents, phi, dist.theta_lo, dist.theta_hi, n_thetas)
        return cls(model, spec, dist, resolvents, table, dt, eps_ladder, conv_tol)

    def with_types(self, dist, n_thetas=51):
        """The same game with a different type prior, checked like `build`."""
        _require_assumptions(self.model, self.spec, dist, self.resolvents)
        table = build_threshold_table(self.resolvents, self.table.phi, dist.theta_lo,
                                      dist.theta_hi, n_thetas)
        return ExitGame(self.model, self.spec, dist, self.resolvents, table, self.dt,
                        self.eps_ladder, self.conv_tol)

    @property
    def r(self):
        return self.spec.r

    @property
    def lambda_max(self):
        return lambda_max(self.resolvents, self.dist.theta_hi)

    def noise(self, seed, horizon, n_paths=1):
        return NoiseGrid.for_horizon(seed, self.dt, horizon, n_paths)

    def check_type(self, theta):
        if not np.all(self.dist.contains(theta)):
            raise SupportError('type {0} outside [{1}, {2}]'.format(
                theta, self.dist.theta_lo, self.dist.theta_hi))

    def __repr__(self):
        return 'ExitGame({0!r}, {1!r}, {2!r}, dt={3!r})'.format(
            self.model, self.spec, self.dist, self.dt)


BeliefPath = namedtuple('BeliefPath', ['times', 'a_values', 'epsilon_used', 'converged'])


def integrate_beliefs(game, states, a0=0.0, eps_ladder=None, conv_tol=None):
    """
    Integrate the generating process along every row of a state matrix.

    All rungs of the eps ladder are advanced together with the explicit
    first-order scheme A_{n+1} = A_n + lambda^eps(X_n, Y(A_n)) dt. Returns
    the matrix of A for the smallest eps and one convergence flag per path,
    set when the last two rungs differ by less than ``conv_tol`` in sup norm.

    Raises `IntegrationError` if a smaller eps ever yields a larger A by
    more than 2 lambda_max dt.

    """
    ladder = _check_ladder(game.eps_ladder if eps_ladder is None else eps_ladder)
    conv_tol = game.conv_tol if conv_tol is None else conv_tol
    if a0 < 0:
        raise SupportError('negative initial generating value {0}'.format(a0))
    states = np.atleast_2d(states)
    n_paths, n_times = states.shape
    dt, r, dist = game.dt, game.r, game.dist
    duopoly = game.spec.duopoly_flow(states)
    monopoly = game.resolvents.m(states)
    _check_monopoly(monopoly, dist.theta_hi)
    inverse = game.table.alpha_inverse(states)
    eps = np.reshape(ladder, (-1, 1))
    slack = 2 * game.lambda_max * dt

    current = np.full((len(ladder), n_paths), float(a0))
    a_values = np.empty((n_paths, n_times))
    a_values[:, 0] = a0
    spread = np.zeros(n_paths)
    excess = 0.0
    for n in range(n_times - 1):
        rate = _smoothed_rate(duopoly[:, n], monopoly[:, n], inverse[:, n],
                              dist.big_y(current), eps, r, dist.theta_lo, dist.theta_hi)
        current = current + rate * dt
        a_values[:, n + 1] = current[-1]
        if len(ladder) > 1:
            np.maximum(spread, np.abs(current[-1] - current[-2]), out=spread)
            excess = max(excess, float(np.max(current[1:] - current[:-1])))
    if excess > slack:
        raise IntegrationError('belief not monotone in eps: excess {0:.3g} > slack {1:.3g}'.format(
            excess, slack))
    converged = spread < conv_tol
    if not np.all(converged):
        logger.warning('%d of %d belief paths not converged (max rung difference %.3g)',
                       np.count_nonzero(~converged), n_paths, float(np.max(spread)))
    else:
        logger.debug('belief ladder converged, max rung difference %.3g', float(np.max(spread)))
    return a_values, converged


def integrate_belief(game, path, a0=0.0, eps_ladder=None, conv_tol=None):
    """Integrate the generating process along one sample path."""
    a_values, converged = integrate_beliefs(game, path.states, a0, eps_ladder, conv_tol)
    ladder = game.eps_ladder if eps_ladder is None else eps_ladder
    return BeliefPath(path.times, a_values[0], float(ladder[-1]), bool(converged[0]))


def belief_y(belief, dist):
    """The belief Y(A_t) along a belief path."""
    return dist.big_y(belief.a_values)


def exit_indices(game, theta, states, a_values):
    """
    Grid indices of the exit of type ``theta`` in both equivalent forms.

    The belief form is the left end n of the first step with
    A_{n+1} > A(theta); the rectangular form is the first n with
    A_n >= A(theta) and X_n <= alpha(theta). Paths that never exit get the
    number of grid times. ``theta`` is either one type or one type per path.

    """
    theta = np.reshape(np.asarray(theta, dtype=float), (-1, 1))
    threshold = game.dist.big_a(theta)
    states = np.atleast_2d(states)
    a_values = np.atleast_2d(a_values)
    n_times = states.shape[1]
    by_belief = first_true(a_values[:, 1:] > threshold)
    by_belief = np.where(by_belief >= n_times - 1, n_times, by_belief)
    by_rect = first_true((a_values >= threshold) & (states <= game.table.alpha(theta)))
    return by_belief, by_rect


def index_times(indices, times):
    """Grid times of indices, with +inf for the never-exit sentinel."""
    indices = np.asarray(indices)
    return np.where(indices < len(times), times[np.minimum(indices, len(times) - 1)], np.inf)


def exit_time(game, theta, belief, path):
    """Exit time of type ``theta`` as (tau_A, tau_rect); +inf if not reached."""
    game.check_type(theta)
    by_belief, by_rect = exit_indices(game, theta, path.states, belief.a_values)
    return (float(index_times(by_belief, path.times)[0]),
            float(index_times(by_rect, path.times)[0]))


def exit_schedule(game, belief, thetas):
    """
    Exit times tau_hat(theta) of a grid of types, all read off one belief
    path by inverting its t-Y graph.

    """
    thetas = np.asarray(thetas, dtype=float)
    game.check_type(thetas)
    a_values = np.asarray(belief.a_values)
    n_times = len(a_values)
    targets = game.dist.big_a(thetas)
    crossing = np.searchsorted(a_values[1:], targets, side='right')
    return np.where(crossing < n_times - 1, belief.times[np.minimum(crossing, n_times - 1)],
                    np.inf)


class Exiter(Enum):
    FIRST = '1'
    SECOND = '2'
    BOTH = 'both'
    NONE = 'none'


GameOutcome = namedtuple('GameOutcome', ['exit_time_1', 'exit_time_2', 'payoff_1', 'payoff_2',
                                         'first_exiter'])


def game_outcome(game, path, belief, theta1, theta2):
    """
    Play both types against one path and its belief.

    Both players earn the duopoly flow up to the first exit. The leaver
    collects its type, the stayer m(X) at that time; exits at the same grid
    time give both players their own type. Without an exit before the end of
    the grid the payoffs are the truncated duopoly profits.

    """
    game.check_type([theta1, theta2])
    times = path.times
    n_times = len(times)
    index_1 = int(exit_indices(game, theta1, path.states, belief.a_values)[1][0])
    index_2 = int(exit_indices(game, theta2, path.states, belief.a_values)[1][0])
    first = min(index_1, index_2)
    end = min(first, n_times - 1)
    discount = np.exp(-game.r * times)
    flow = discount[:end + 1] * game.spec.duopoly_flow(path.states[:end + 1])
    profit = float(trapezoid(flow, dx=game.dt)) if end > 0 else 0.0
    payoff_1 = payoff_2 = profit
    if first == n_times:
        exiter = Exiter.NONE
    else:
        terminal = discount[first]
        stayer = float(game.resolvents.m(path.states[first])) * terminal
        if index_1 == index_2:
            exiter = Exiter.BOTH
            payoff_1 += theta1 * terminal
            payoff_2 += theta2 * terminal
        elif index_1 < index_2:
            exiter = Exiter.FIRST
            payoff_1 += theta1 * terminal
            payoff_2 += stayer
        else:
            exiter = Exiter.SECOND
            payoff_1 += stayer
            payoff_2 += theta2 * terminal
    tau_1, tau_2 = index_times([index_1, index_2], times)
    return GameOutcome(float(tau_1), float(tau_2), payoff_1, payoff_2, exiter)


def simulate_game(game, x0, theta1, theta2, seed, horizon, path_index=0):
    """Simulate one path of the state and play the equilibrium on it."""
    noise = game.noise(seed, horizon, path_index + 1)
    states = simulate_paths(game.model, x0, noise, path_index, path_index + 1)[0]
    path = SamplePath(noise.times, states)
    belief = integrate_belief(game, path)
    outcome = game_outcome(game, path, belief, theta1, theta2)
    logger.info('game on path %d: exits at %g and %g, %s', path_index, outcome.exit_time_1,
                outcome.exit_time_2, outcome.first_exiter.value)
    return outcome
