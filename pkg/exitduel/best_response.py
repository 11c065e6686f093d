"""
Best responses against the equilibrium opponent.

Given that the opponent plays the equilibrium strategy, a player of type
theta choosing the stopping time sigma receives

    J = E[ int_0^sigma e^{-rs-A_s} D(X_s) ds + theta e^{-r sigma - A_sigma}
           + int_0^sigma e^{-rs} m(X_s) d(-e^{-A_s}) ]

where the belief A_s carries the probability e^{-A_s} that the opponent is
still in the market. `payoff_integrated` evaluates this representation,
`payoff_sampled` evaluates the same payoff by drawing the opponent's type
and playing the game out. The audits compare the equilibrium rule against
families of deviations on common random numbers.

"""

from abc import ABCMeta, abstractmethod
from collections import namedtuple
from enum import Enum
import logging
import math

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .config import get_float
from .diffusion import simulate_paths
from .equilibrium import exit_indices, integrate_beliefs
from .montecarlo import estimate, first_true, map_blocks, pooled_stderr
from .payoffs import check_tail


logger = logging.getLogger(__name__)


class StoppingRule(metaclass=ABCMeta):
    """
    A stopping rule measurable with respect to the grid data (X_n, A_n).

    """

    @abstractmethod
    def stopping_indices(self, game, states, a_values):
        """
        First grid index at which the rule stops on each path, or the number
        of grid times if it never stops.

        """
        pass

    @property
    @abstractmethod
    def descriptor(self):
        pass

    def __repr__(self):
        return self.descriptor

    def __eq__(self, other):
        return type(self) is type(other) and self.descriptor == other.descriptor

    def __hash__(self):
        return hash(self.descriptor)


class Immediate(StoppingRule):
    """Stop at time zero."""

    def stopping_indices(self, game, states, a_values):
        return np.zeros(states.shape[0], dtype=int)

    @property
    def descriptor(self):
        return 'Immediate'


class Never(StoppingRule):

    def stopping_indices(self, game, states, a_values):
        return np.full(states.shape[0], states.shape[1], dtype=int)

    @property
    def descriptor(self):
        return 'Never'


class RectRule(StoppingRule):
    """Stop at the first time with X <= x_thresh and A >= a_thresh."""

    def __init__(self, x_thresh, a_thresh):
        self.x_thresh = float(x_thresh)
        self.a_thresh = float(a_thresh)

    def stopping_indices(self, game, states, a_values):
        return first_true((states <= self.x_thresh) & (a_values >= self.a_thresh))

    @property
    def descriptor(self):
        return 'RectRule(x={0:.6g}, a={1:.6g})'.format(self.x_thresh, self.a_thresh)


class SinglePlayerRule(StoppingRule):
    """Stop at the single-player threshold alpha(theta), ignoring the belief."""

    def __init__(self, theta):
        self.theta = float(theta)

    def stopping_indices(self, game, states, a_values):
        return first_true(states <= game.table.alpha(self.theta))

    @property
    def descriptor(self):
        return 'SinglePlayerRule(theta={0:.6g})'.format(self.theta)


class TimeShift(StoppingRule):
    """Stop ``delay`` time units after the base rule would."""

    def __init__(self, base, delay):
        if delay < 0:
            raise ValueError('delay must be non-negative')
        self.base = base
        self.delay = float(delay)

    def stopping_indices(self, game, states, a_values):
        n_times = states.shape[1]
        base = self.base.stopping_indices(game, states, a_values)
        shifted = base + int(round(self.delay / game.dt))
        return np.where((base >= n_times) | (shifted >= n_times), n_times, shifted)

    @property
    def descriptor(self):
        return 'TimeShift({0}, delay={1:.6g})'.format(self.base.descriptor, self.delay)


def equilibrium_rule(game, theta):
    """The candidate best response RectRule(alpha(theta), A(theta))."""
    return RectRule(game.table.alpha(theta), game.dist.big_a(theta))


def default_deviations(game, theta):
    """
    The standard deviation family around the equilibrium rule of type theta:
    rectangular rules with perturbed thresholds, the two trivial rules and
    delayed versions of the equilibrium and of the perturbed-x rules.

    """
    x_star = float(game.table.alpha(theta))
    a_star = float(game.dist.big_a(theta))
    x_factors = (0.8, 0.9, 1.1, 1.2)
    rules = [RectRule(fx * x_star, fa * a_star) for fx in x_factors for fa in (0.8, 1.0, 1.2)]
    rules.extend([Immediate(), Never()])
    delays = (0.05, 0.2)
    rules.extend(TimeShift(equilibrium_rule(game, theta), delay) for delay in delays)
    rules.extend(TimeShift(RectRule(fx * x_star, a_star), delay)
                 for fx in x_factors for delay in delays)
    return rules


def _tail_bound(game):
    sup_d, sup_m = game.spec.flow_bounds()
    return (sup_m + sup_d) / game.r


def _truncation_check(game, indices, n_times, horizon, tail_tol):
    if np.any(indices >= n_times):
        check_tail(horizon, game.r, _tail_bound(game), tail_tol)


def _integrated_samples(game, states, a_values, rules, theta, horizon, tail_tol):
    """Per-path values of the integrated payoff, one row per rule."""
    n_paths, n_times = states.shape
    times = np.arange(n_times) * game.dt
    discount = np.exp(-game.r * times)
    survival = np.exp(-a_values)
    weight = discount * survival
    running = cumulative_trapezoid(weight * game.spec.duopoly_flow(states), dx=game.dt, axis=1,
                                   initial=0.0)
    jumps = (discount[:-1] * game.resolvents.m(states[:, :-1])
             * (survival[:, :-1] - survival[:, 1:]))
    jumped = np.zeros((n_paths, n_times))
    np.cumsum(jumps, axis=1, out=jumped[:, 1:])
    rows = np.arange(n_paths)
    values = np.empty((len(rules), n_paths))
    for k, rule in enumerate(rules):
        indices = rule.stopping_indices(game, states, a_values)
        _truncation_check(game, indices, n_times, horizon, tail_tol)
        end = np.minimum(indices, n_times - 1)
        terminal = np.where(indices < n_times, theta * weight[rows, end], 0.0)
        values[k] = running[rows, end] + terminal + jumped[rows, end]
    return values


def _prepare(game, noise, n_paths, tail_tol):
    if not math.isclose(noise.step, game.dt, rel_tol=1e-12):
        raise ValueError('noise step {0} differs from the game step {1}'.format(
            noise.step, game.dt))
    tail_tol = get_float('tail-tol') if tail_tol is None else tail_tol
    n_paths = n_paths or noise.n_paths
    return noise.with_paths(n_paths), n_paths, tail_tol


def _block_beliefs(game, x0, a0, noise, start, stop):
    states = simulate_paths(game.model, x0, noise, start, stop)
    a_values, _ = integrate_beliefs(game, states, a0)
    return states, a_values


def _rule_samples(game, x0, a0, rules, theta, noise, n_paths, tail_tol):
    """Per-path integrated payoffs of several rules on common paths, one row per rule."""
    game.check_type(theta)
    noise, n_paths, tail_tol = _prepare(game, noise, n_paths, tail_tol)

    def block(start, stop):
        states, a_values = _block_beliefs(game, x0, a0, noise, start, stop)
        return _integrated_samples(game, states, a_values, rules, theta, noise.horizon, tail_tol)

    return np.concatenate(map_blocks(block, n_paths), axis=1)


def _estimate_rules(game, x0, a0, rules, theta, noise, n_paths, tail_tol):
    samples = _rule_samples(game, x0, a0, rules, theta, noise, n_paths, tail_tol)
    return [estimate(row) for row in samples]


def payoff_integrated(game, x0, a0, rule, theta, noise, n_paths=None, tail_tol=None):
    """
    Estimate of the integrated payoff of ``rule`` for type ``theta`` with the
    belief started at ``a0``.

    Rules that have not stopped by the end of the grid are truncated there,
    which requires e^{-rT} (sup m + sup D / r) below ``tail_tol``.

    """
    return _estimate_rules(game, x0, a0, [rule], theta, noise, n_paths, tail_tol)[0]


def payoff_sampled(game, x0, rule, theta, noise, n_paths=None, tail_tol=None, opponent='rect'):
    """
    Estimate of the payoff of ``rule`` against an opponent whose type is
    drawn from the prior on every path.

    The opponent leaves by the rectangular form of the equilibrium strategy,
    or with ``opponent='belief'`` at the first crossing of A(theta_2). The
    player collects theta on {sigma <= tau_2} and m(X) at tau_2 otherwise.

    """
    if opponent not in ('rect', 'belief'):
        raise ValueError('unknown opponent strategy form {0!r}'.format(opponent))
    game.check_type(theta)
    noise, n_paths, tail_tol = _prepare(game, noise, n_paths, tail_tol)
    discount = np.exp(-game.r * noise.times)

    def block(start, stop):
        states, a_values = _block_beliefs(game, x0, 0.0, noise, start, stop)
        n_times = states.shape[1]
        rows = np.arange(states.shape[0])
        opponents = game.dist.sample(noise.uniforms(start, stop, stream=1))
        by_belief, by_rect = exit_indices(game, opponents, states, a_values)
        tau_2 = by_rect if opponent == 'rect' else by_belief
        sigma = rule.stopping_indices(game, states, a_values)
        first = np.minimum(sigma, tau_2)
        _truncation_check(game, first, n_times, noise.horizon, tail_tol)
        running = cumulative_trapezoid(discount * game.spec.duopoly_flow(states), dx=noise.step,
                                       axis=1, initial=0.0)
        end = np.minimum(first, n_times - 1)
        leave = discount[end] * np.where(sigma <= tau_2, theta,
                                         game.resolvents.m(states[rows, end]))
        return running[rows, end] + np.where(first < n_times, leave, 0.0)

    return estimate(np.concatenate(map_blocks(block, n_paths)))


def shifted_payoff(game, x0, a0, rule, theta, noise, n_paths=None, tail_tol=None):
    """
    Estimate of the payoff in excess of stopping at once,

        int_0^sigma e^{-rs-A_s} (D - r theta) ds
            + int_0^sigma e^{-rs} (m - theta) d(-e^{-A_s})

    which equals the integrated payoff minus theta e^{-a0} up to quadrature.

    """
    game.check_type(theta)
    noise, n_paths, tail_tol = _prepare(game, noise, n_paths, tail_tol)
    discount = np.exp(-game.r * noise.times)

    def block(start, stop):
        states, a_values = _block_beliefs(game, x0, a0, noise, start, stop)
        n_paths, n_times = states.shape
        survival = np.exp(-a_values)
        excess_flow = discount * survival * (game.spec.duopoly_flow(states) - game.r * theta)
        running = cumulative_trapezoid(excess_flow, dx=noise.step, axis=1, initial=0.0)
        jumps = (discount[:-1] * (game.resolvents.m(states[:, :-1]) - theta)
                 * (survival[:, :-1] - survival[:, 1:]))
        jumped = np.zeros((n_paths, n_times))
        np.cumsum(jumps, axis=1, out=jumped[:, 1:])
        indices = rule.stopping_indices(game, states, a_values)
        _truncation_check(game, indices, n_times, noise.horizon, tail_tol)
        rows = np.arange(n_paths)
        end = np.minimum(indices, n_times - 1)
        return running[rows, end] + jumped[rows, end]

    return estimate(np.concatenate(map_blocks(block, n_paths)))


Deviation = namedtuple('Deviation', ['rule', 'estimate', 'stderr', 'margin'])


class AuditReport(object):
    """
    Outcome of a best-response audit: the equilibrium value, every deviation
    value and the deviations that beat the equilibrium significantly.

    """

    def __init__(self, theta, x0, equilibrium_value, deviation_values, significance):
        self.theta = theta
        self.x0 = x0
        self.equilibrium_value = equilibrium_value
        self.deviation_values = list(deviation_values)
        self.significance = significance

    @property
    def violations(self):
        return [deviation for deviation in self.deviation_values
                if deviation.estimate - self.equilibrium_value.estimate
                > self.significance * deviation.margin]

    @property
    def passed(self):
        return not self.violations

    def as_dict(self):
        def entry(deviation):
            return {'rule': deviation.rule.descriptor, 'estimate': deviation.estimate,
                    'stderr': deviation.stderr, 'pooled_stderr': deviation.margin}

        return {
            'theta': self.theta,
            'x0': self.x0,
            'significance': self.significance,
            'equilibrium': {'estimate': self.equilibrium_value.estimate,
                            'stderr': self.equilibrium_value.stderr},
            'deviations': [entry(deviation) for deviation in self.deviation_values],
            'violations': [entry(deviation) for deviation in self.violations],
            'passed': self.passed,
        }


def audit_best_response(game, x0, theta, noise, deviations=None, n_paths=None,
                        significance=None, tail_tol=None):
    """
    Compare the equilibrium rule of type ``theta`` with a family of
    deviations on common paths. A deviation wins when its mean exceeds the
    equilibrium value by more than ``significance`` pooled standard errors.

    """
    deviations = default_deviations(game, theta) if deviations is None else list(deviations)
    if not deviations:
        raise ValueError('empty deviation set')
    significance = get_float('significance') if significance is None else significance
    rules = [equilibrium_rule(game, theta)] + deviations
    values = _estimate_rules(game, x0, 0.0, rules, theta, noise, n_paths, tail_tol)
    equilibrium_value = values[0]
    report = AuditReport(theta, x0, equilibrium_value, [
        Deviation(rule, value.estimate, value.stderr, pooled_stderr(equilibrium_value, value))
        for rule, value in zip(deviations, values[1:])], significance)
    logger.info('audit theta=%g: equilibrium %.6g +- %.2g, %d of %d deviations win',
                theta, equilibrium_value.estimate, equilibrium_value.stderr,
                len(report.violations), len(deviations))
    return report


class Region(Enum):
    STOP = 'STOP'
    CONTINUE = 'CONTINUE'


RegionMap = namedtuple('RegionMap', ['x_grid', 'a_grid', 'labels', 'values', 'stderrs'])


def classify_region(game, theta, x_grid, a_grid, noise, n_paths=None, rules=None,
                    significance=None, tail_tol=None, atol=1e-9):
    """
    Classify states (x, a) of the best-response problem of type ``theta``.

    At each cell the belief is restarted at ``a`` and the excess of every
    rule over stopping at once is estimated path by path against the
    `Immediate` rule. A cell is STOP when the best excess is within
    ``significance`` standard errors (plus ``atol``) of zero; rules that stop
    at once have an excess of exactly zero.

    """
    significance = get_float('significance') if significance is None else significance
    if rules is None:
        rules = [equilibrium_rule(game, theta)] + default_deviations(game, theta)
    x_grid = np.asarray(x_grid, dtype=float)
    a_grid = np.asarray(a_grid, dtype=float)
    labels = np.empty((len(x_grid), len(a_grid)), dtype=object)
    values = np.empty(labels.shape)
    stderrs = np.empty(labels.shape)
    for i, x in enumerate(x_grid):
        for j, a in enumerate(a_grid):
            samples = _rule_samples(game, x, a, list(rules) + [Immediate()], theta, noise,
                                    n_paths, tail_tol)
            excess = [estimate(row) for row in samples[:-1] - samples[-1]]
            best = max(excess, key=lambda value: value.estimate)
            values[i, j] = best.estimate
            stderrs[i, j] = best.stderr
            stop = best.estimate <= significance * best.stderr + atol * max(1.0, theta)
            labels[i, j] = Region.STOP if stop else Region.CONTINUE
        logger.debug('region row x=%g: %s', x, ' '.join(label.value[0] for label in labels[i]))
    logger.info('region for theta=%g: %d of %d cells STOP', theta,
                sum(label is Region.STOP for label in labels.flat), labels.size)
    return RegionMap(x_grid, a_grid, labels, values, stderrs)


def expected_labels(game, theta, x_grid, a_grid):
    """
    The labels the equilibrium predicts on a grid: STOP on the rectangle
    x <= alpha(theta), a >= A(theta); CONTINUE where x > alpha(theta) or
    where x < alpha(Y(a)) with a < A(theta); None elsewhere.

    """
    x_star = float(game.table.alpha(theta))
    a_star = float(game.dist.big_a(theta))
    labels = np.empty((len(x_grid), len(a_grid)), dtype=object)
    for j, a in enumerate(a_grid):
        x_belief = float(game.table.alpha(game.dist.big_y(a)))
        for i, x in enumerate(x_grid):
            if x <= x_star and a >= a_star:
                labels[i, j] = Region.STOP
            elif x > x_star or (x < x_belief and a < a_star):
                labels[i, j] = Region.CONTINUE
            else:
                labels[i, j] = None
    return labels


RegionCheck = namedtuple('RegionCheck', ['mismatches', 'excused', 'monotone', 'passed'])


def check_region(game, theta, region, max_excused=2):
    """
    Compare a classified grid with `expected_labels`.

    Up to ``max_excused`` mismatches are tolerated when they sit next to a
    cell with another predicted label. ``monotone`` holds when STOP at
    (x, a) implies STOP at every grid cell with smaller x and larger a.

    """
    expected = expected_labels(game, theta, region.x_grid, region.a_grid)
    labels = region.labels
    n_x, n_a = labels.shape
    mismatches, excused = [], []
    for i in range(n_x):
        for j in range(n_a):
            if expected[i, j] is None or labels[i, j] is expected[i, j]:
                continue
            mismatches.append((i, j))
            block = expected[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
            if any(label is not expected[i, j] for label in block.flat):
                excused.append((i, j))
    stop = labels == Region.STOP
    monotone = all(np.all(stop[:i + 1, j:]) for i in range(n_x) for j in range(n_a)
                   if stop[i, j])
    passed = monotone and len(excused) == len(mismatches) <= max_excused
    if mismatches:
        logger.warning('region for theta=%g: %d mismatched cells, %d next to the boundary',
                       theta, len(mismatches), len(excused))
    return RegionCheck(mismatches, excused, monotone, passed)
