"""
Two limiting regimes of the exit game.

With the state frozen at a level below every threshold, the exit intensity
loses its indicator and the belief follows a smooth ordinary differential
equation; every type then leaves at a deterministic time.

When the type support collapses onto a single value theta, the equilibrium
becomes a mixed strategy: the player leaves at the rate
lambda(X_t, theta) while X_t <= alpha(theta), realised by comparing the
accumulated hazard with an independent uniform draw.

"""

from collections import namedtuple
import logging
import math

import numpy as np
from scipy.stats import ks_2samp

from .diffusion import simulate_paths
from .equilibrium import UniformTypes, exit_indices, index_times, integrate_beliefs, lambda_rate
from .montecarlo import first_true
from .payoffs import AssumptionError


logger = logging.getLogger(__name__)


DeterministicSchedule = namedtuple('DeterministicSchedule', ['thetas', 'exit_times', 'x_fixed'])


def deterministic_schedule(game, x_fixed, dt=1e-4, thetas=None, max_time=1e3):
    """
    Exit times of all types when the state stays at ``x_fixed``.

    Integrates dA/dt = (r Y(A) - D(x)) / (m(x) - Y(A)) from A = 0 with the
    classic fourth-order Runge-Kutta scheme and reads off tau_hat(theta) by
    interpolating the time at which A reaches A(theta). The default types
    are 201 points of the support without theta_lo, which never leaves.

    """
    dist, r = game.dist, game.r
    duopoly = float(game.spec.duopoly_flow(x_fixed))
    if not duopoly / r < dist.theta_lo:
        raise AssumptionError('D(x)/r = {0:.6g} is not below theta_lo = {1:.6g}'.format(
            duopoly / r, dist.theta_lo))
    monopoly = float(game.resolvents.m(x_fixed))
    if thetas is None:
        thetas = np.linspace(dist.theta_lo, dist.theta_hi, 202)[1:]
    thetas = np.asarray(thetas, dtype=float)
    game.check_type(thetas)
    targets = dist.big_a(thetas)
    target = float(np.max(targets))
    if not math.isfinite(target):
        raise ValueError('theta_lo never leaves in the deterministic game')

    def rate(a):
        y = float(dist.inverse_cdf(math.exp(-a)))
        return (r * y - duopoly) / (monopoly - y)

    a_values = [0.0]
    t = 0.0
    a = 0.0
    while a <= target:
        if t > max_time:
            raise AssumptionError('belief did not reach A={0:.6g} by t={1:g}'.format(target, t))
        k1 = rate(a)
        k2 = rate(a + 0.5 * dt * k1)
        k3 = rate(a + 0.5 * dt * k2)
        k4 = rate(a + dt * k3)
        a += dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        t += dt
        a_values.append(a)
    a_values = np.array(a_values)
    times = np.arange(len(a_values)) * dt
    exit_times = np.interp(targets, a_values, times)
    logger.info('deterministic schedule at x=%g: %d steps, latest exit %g', x_fixed,
                len(times) - 1, float(np.max(exit_times)))
    return DeterministicSchedule(thetas, exit_times, float(x_fixed))


class RandomizedExit(object):
    """
    The mixed exit strategy of the degenerate type ``theta``: hazard
    lambda(x, theta) and the uniform draw that realises it.

    """

    def __init__(self, game, theta, uniform_draw):
        if not 0 < uniform_draw <= 1:
            raise ValueError('uniform draw must lie in (0, 1]')
        game.check_type(theta)
        self.game = game
        self.theta = float(theta)
        self.uniform_draw = float(uniform_draw)

    def rate(self, x):
        return lambda_rate(x, self.theta, self.game.resolvents, self.game.table)

    def exit_index(self, states):
        return mixed_exit_indices(self.game, states, self.theta, self.uniform_draw)[0]


def mixed_exit_indices(game, states, theta, uniforms):
    """
    Grid indices of the mixed-strategy exit on every row of ``states``.

    The accumulated hazard is A~_{n+1} = sum_{k<=n} lambda(X_k, theta) dt and
    the exit is the first n with exp(-A~_{n+1}) < u.

    """
    states = np.atleast_2d(states)
    uniforms = np.reshape(np.asarray(uniforms, dtype=float), (-1, 1))
    hazard = np.cumsum(lambda_rate(states, theta, game.resolvents, game.table) * game.dt, axis=1)
    indices = first_true(np.exp(-hazard[:, :-1]) < uniforms)
    return np.where(indices >= states.shape[1] - 1, states.shape[1], indices)


def mixed_strategy_exit(game, path, theta, uniform_draw):
    """Exit time of the mixed strategy along one sample path; +inf if never."""
    index = RandomizedExit(game, theta, uniform_draw).exit_index(path.states)
    return float(index_times(index, path.times))


KSResult = namedtuple('KSResult', ['width', 'statistic', 'pvalue'])


def degenerate_limit_ks(game, theta, widths, noise, x0, n_paths=None):
    """
    Distance between the exit-time distribution of a type ``theta`` player
    in the full game with support [theta - h, theta + h] and the mixed
    strategy of the degenerate game, for each width h.

    Both use one bank of state paths and one set of uniform draws: the draw
    u sets the full-game type F_h^{-1}(u) and the mixed-strategy device.
    Exits after the horizon are censored at horizon + dt before the
    two-sample Kolmogorov-Smirnov comparison.

    """
    n_paths = n_paths or noise.n_paths
    noise = noise.with_paths(n_paths)
    states = simulate_paths(game.model, x0, noise, 0, n_paths)
    uniforms = noise.uniforms(0, n_paths, stream=2)
    censor = noise.horizon + noise.step
    mixed = index_times(mixed_exit_indices(game, states, theta, uniforms), noise.times)
    mixed = np.minimum(mixed, censor)
    results = []
    for width in widths:
        narrow = game.with_types(UniformTypes(theta - width, theta + width))
        a_values, _ = integrate_beliefs(narrow, states)
        types = narrow.dist.sample(uniforms)
        full = index_times(exit_indices(narrow, types, states, a_values)[1], noise.times)
        full = np.minimum(full, censor)
        test = ks_2samp(full, mixed)
        logger.info('degenerate limit h=%g: KS %.4f (p=%.3g)', width, test.statistic,
                    test.pvalue)
        results.append(KSResult(float(width), float(test.statistic), float(test.pvalue)))
    return results
