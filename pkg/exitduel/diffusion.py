"""
The one-dimensional state diffusion driving the exit game.

Two kinds of models are provided: a geometric Brownian motion, which is
sampled exactly from its log-normal transition, and a general diffusion given
by drift and volatility functions, which is sampled with the Euler-Maruyama
scheme. Both draw their Gaussian increments from a `NoiseGrid`, so that
comparisons which only vary model or initial-state parameters can share the
same noise (common random numbers).

Every path index has its own random stream derived from ``(seed,
path_index)``, so a path does not depend on how many other paths are
simulated or in which order.

"""

from abc import ABCMeta, abstractmethod
from collections import namedtuple
import logging
import math

import numpy as np


logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """Raised when a state leaves (or starts outside) the model's domain."""
    pass


SamplePath = namedtuple('SamplePath', ['times', 'states'])


class NoiseGrid(object):
    """
    Standard-normal increments on a uniform time grid.

    The increments of path ``i`` are drawn from the stream seeded with
    ``(seed, i)``. Additional per-path uniform draws (opponent types,
    randomisation devices) come from the independent streams ``(seed, i,
    stream)`` with ``stream >= 1``.

    """

    def __init__(self, seed, step, n_steps, n_paths=1):
        if step <= 0:
            raise ValueError('time step must be positive')
        if n_steps < 1 or n_paths < 1:
            raise ValueError('need at least one step and one path')
        self.seed = int(seed)
        self.step = float(step)
        self.n_steps = int(n_steps)
        self.n_paths = int(n_paths)

    @classmethod
    def for_horizon(cls, seed, step, horizon, n_paths=1):
        """Noise grid covering ``[0, horizon]`` with the given step."""
        return cls(seed, step, int(round(horizon / step)), n_paths)

    @property
    def horizon(self):
        return self.step * self.n_steps

    @property
    def times(self):
        return np.arange(self.n_steps + 1) * self.step

    def _stream(self, path_index, stream=0):
        return np.random.default_rng([self.seed, int(path_index), int(stream)])

    def row(self, path_index):
        """Increments of a single path."""
        return self._stream(path_index).standard_normal(self.n_steps)

    def block(self, start, stop):
        """Increments of the paths ``start, ..., stop - 1`` as a matrix."""
        increments = np.empty((stop - start, self.n_steps))
        for k, path_index in enumerate(range(start, stop)):
            increments[k] = self.row(path_index)
        return increments

    @property
    def increments(self):
        return self.block(0, self.n_paths)

    def uniforms(self, start, stop, stream=1):
        """One uniform draw in (0, 1] per path from an independent stream."""
        return np.array([1.0 - self._stream(i, stream).random() for i in range(start, stop)])

    def with_paths(self, n_paths):
        """The same grid and seed with a different number of paths."""
        return NoiseGrid(self.seed, self.step, self.n_steps, n_paths)


class FixedNoise(NoiseGrid):
    """
    A noise grid over an explicitly given increment matrix.

    Uniform draws can be given as well; otherwise they come from the seeded
    streams like in `NoiseGrid`.

    """

    def __init__(self, increments, step, uniforms=None, seed=0):
        increments = np.atleast_2d(np.asarray(increments, dtype=float))
        super(FixedNoise, self).__init__(seed, step, increments.shape[1], increments.shape[0])
        self._increments = increments
        self._uniforms = None if uniforms is None else np.asarray(uniforms, dtype=float)

    @classmethod
    def zeros(cls, step, n_steps, n_paths=1):
        return cls(np.zeros((n_paths, n_steps)), step)

    def row(self, path_index):
        return self._increments[path_index].copy()

    def block(self, start, stop):
        return self._increments[start:stop].copy()

    def uniforms(self, start, stop, stream=1):
        if self._uniforms is None:
            return super(FixedNoise, self).uniforms(start, stop, stream)
        return self._uniforms[start:stop].copy()

    def with_paths(self, n_paths):
        return FixedNoise(self._increments[:n_paths], self.step, self._uniforms, self.seed)


class DiffusionModel(metaclass=ABCMeta):
    """
    A one-dimensional diffusion dX = mu(X) dt + vol(X) dW on the open
    interval (domain_lo, domain_hi), whose boundaries are not attainable.

    """

    kind = None
    domain_lo = -math.inf
    domain_hi = math.inf

    @abstractmethod
    def drift(self, x):
        """Drift per unit time"""
        pass

    @abstractmethod
    def volatility(self, x):
        """Volatility per square-root time"""
        pass

    @abstractmethod
    def propagate(self, x0, step, increments, first_path=0):
        """
        Map initial states and a matrix of standard-normal increments (paths x
        steps) to the matrix of states (paths x steps + 1).

        """
        pass

    def contains(self, x):
        x = np.asarray(x)
        return (x > self.domain_lo) & (x < self.domain_hi)


class GeometricBrownianMotion(DiffusionModel):
    """
    dX = mu X dt + b X dW on (0, infinity), sampled with the exact
    multiplicative transition, so that paths stay positive and are strictly
    increasing in the initial state for a fixed noise row.

    """

    kind = 'GBM'
    domain_lo = 0.0

    def __init__(self, mu_coef, vol_coef):
        if vol_coef <= 0:
            raise DomainError('volatility coefficient must be positive')
        self.mu_coef = float(mu_coef)
        self.vol_coef = float(vol_coef)

    def drift(self, x):
        return self.mu_coef * np.asarray(x)

    def volatility(self, x):
        return self.vol_coef * np.asarray(x)

    def propagate(self, x0, step, increments, first_path=0):
        log_steps = ((self.mu_coef - 0.5 * self.vol_coef ** 2) * step
                     + self.vol_coef * math.sqrt(step) * increments)
        log_paths = np.zeros((increments.shape[0], increments.shape[1] + 1))
        np.cumsum(log_steps, axis=1, out=log_paths[:, 1:])
        return np.reshape(x0, (-1, 1)) * np.exp(log_paths)

    def __repr__(self):
        return 'GeometricBrownianMotion(mu_coef={0!r}, vol_coef={1!r})'.format(
            self.mu_coef, self.vol_coef)


class GeneralDiffusion(DiffusionModel):
    """
    A diffusion described by drift and volatility functions, simulated by
    Euler-Maruyama. A step that leaves the domain is an error; states are
    never reflected or clamped back.

    """

    kind = 'GeneralSDE'

    def __init__(self, drift, volatility, domain_lo=-math.inf, domain_hi=math.inf):
        if not domain_lo < domain_hi:
            raise DomainError('empty domain ({0}, {1})'.format(domain_lo, domain_hi))
        self.__drift = drift
        self.__volatility = volatility
        self.domain_lo = domain_lo
        self.domain_hi = domain_hi

    def drift(self, x):
        return self.__drift(x)

    def volatility(self, x):
        return self.__volatility(x)

    def propagate(self, x0, step, increments, first_path=0):
        n_paths, n_steps = increments.shape
        states = np.empty((n_paths, n_steps + 1))
        states[:, 0] = x0
        root_step = math.sqrt(step)
        for n in range(n_steps):
            x = states[:, n]
            vol = np.broadcast_to(self.volatility(x), x.shape)
            if np.any(vol <= 0):
                bad = int(np.argmax(vol <= 0))
                raise DomainError('non-positive volatility at x={0} (path {1}, step {2})'.format(
                    x[bad], first_path + bad, n))
            states[:, n + 1] = x + self.drift(x) * step + vol * root_step * increments[:, n]
            outside = ~self.contains(states[:, n + 1])
            if np.any(outside):
                bad = int(np.argmax(outside))
                raise DomainError('Euler step {0} left the domain on path {1} (x={2})'.format(
                    n + 1, first_path + bad, states[bad, n + 1]))
        return states


def simulate_paths(model, x0, noise, start=0, stop=None):
    """
    Simulate the paths ``start, ..., stop - 1`` of the noise grid.

    ``x0`` is either a common initial state or one state per path. The result
    is a matrix with one row per path and one column per grid time.

    """
    stop = noise.n_paths if stop is None else stop
    if not np.all(model.contains(x0)):
        raise DomainError('initial state {0} outside ({1}, {2})'.format(
            x0, model.domain_lo, model.domain_hi))
    return model.propagate(x0, noise.step, noise.block(start, stop), first_path=start)


def simulate_path(model, x0, horizon, noise, path_index=0):
    """Simulate a single path on the noise grid up to ``horizon``."""
    if not math.isclose(horizon, noise.horizon, rel_tol=1e-9):
        raise ValueError('horizon {0} does not match the noise grid ({1} steps of {2})'.format(
            horizon, noise.n_steps, noise.step))
    states = simulate_paths(model, x0, noise, path_index, path_index + 1)
    return SamplePath(noise.times, states[0])


def gbm_exponents(mu_coef, vol_coef, r):
    """
    Roots of the characteristic equation b^2 g (g - 1) / 2 + mu g - r = 0.

    The positive root belongs to the increasing fundamental solution
    x**gamma_plus, the negative one to the decreasing solution
    x**gamma_minus.

    >>> [round(g, 3) for g in gbm_exponents(-0.5, 1.0, 1.0)]
    [2.732, -0.732]

    """
    if vol_coef <= 0 or r <= 0:
        raise ValueError('need positive volatility and discount rate')
    centre = 0.5 - mu_coef / vol_coef ** 2
    radius = math.sqrt(centre ** 2 + 2.0 * r / vol_coef ** 2)
    return centre + radius, centre - radius


def gbm_moments(model, x0, t):
    """Closed-form mean and variance of a geometric Brownian motion at time t."""
    mean = x0 * math.exp(model.mu_coef * t)
    variance = mean ** 2 * math.expm1(model.vol_coef ** 2 * t)
    return mean, variance
