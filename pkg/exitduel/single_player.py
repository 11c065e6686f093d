"""
The auxiliary single-player exit problem.

A lone duopolist earning the flow D who may leave at any time for the lump
sum theta maximises

    E_x[ int_0^tau e^{-rs} D(X_s) ds + theta e^{-r tau} ]

The optimal rule is to leave as soon as X falls to the threshold alpha(theta),
the maximiser of

    a_theta(x) = (theta - d(x)) / phi(x)

with phi the decreasing fundamental solution of the diffusion. The
`ThresholdTable` tabulates alpha on a grid of types and serves the
interpolated threshold and its inverse to the equilibrium construction.

"""

import logging
import math

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from .config import get_float
from .diffusion import gbm_exponents, simulate_paths
from .montecarlo import concat_blocks, estimate, first_true
from .payoffs import AssumptionError, check_tail


logger = logging.getLogger(__name__)


INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARED = (3 - math.sqrt(5)) / 2

SCAN_POINTS = 400


class BracketError(ArithmeticError):
    """Raised when no interior maximiser of a_theta can be bracketed."""
    pass


def fundamental_decreasing(model, r):
    """
    The decreasing fundamental solution phi of (L - r) f = 0.

    Only known in closed form for a geometric Brownian motion, where it is
    x**gamma_minus. Other models have to supply phi themselves.

    """
    if getattr(model, 'kind', None) != 'GBM':
        raise ValueError('phi is only available in closed form for a geometric Brownian motion')
    gamma_minus = gbm_exponents(model.mu_coef, model.vol_coef, r)[1]

    def phi(x):
        return np.asarray(x, dtype=float) ** gamma_minus

    return phi


def a_theta(x, theta, resolvents, phi):
    """The objective (theta - d(x)) / phi(x) whose maximiser is alpha(theta)."""
    return (theta - resolvents.d(x)) / phi(x)


def c_critical(theta, spec):
    """
    The critical level c(theta) solving D(x) = r theta.

    Infinity when r theta exceeds the supremum of D.

    """
    target = spec.r * theta
    sup_d = spec.flow_bounds()[0]
    if target > sup_d:
        return math.inf
    lo, hi = spec.critical_bracket()

    def excess(x):
        return float(spec.duopoly_flow(x)) - target

    if excess(lo) >= 0:
        return float(lo)
    if excess(hi) < 0:
        return math.inf
    return brentq(excess, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def golden_section_max(func, lo, hi, tol):
    """
    Golden-section search for the maximiser of a unimodal function on
    [lo, hi], returned as the midpoint of a final interval of width <= tol.

    """
    h = hi - lo
    if h <= tol:
        return 0.5 * (lo + hi)
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = lo + INV_PHI_SQUARED * h
    d = lo + INV_PHI * h
    fc = func(c)
    fd = func(d)
    for _ in range(n - 1):
        if fc > fd:
            hi, d, fd = d, c, fc
            h = INV_PHI * h
            c = lo + INV_PHI_SQUARED * h
            fc = func(c)
        else:
            lo, c, fc = c, d, fd
            h = INV_PHI * h
            d = lo + INV_PHI * h
            fd = func(d)
    if fc > fd:
        return 0.5 * (lo + d)
    return 0.5 * (c + hi)


def _scan_grid(lower, upper):
    if lower > 0:
        return np.geomspace(lower, upper, SCAN_POINTS)
    return np.linspace(lower, upper, SCAN_POINTS + 1)[1:]


def _maximise(theta, resolvents, phi, tol):
    """Return (alpha, multimodal) for one type."""
    spec = resolvents.spec
    critical = c_critical(theta, spec)
    if not math.isfinite(critical):
        raise BracketError('no critical level for theta={0}: r theta exceeds sup D'.format(theta))
    lo = spec.critical_bracket()[0]
    xs = _scan_grid(critical * 1e-6 if lo <= 0 else lo, critical)
    values = a_theta(xs, theta, resolvents, phi)
    k = int(np.argmax(values))
    logger.debug('theta=%g: scan maximum at x=%g (index %d of %d)', theta, xs[k], k, len(xs))
    if k == 0 or k == len(xs) - 1:
        raise BracketError('a_theta has no interior maximum below c({0}) = {1}'.format(
            theta, critical))
    interior = values[1:-1]
    peaks = np.count_nonzero((interior > values[:-2]) & (interior > values[2:]))
    alpha = golden_section_max(
        lambda x: float(a_theta(x, theta, resolvents, phi)), xs[k - 1], xs[k + 1], tol)
    return alpha, peaks > 1


def alpha(theta, resolvents, phi, tol=1e-8):
    """
    The single-player threshold alpha(theta), the maximiser of a_theta.

    The maximum is bracketed on a log-spaced scan below c(theta) and refined
    by golden-section search to the absolute tolerance ``tol``.

    """
    value, multimodal = _maximise(theta, resolvents, phi, tol)
    if multimodal:
        logger.warning('a_theta has several local maxima for theta=%g', theta)
    return value


class ThresholdTable(object):
    """
    Tabulated thresholds alpha(theta) on a grid of types.

    Off-grid types are served by piecewise-linear interpolation; the inverse
    alpha^{-1}(x) is the exact inverse of that interpolant, extended by -inf
    below alpha(theta_L) and +inf above alpha(theta_U).

    """

    def __init__(self, thetas, alphas, phi, resolvents, multimodal=()):
        thetas = np.asarray(thetas, dtype=float)
        alphas = np.asarray(alphas, dtype=float)
        if thetas.shape != alphas.shape or thetas.size < 2:
            raise ValueError('need matching theta and alpha grids of at least two points')
        if np.any(np.diff(thetas) <= 0):
            raise ValueError('theta grid not strictly increasing')
        if np.any(np.diff(alphas) <= 0):
            raise AssumptionError('threshold alpha not strictly increasing in theta')
        self.thetas = thetas
        self.alphas = alphas
        self.phi = phi
        self.resolvents = resolvents
        self.multimodal = list(multimodal)
        self.criticals = np.array([c_critical(theta, resolvents.spec) for theta in thetas])
        above = alphas > self.criticals
        if np.any(above):
            raise AssumptionError('alpha exceeds c at theta={0}'.format(thetas[above][0]))

    @property
    def theta_lo(self):
        return self.thetas[0]

    @property
    def theta_hi(self):
        return self.thetas[-1]

    def alpha(self, theta):
        return np.interp(theta, self.thetas, self.alphas)

    def alpha_inverse(self, x):
        """
        Inverse of the interpolated threshold: -inf below alpha(theta_lo) and
        the last table segment continued linearly above alpha(theta_hi).

        """
        x = np.asarray(x, dtype=float)
        inverse = np.interp(x, self.alphas, self.thetas)
        slope = (self.thetas[-1] - self.thetas[-2]) / (self.alphas[-1] - self.alphas[-2])
        inverse = np.where(x > self.alphas[-1],
                           self.thetas[-1] + slope * (x - self.alphas[-1]), inverse)
        return np.where(x < self.alphas[0], -np.inf, inverse)

    def c(self, theta):
        return c_critical(theta, self.resolvents.spec)

    def value(self, x, theta):
        return u_value(x, theta, self)

    def __len__(self):
        return len(self.thetas)

    def __repr__(self):
        return 'ThresholdTable({0} types on [{1}, {2}])'.format(
            len(self), self.theta_lo, self.theta_hi)


def build_threshold_table(resolvents, phi, theta_lo, theta_hi, n_points=201, tol=1e-8):
    """Solve for alpha on a uniform grid of types."""
    thetas = np.linspace(theta_lo, theta_hi, n_points)
    alphas = np.empty_like(thetas)
    multimodal = []
    for k, theta in enumerate(thetas):
        alphas[k], several = _maximise(theta, resolvents, phi, tol)
        if several:
            multimodal.append(theta)
    if multimodal:
        logger.warning('a_theta is multimodal on the scan grid for %d types, first at theta=%g',
                       len(multimodal), multimodal[0])
    logger.info('threshold table: %d types, alpha from %g to %g',
                n_points, alphas[0], alphas[-1])
    return ThresholdTable(thetas, alphas, phi, resolvents, multimodal)


def u_value(x, theta, table):
    """
    Value of the single-player problem: theta at or below alpha(theta) and
    a_theta(alpha(theta)) phi(x) + d(x) above it.

    """
    x = np.asarray(x, dtype=float)
    threshold = table.alpha(theta)
    best = a_theta(threshold, theta, table.resolvents, table.phi)
    above = table.resolvents.d(x) + best * table.phi(np.maximum(x, threshold))
    return np.where(x <= threshold, float(theta), above)


def threshold_policy_value(model, spec, x0, theta, threshold, noise, n_paths=None,
                           tail_tol=None):
    """
    Monte-Carlo value of the single-player policy "leave at the first grid
    time with X <= threshold".

    Paths that have not left by the end of the noise grid are truncated
    there; the neglected tail is bounded by e^{-rT} max(theta, sup D / r).

    """
    n_paths = n_paths or noise.n_paths
    r = spec.r
    tail_tol = get_float('tail-tol') if tail_tol is None else tail_tol
    noise = noise.with_paths(n_paths)
    times = noise.times
    discount = np.exp(-r * times)
    bound = max(abs(theta), spec.flow_bounds()[0] / r)

    def block(start, stop):
        states = simulate_paths(model, x0, noise, start, stop)
        running = cumulative_trapezoid(discount * spec.duopoly_flow(states), dx=noise.step,
                                       axis=1, initial=0.0)
        stop_index = first_true(states <= threshold)
        stopped = stop_index < len(times)
        if not np.all(stopped):
            check_tail(noise.horizon, r, bound, tail_tol)
        rows = np.arange(states.shape[0])
        index = np.minimum(stop_index, len(times) - 1)
        return running[rows, index] + np.where(stopped, theta * discount[index], 0.0)

    return estimate(concat_blocks(block, n_paths))
