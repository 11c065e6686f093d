"""
Profit flows and their discounted resolvents.

A player earns the duopoly flow D while both players are in the market and
the remaining player earns the monopoly flow M afterwards. The resolvents

    d(x) = E_x[ int_0^oo e^{-rs} D(X_s) ds ],    m(x) = E_x[ int_0^oo e^{-rs} M(X_s) ds ]

are the expected discounted profits of a duopolist who never leaves and of a
monopolist. For the capped power family D(x) = min(x, x_M)**beta,
M = D + M_0 under a geometric Brownian motion they are known in closed form;
for everything else they can be estimated by Monte-Carlo.

"""

from abc import ABCMeta, abstractmethod
from collections import namedtuple
import logging
import math

import numpy as np
from scipy.integrate import trapezoid

from .diffusion import gbm_exponents, simulate_paths
from .montecarlo import concat_blocks, estimate


logger = logging.getLogger(__name__)


class AssumptionError(ValueError):
    """Raised when a standing assumption of the model is violated."""
    pass


class HorizonError(ValueError):
    """Raised when a truncation horizon is too short for the requested tail tolerance."""
    pass


class ProfitSpec(metaclass=ABCMeta):
    """
    Description of the profit flows in terms of two increasing, bounded
    functions of the state and a discount rate.

    """

    @abstractmethod
    def duopoly_flow(self, x):
        """Profit per unit time while both players remain"""
        pass

    @abstractmethod
    def monopoly_flow(self, x):
        """Profit per unit time of the remaining player"""
        pass

    @abstractmethod
    def flow_bounds(self):
        """Suprema of the duopoly and monopoly flows"""
        pass

    @abstractmethod
    def critical_bracket(self):
        """Interval of states on which the duopoly flow increases to its supremum"""
        pass


class ExampleProfit(ProfitSpec):
    """
    The capped power family: D(x) = x**beta below the cap x_M and x_M**beta
    above it, M = D + M_0.

    """

    def __init__(self, beta, x_cap, m0, r):
        if r <= 0:
            raise ValueError('discount rate must be positive')
        self.beta = float(beta)
        self.x_cap = float(x_cap)
        self.m0 = float(m0)
        self.r = float(r)

    def duopoly_flow(self, x):
        return np.minimum(x, self.x_cap) ** self.beta

    def monopoly_flow(self, x):
        return self.duopoly_flow(x) + self.m0

    def flow_bounds(self):
        cap = self.x_cap ** self.beta
        return cap, cap + self.m0

    def critical_bracket(self):
        return 0.0, self.x_cap

    def __repr__(self):
        return 'ExampleProfit(beta={0!r}, x_cap={1!r}, m0={2!r}, r={3!r})'.format(
            self.beta, self.x_cap, self.m0, self.r)


class FunctionalProfit(ProfitSpec):
    """
    Profit flows given as functions.

    The suprema of both flows and the interval on which D increases have to
    be supplied, since they cannot be read off a black-box function.

    """

    def __init__(self, duopoly_flow, monopoly_flow, r, bounds, bracket):
        if r <= 0:
            raise ValueError('discount rate must be positive')
        self.__duopoly = duopoly_flow
        self.__monopoly = monopoly_flow
        self.r = float(r)
        self.__bounds = tuple(bounds)
        self.__bracket = tuple(bracket)

    def duopoly_flow(self, x):
        return self.__duopoly(x)

    def monopoly_flow(self, x):
        return self.__monopoly(x)

    def flow_bounds(self):
        return self.__bounds

    def critical_bracket(self):
        return self.__bracket


class ResolventPair(object):
    """
    The discounted resolvents d and m of a profit specification together with
    the lower bound m_min of m used throughout the equilibrium construction.

    """

    def __init__(self, d, m, m_min, spec):
        self.d = d
        self.m = m
        self.m_min = float(m_min)
        self.spec = spec

    @property
    def r(self):
        return self.spec.r


Exponents = namedtuple('Exponents', ['gamma_plus', 'gamma_minus', 'delta'])
Clause = namedtuple('Clause', ['name', 'passed', 'value', 'bound'])


def example_flow_D(x, spec):
    """
    Duopoly flow of the capped power family.

    >>> float(example_flow_D(4.0, ExampleProfit(0.5, 1000.0, 2.0, 1.0)))
    2.0

    """
    return spec.duopoly_flow(x)


def example_exponents(model, spec):
    """
    Exponents of the fundamental solutions and the growth rate
    delta = beta mu + b^2 beta (beta - 1) / 2 of E[X_t**beta].

    """
    gamma_plus, gamma_minus = gbm_exponents(model.mu_coef, model.vol_coef, spec.r)
    delta = spec.beta * model.mu_coef + model.vol_coef ** 2 * spec.beta * (spec.beta - 1) / 2
    return Exponents(gamma_plus, gamma_minus, delta)


def _example_regime(spec, exponents, vol_coef):
    beta, r = spec.beta, spec.r
    gamma_minus = exponents.gamma_minus
    return [
        Clause('beta in (0,1)', 0 < beta < 1, beta, (0.0, 1.0)),
        Clause('r > delta', r > exponents.delta, r, exponents.delta),
        Clause('beta-1 > gamma_minus', beta - 1 > gamma_minus, gamma_minus, beta - 1),
        Clause('gamma_minus > -1', gamma_minus > -1, gamma_minus, -1.0),
        Clause('beta*b^2*|gamma_minus| < 2r', beta * vol_coef ** 2 * abs(gamma_minus) < 2 * r,
               beta * vol_coef ** 2 * abs(gamma_minus), 2 * r),
    ]


def pasting_coefficients(spec, exponents):
    """
    Coefficients c1, c2 making the piecewise resolvent continuously
    differentiable at the cap x_M.

    """
    beta, r, x_cap = spec.beta, spec.r, spec.x_cap
    gamma_plus, gamma_minus, delta = exponents
    c1 = ((gamma_minus * delta - beta * r)
          / ((gamma_plus - gamma_minus) * r * (r - delta))
          * x_cap ** (beta - gamma_plus))
    c2 = (x_cap ** beta / (r - delta) + c1 * x_cap ** gamma_plus - x_cap ** beta / r) \
        / x_cap ** gamma_minus
    return c1, c2


def resolvent_closed_form_d(x, spec, exponents, vol_coef=None):
    """
    Closed-form resolvent d of the capped power family under a geometric
    Brownian motion:

        d(x) = x**beta / (r - delta) + c1 x**gamma_plus,     x <= x_M
        d(x) = x_M**beta / r + c2 x**gamma_minus,            x > x_M

    When ``vol_coef`` is given, the full parameter regime of the family is
    checked as well; otherwise only r > delta, which the formula needs.

    """
    failed = [clause for clause in _example_regime(spec, exponents, vol_coef or 0.0)
              if not clause.passed and (vol_coef is not None or clause.name == 'r > delta')]
    if failed:
        raise AssumptionError('closed form outside its regime: {0}'.format(
            ', '.join(clause.name for clause in failed)))
    beta, r, x_cap = spec.beta, spec.r, spec.x_cap
    c1, c2 = pasting_coefficients(spec, exponents)
    x = np.asarray(x, dtype=float)
    below = np.minimum(x, x_cap)
    above = np.maximum(x, x_cap)
    return np.where(
        x <= x_cap,
        below ** beta / (r - exponents.delta) + c1 * below ** exponents.gamma_plus,
        x_cap ** beta / r + c2 * above ** exponents.gamma_minus)


def example_resolvents(model, spec):
    """
    Resolvents of the capped power family in closed form.

    m_min is taken as the analytic floor M_0 / r, which is the infimum of m
    since d is non-negative and vanishes at the left end of the domain.

    """
    exponents = example_exponents(model, spec)
    resolvent_closed_form_d(1.0, spec, exponents, model.vol_coef)

    def d(x):
        return resolvent_closed_form_d(x, spec, exponents)

    def m(x):
        return d(x) + spec.m0 / spec.r

    return ResolventPair(d, m, spec.m0 / spec.r, spec)


def check_tail(horizon, r, bound, tail_tol):
    """Raise `HorizonError` if e^{-r horizon} bound exceeds the tail tolerance."""
    tail = bound * math.exp(-r * horizon)
    if tail >= tail_tol:
        raise HorizonError('horizon {0} leaves a tail of {1:.3g} >= {2:.3g}'.format(
            horizon, tail, tail_tol))
    return tail


def resolvent_mc(model, flow, r, x, horizon, n_paths, noise, flow_bound=None, tail_tol=None):
    """
    Monte-Carlo estimate of E_x[int_0^horizon e^{-rt} flow(X_t) dt].

    The integral is taken by the trapezoidal rule on the simulation grid.
    When ``flow_bound`` (the supremum of ``|flow|``) is given, the horizon
    must be long enough that the neglected tail ``flow_bound e^{-r horizon} /
    r`` stays below ``tail_tol`` (default ``1e-4 flow_bound / r``).

    """
    if not math.isclose(horizon, noise.horizon, rel_tol=1e-9):
        raise ValueError('horizon {0} does not match the noise grid'.format(horizon))
    if flow_bound is None:
        logger.warning('no bound on the flow given, tail of the resolvent is unchecked')
    else:
        tail_tol = 1e-4 * flow_bound / r if tail_tol is None else tail_tol
        check_tail(horizon, r, flow_bound / r, tail_tol)
    noise = noise.with_paths(n_paths)
    discount = np.exp(-r * noise.times)

    def block(start, stop):
        states = simulate_paths(model, x, noise, start, stop)
        return trapezoid(discount * flow(states), dx=noise.step, axis=1)

    return estimate(concat_blocks(block, n_paths))


class AssumptionReport(object):
    """
    Pass/fail status of each standing assumption, with the offending numbers.

    """

    def __init__(self, clauses):
        self.clauses = list(clauses)

    def __iter__(self):
        return iter(self.clauses)

    def __getitem__(self, name):
        for clause in self.clauses:
            if clause.name == name:
                return clause
        raise KeyError(name)

    @property
    def passed(self):
        return all(clause.passed for clause in self.clauses)

    @property
    def failures(self):
        return [clause for clause in self.clauses if not clause.passed]

    def as_dict(self):
        return {
            'passed': self.passed,
            'clauses': [
                {'name': c.name, 'passed': bool(c.passed), 'value': c.value, 'bound': c.bound}
                for c in self.clauses],
        }

    def __str__(self):
        return '\n'.join(
            '{0:<32} {1} (value {2!r}, bound {3!r})'.format(
                c.name, 'ok' if c.passed else 'FAILED', c.value, c.bound)
            for c in self.clauses)


def validate_assumptions(model, spec, dist, resolvents=None):
    """
    Check the standing assumptions for a model, profit specification and
    type distribution. Nothing is raised; the returned report lists every
    clause with its verdict.

    The clauses specific to the capped power family are only checked for
    that family under a geometric Brownian motion.

    """
    theta_hi = dist.theta_hi
    r = spec.r
    clauses = [Clause('r > 0', r > 0, r, 0.0)]
    if dist.theta_lo >= theta_hi:
        clauses.append(Clause('theta_L < theta_U', False, dist.theta_lo, theta_hi))
    if isinstance(spec, ExampleProfit):
        clauses.append(Clause('M0 > r*theta_U', spec.m0 > r * theta_hi, spec.m0, r * theta_hi))
        cap = spec.x_cap ** spec.beta
        clauses.append(Clause('x_M^beta > r*theta_U', cap > r * theta_hi, cap, r * theta_hi))
        if getattr(model, 'kind', None) == 'GBM':
            clauses.extend(_example_regime(spec, example_exponents(model, spec), model.vol_coef))
        m_min = spec.m0 / r if resolvents is None else resolvents.m_min
    else:
        m_min = None if resolvents is None else resolvents.m_min
    if m_min is not None:
        clauses.append(Clause('m_min > theta_U', m_min > theta_hi, m_min, theta_hi))
    report = AssumptionReport(clauses)
    for clause in report.failures:
        logger.info('assumption failed: %s (value %r, bound %r)', clause.name, clause.value,
                    clause.bound)
    return report
