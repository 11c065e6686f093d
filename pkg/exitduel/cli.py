"""
Command-line front end.

Every command reads a run configuration (``--config``), lets the common
flags override it, checks the standing assumptions and writes its data
products to the output directory: CSV files headed by a ``# config-hash:``
line, and a JSON run report. Exit codes: 0 all checks passed, 1 a check
failed (for instance an audit found a profitable deviation), 2 an
assumption failed, 64 usage error.

"""

import argparse
import csv
import json
import logging
import math
import os
import sys
import time

import numpy as np

from .best_response import (Immediate, Never, RectRule, TimeShift, audit_best_response,
                            check_region, classify_region, default_deviations)
from .diffusion import DomainError, simulate_path
from .equilibrium import SupportError, belief_y, exit_schedule, game_outcome, integrate_belief
from .payoffs import AssumptionError
from .runconfig import ConfigError, RunConfig
from .single_player import BracketError, c_critical
from .special_cases import degenerate_limit_ks, deterministic_schedule


logger = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_ASSUMPTION = 2
EXIT_USAGE = 64

DEVIATION_GROUPS = {
    'rect': (RectRule,),
    'trivial': (Immediate, Never),
    'shift': (TimeShift,),
}


class UsageError(Exception):
    """Raised for invalid command-line usage."""
    pass


class ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        raise UsageError(message)


def format_number(value):
    """
    Decimal text with 12 significant digits.

    >>> format_number(1.0 / 3.0)
    '0.333333333333'

    """
    if isinstance(value, str):
        return value
    return '{0:.12g}'.format(float(value))


def write_csv(file_name, config, header, rows):
    """Write a CSV data product with its provenance line."""
    with open(file_name, 'w', newline='', encoding='utf-8') as csv_file:
        csv_file.write('# config-hash: {0}\n'.format(config.config_hash()))
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(value) for value in row])
    logger.info('wrote %s', file_name)
    return file_name


def write_json(file_name, payload):
    with open(file_name, 'w', encoding='utf-8') as json_file:
        json.dump(payload, json_file, indent=2, sort_keys=True, default=_json_default)
        json_file.write('\n')
    logger.info('wrote %s', file_name)
    return file_name


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError('cannot serialise {0!r}'.format(value))


def _finite_or_none(value):
    return value if math.isfinite(value) else None


class RunReport(object):
    """
    Machine-readable summary of one command: the configuration echo, the
    status of every check and the files written.

    """

    def __init__(self, command, config):
        self.command = command
        self.config = config
        self.checks = []
        self.outputs = []
        self.details = {}
        self.__started = time.time()

    def check(self, name, passed, **details):
        self.checks.append(dict(name=name, passed=bool(passed), **details))
        return passed

    def output(self, file_name):
        self.outputs.append(file_name)

    @property
    def passed(self):
        return all(check['passed'] for check in self.checks)

    def as_dict(self):
        return {
            'command': self.command,
            'config': self.config.as_dict(),
            'config_hash': self.config.config_hash(),
            'wall_time': time.time() - self.__started,
            'checks': self.checks,
            'outputs': self.outputs,
            'details': self.details,
            'passed': self.passed,
        }

    def write(self, out_dir):
        file_name = os.path.join(out_dir, '{0}-report.json'.format(self.command))
        return write_json(file_name, self.as_dict())


def cmd_check(config, args, report):
    """Report the standing assumptions."""
    assumptions = config.validate()
    report.details['assumptions'] = assumptions.as_dict()
    for clause in assumptions:
        report.check(clause.name, clause.passed, value=clause.value, bound=clause.bound)
    print(str(assumptions))
    return EXIT_OK if assumptions.passed else EXIT_ASSUMPTION


def cmd_thresholds(config, args, report):
    """Tabulate alpha(theta) and c(theta)."""
    game = config.build_game()
    table = game.table
    rows = [(theta, alpha, c) for theta, alpha, c
            in zip(table.thetas, table.alphas, table.criticals)]
    report.check('alpha strictly increasing', bool(np.all(np.diff(table.alphas) > 0)))
    report.check('alpha <= c', bool(np.all(table.alphas <= table.criticals)))
    report.output(write_csv(os.path.join(args.out, 'thresholds.csv'), config,
                            ['theta', 'alpha', 'c'], rows))
    return EXIT_OK


def cmd_simulate(config, args, report):
    """Simulate one path, its belief and a game between two types."""
    game = config.build_game()
    theta1 = game.dist.theta_hi if args.theta is None else args.theta[0]
    theta2 = theta1 if args.theta2 is None else args.theta2
    noise = config.noise(game, n_paths=1)
    path = simulate_path(game.model, args.x0, noise.horizon, noise)
    belief = integrate_belief(game, path)
    beliefs = belief_y(belief, game.dist)
    outcome = game_outcome(game, path, belief, theta1, theta2)
    rows = zip(path.times, path.states, beliefs, game.table.alpha(beliefs))
    report.output(write_csv(os.path.join(args.out, 'simulate.csv'), config,
                            ['t', 'X', 'Y', 'alpha_of_Y'], rows))
    thetas = game.table.thetas[1:]
    schedule = exit_schedule(game, belief, thetas)
    report.output(write_csv(os.path.join(args.out, 'schedule.csv'), config,
                            ['theta', 'tau_hat'], zip(thetas, schedule)))
    report.check('belief converged', belief.converged, epsilon=belief.epsilon_used)
    report.check('Y nonincreasing', bool(np.all(np.diff(beliefs) <= 1e-12)))
    report.details['outcome'] = {
        'theta_1': theta1, 'theta_2': theta2,
        'exit_time_1': _finite_or_none(outcome.exit_time_1),
        'exit_time_2': _finite_or_none(outcome.exit_time_2),
        'payoff_1': outcome.payoff_1, 'payoff_2': outcome.payoff_2,
        'first_exiter': outcome.first_exiter.value,
    }
    return EXIT_OK


def _deviation_set(game, theta, groups):
    kinds = tuple(kind for group in groups for kind in DEVIATION_GROUPS[group])
    return [rule for rule in default_deviations(game, theta) if isinstance(rule, kinds)]


def _parse_groups(text):
    groups = [group.strip() for group in text.split(',') if group.strip()]
    if not groups:
        raise UsageError('empty deviation set')
    unknown = [group for group in groups if group not in DEVIATION_GROUPS]
    if unknown:
        raise UsageError('unknown deviation groups: {0}'.format(', '.join(unknown)))
    return groups


def cmd_audit(config, args, report):
    """Audit the equilibrium rule against the deviation family."""
    groups = _parse_groups(args.deviations)
    game = config.build_game()
    noise = config.noise(game)
    thetas = args.theta or [0.6, 1.0, 1.4]
    audits = []
    for theta in thetas:
        audit = audit_best_response(game, args.x0, theta, noise,
                                    deviations=_deviation_set(game, theta, groups))
        audits.append(audit.as_dict())
        report.check('no profitable deviation at theta={0:g}'.format(theta), audit.passed,
                     violations=len(audit.violations))
    report.details['audits'] = audits
    report.output(write_json(os.path.join(args.out, 'audit.json'), audits))
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_region(config, args, report):
    """Classify an (x, a) grid into stopping and continuation states."""
    game = config.build_game()
    theta = 1.0 if args.theta is None else args.theta[0]
    alpha = float(game.table.alpha(theta))
    a_star = float(game.dist.big_a(theta))
    x_grid = np.linspace(0.5 * alpha, 1.5 * alpha, args.nx)
    a_grid = np.linspace(0.0, 2.0 * max(a_star, 0.1), args.na)
    region = classify_region(game, theta, x_grid, a_grid, config.noise(game))
    rows = [(x, a, region.labels[i, j].value, region.values[i, j], region.stderrs[i, j])
            for i, x in enumerate(x_grid) for j, a in enumerate(a_grid)]
    report.output(write_csv(os.path.join(args.out, 'region.csv'), config,
                            ['x', 'a', 'label', 'value', 'stderr'], rows))
    agreement = check_region(game, theta, region)
    report.check('region recovered', agreement.passed, mismatches=len(agreement.mismatches),
                 excused=len(agreement.excused))
    report.check('region monotone', agreement.monotone)
    report.details['shape'] = [args.nx, args.na]
    return EXIT_OK


def cmd_special(config, args, report):
    """The deterministic and the degenerate-type limits."""
    if args.mode not in ('deterministic', 'degenerate'):
        raise UsageError('unknown mode {0!r}'.format(args.mode))
    game = config.build_game()
    if args.mode == 'deterministic':
        x_fixed = args.x_fixed
        if x_fixed is None:
            x_fixed = 0.25 * c_critical(game.dist.theta_lo, game.spec)
        schedule = deterministic_schedule(game, x_fixed)
        report.check('schedule nonincreasing', bool(np.all(np.diff(schedule.exit_times) <= 0)))
        report.output(write_csv(os.path.join(args.out, 'deterministic.csv'), config,
                                ['theta', 'tau_hat'],
                                zip(schedule.thetas, schedule.exit_times)))
    else:
        theta = 1.0 if args.theta is None else args.theta[0]
        results = degenerate_limit_ks(game, theta, args.widths, config.noise(game), args.x0)
        ordered = sorted(results, key=lambda result: -result.width)
        report.check('KS shrinks with the width',
                     all(narrow.statistic <= wide.statistic
                         for wide, narrow in zip(ordered, ordered[1:])),
                     statistics=[result.statistic for result in ordered])
        report.output(write_csv(os.path.join(args.out, 'degenerate.csv'), config,
                                ['h', 'ks', 'pvalue'], results))
    return EXIT_OK


COMMANDS = {
    'check': cmd_check,
    'thresholds': cmd_thresholds,
    'simulate': cmd_simulate,
    'audit': cmd_audit,
    'region': cmd_region,
    'special': cmd_special,
}


def _widths(text):
    return [float(item) for item in text.split(',') if item.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='run configuration file')
    common.add_argument('--seed', type=int)
    common.add_argument('--out', help='output directory')
    common.add_argument('--dt', type=float)
    common.add_argument('--paths', type=int, dest='n_paths')
    common.add_argument('--horizon', type=float)
    common.add_argument('--x0', type=float, default=2.72)
    common.add_argument('--theta', type=float, action='append')
    common.add_argument('-v', '--verbose', action='store_true')
    common.add_argument('-q', '--quiet', action='store_true')

    parser = ArgumentParser(prog='exitduel', description=__doc__.strip().splitlines()[0])
    commands = parser.add_subparsers(dest='command', parser_class=ArgumentParser)
    commands.add_parser('check', parents=[common], help='check the standing assumptions')
    commands.add_parser('thresholds', parents=[common], help='tabulate alpha(theta)')
    simulate = commands.add_parser('simulate', parents=[common], help='simulate one game')
    simulate.add_argument('--theta2', type=float)
    audit = commands.add_parser('audit', parents=[common], help='best-response audit')
    audit.add_argument('--deviations', default='rect,trivial,shift',
                       help='comma-separated deviation groups: rect, trivial, shift')
    region = commands.add_parser('region', parents=[common], help='stopping region')
    region.add_argument('--nx', type=int, default=12)
    region.add_argument('--na', type=int, default=12)
    special = commands.add_parser('special', parents=[common], help='limiting regimes')
    special.add_argument('--mode', required=True)
    special.add_argument('--x-fixed', type=float, dest='x_fixed')
    special.add_argument('--widths', type=_widths, default=[0.25, 0.1, 0.05])
    return parser


def load_config(args):
    """The run configuration with the command-line overrides applied."""
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    for key in ('seed', 'out', 'dt', 'n_paths', 'horizon'):
        value = getattr(args, key)
        if value is not None:
            config[key] = value
    args.out = config.get('out')
    return config


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError('no command given')
    except UsageError as error:
        sys.stderr.write('exitduel: {0}\n'.format(error))
        return EXIT_USAGE
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')

    try:
        config = load_config(args)
    except (ConfigError, OSError) as error:
        logger.error('%s', error)
        return EXIT_USAGE
    os.makedirs(args.out, exist_ok=True)
    report = RunReport(args.command, config)
    logger.info('%s: config hash %s', args.command, config.config_hash())
    try:
        if args.command != 'check':
            assumptions = config.validate()
            if not assumptions.passed:
                for clause in assumptions.failures:
                    report.check(clause.name, False, value=clause.value, bound=clause.bound)
                    logger.error('assumption failed: %s (value %r, bound %r)',
                                 clause.name, clause.value, clause.bound)
                status = EXIT_ASSUMPTION
            else:
                status = COMMANDS[args.command](config, args, report)
        else:
            status = cmd_check(config, args, report)
    except UsageError as error:
        logger.error('%s', error)
        return EXIT_USAGE
    except (ConfigError, SupportError) as error:
        logger.error('%s', error)
        return EXIT_USAGE
    except (AssumptionError, BracketError, DomainError) as error:
        logger.error('%s', error)
        report.check('assumptions', False, error=str(error))
        status = EXIT_ASSUMPTION
    if status == EXIT_OK and not report.passed:
        status = EXIT_VIOLATION
    report.write(args.out)
    logger.info('%s finished with exit code %d', args.command, status)
    return status


if __name__ == '__main__':
    sys.exit(main())
