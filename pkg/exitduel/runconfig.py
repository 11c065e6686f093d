"""
Run configuration of the command-line experiments.

A run is described by a flat text file of ``key = value`` lines. Empty
lines are ignored and comments are introduced by "#"::

    # worked example
    mu = -0.5
    b = 1
    theta_lo = 0.5   # lowest exit value

Every key has a default, so an empty file describes the worked example.

"""

from collections import OrderedDict
import hashlib
import re

from .diffusion import GeometricBrownianMotion
from .equilibrium import ExitGame, TabulatedTypes, UniformTypes
from .payoffs import ExampleProfit, validate_assumptions


__all__ = ['ConfigError', 'RunConfig']


class ConfigError(ValueError):
    """Raised for unknown keys or malformed values in a run configuration."""
    pass


def _float_list(value):
    return tuple(float(item) for item in str(value).split(',') if item.strip())


DEFAULTS = OrderedDict([
    ('mu', '-0.5'),
    ('b', '1.0'),
    ('r', '1.0'),
    ('beta', '0.5'),
    ('x_cap', '1000.0'),
    ('m0', '2.0'),
    ('theta_lo', '0.5'),
    ('theta_hi', '1.5'),
    ('family', 'uniform'),
    ('type_knots', ''),
    ('type_probs', ''),
    ('dt', '0.001'),
    ('horizon', '12.0'),
    ('n_paths', '10000'),
    ('seed', '2024'),
    ('eps_ladder', '0.08, 0.04, 0.02, 0.01, 0.005'),
    ('out', '.'),
])

CONVERTERS = {
    'mu': float, 'b': float, 'r': float, 'beta': float, 'x_cap': float, 'm0': float,
    'theta_lo': float, 'theta_hi': float, 'family': str, 'type_knots': _float_list,
    'type_probs': _float_list, 'dt': float, 'horizon': float, 'n_paths': int, 'seed': int,
    'eps_ladder': _float_list, 'out': str,
}

FAMILIES = ('uniform', 'tabulated')

# keys left out of the config echo and hash
LOCATION_KEYS = ('out',)


class RunConfig(dict):
    """
    The parameters of one experiment, as a dict from key to raw string.

    Values are converted on access through `get`; missing keys fall back to
    the worked example.

    """

    __regex_comment = r'^\s*#.*$'
    __regex_blank = r'^\s*$'
    __regex_value = r'^\s*(?P<option>\w+)\s*=\s*(?P<value>.*?)\s*(#.*)?$'

    def __init__(self, *args, **kwargs):
        super(RunConfig, self).__init__()
        self.update(dict(*args, **kwargs))

    def __setitem__(self, key, value):
        if key not in DEFAULTS:
            raise ConfigError('unknown configuration key {0!r}'.format(key))
        if isinstance(value, (list, tuple)):
            value = ', '.join(repr(float(item)) for item in value)
        super(RunConfig, self).__setitem__(key, str(value))

    def update(self, other=(), **kwargs):
        for key, value in dict(other, **kwargs).items():
            self[key] = value

    @staticmethod
    def _match_line(line):
        """
        Matches a line.

        """
        if re.match(RunConfig.__regex_comment, line) or re.match(RunConfig.__regex_blank, line):
            return
        match = re.match(RunConfig.__regex_value, line)
        if match:
            return match.group('option'), match.group('value')
        raise ConfigError('cannot parse configuration line {0!r}'.format(line.rstrip('\n')))

    @classmethod
    def from_file(cls, file_name):
        """
        Alternative constructor reading a configuration file.

        """
        config = cls()
        with open(file_name) as cfg_file:
            for line in cfg_file:
                match = cls._match_line(line)
                if match:
                    key, value = match
                    config[key] = value
        return config

    def write(self, file_name):
        """Writes the explicitly set keys to a file."""
        with open(file_name, 'w') as cfg_file:
            for key, value in self.items():
                cfg_file.write('{0} = {1}\n'.format(key, value))

    def get(self, key):
        """The converted value of a key, falling back to its default."""
        if key not in DEFAULTS:
            raise ConfigError('unknown configuration key {0!r}'.format(key))
        raw = dict.get(self, key, DEFAULTS[key])
        try:
            return CONVERTERS[key](raw)
        except ValueError:
            raise ConfigError('invalid value {0!r} for {1}'.format(raw, key))

    def echo(self):
        """
        Canonical ``key = value`` text of all keys that define the run,
        defaults included and the output directory left out.

        """
        return ''.join('{0} = {1}\n'.format(key, dict.get(self, key, DEFAULTS[key]))
                       for key in DEFAULTS if key not in LOCATION_KEYS)

    def as_dict(self):
        """All keys with their converted values, defaults included."""
        return OrderedDict((key, self.get(key)) for key in DEFAULTS)

    def config_hash(self):
        return hashlib.sha256(self.echo().encode('utf-8')).hexdigest()

    def model(self):
        return GeometricBrownianMotion(self.get('mu'), self.get('b'))

    def profit(self):
        return ExampleProfit(self.get('beta'), self.get('x_cap'), self.get('m0'), self.get('r'))

    def types(self):
        family = self.get('family')
        if family not in FAMILIES:
            raise ConfigError('unknown type family {0!r}, expected one of {1}'.format(
                family, ', '.join(FAMILIES)))
        if family == 'uniform':
            return UniformTypes(self.get('theta_lo'), self.get('theta_hi'))
        return TabulatedTypes(self.get('type_knots'), self.get('type_probs'))

    def validate(self):
        """The assumption report of the configured model."""
        return validate_assumptions(self.model(), self.profit(), self.types())

    def build_game(self, n_thetas=201):
        """The `ExitGame` of this configuration."""
        return ExitGame.build(self.model(), self.profit(), self.types(), dt=self.get('dt'),
                              eps_ladder=self.get('eps_ladder'), n_thetas=n_thetas)

    def noise(self, game, n_paths=None):
        return game.noise(self.get('seed'), self.get('horizon'), n_paths or self.get('n_paths'))

    def __repr__(self):
        """
        String representation of the run configuration

        """
        return '{0}({1})'.format(self.__class__.__name__, dict.__repr__(self))
