"""
exitduel configuration.

Tool-wide numerical defaults live in a single ``exitduel`` section. They can
be overridden by an ``exitduelrc`` file in the working directory or by
``~/.exitduelrc``, both in ``configparser`` format::

    [exitduel]
    dt = 0.002
    threads = 4

"""

from configparser import ConfigParser
import multiprocessing
import os


def set_config(key, value):
    """Set a configuration option."""
    _config.set('exitduel', key, str(value))


def get_config(key):
    """Get a configuration option."""
    return _config.get('exitduel', key)


def get_float(key):
    return _config.getfloat('exitduel', key)


def get_int(key):
    return _config.getint('exitduel', key)


def get_floats(key):
    """Get a comma-separated list of floats."""
    return tuple(float(item) for item in get_config(key).split(',') if item.strip())


def worker_count():
    """
    The number of worker threads used for Monte-Carlo path blocks.

    The environment variable ``EXITDUEL_THREADS`` takes precedence over the
    ``threads`` option. A value of zero means one worker per CPU.

    """
    env = os.environ.get('EXITDUEL_THREADS')
    count = int(env) if env else get_int('threads')
    if count > 0:
        return count
    try:
        return multiprocessing.cpu_count()
    except NotImplementedError:
        return 1


# Setup the default configuration
_config = ConfigParser()
_config.add_section('exitduel')
set_config('dt', '0.001')
set_config('eps-ladder', '0.08, 0.04, 0.02, 0.01, 0.005')
set_config('conv-tol', '0.05')
set_config('tail-tol', '0.001')
set_config('significance', '3.0')
set_config('block-size', '1000')
set_config('threads', '0')

# Read from external configuration files
_config.read(['exitduelrc', os.path.expanduser('~/.exitduelrc')])
