"""Tests of the run configuration"""

from unittest import TestCase

import pytest

from exitduel.diffusion import GeometricBrownianMotion
from exitduel.equilibrium import TabulatedTypes, UniformTypes
from exitduel.runconfig import DEFAULTS, ConfigError, RunConfig

from .tools import data_file


class TestMatchLine(TestCase):

    def test_comment(self):
        assert RunConfig._match_line('# a comment\n') is None
        assert RunConfig._match_line('   \n') is None

    def test_value(self):
        """Values are stripped of whitespace and trailing comments"""
        assert RunConfig._match_line('mu = -0.5\n') == ('mu', '-0.5')
        assert RunConfig._match_line('  theta_hi=1.5   # top type\n') == ('theta_hi', '1.5')
        assert RunConfig._match_line('eps_ladder = 0.1, 0.05\n') == ('eps_ladder', '0.1, 0.05')

    def test_garbage(self):
        with pytest.raises(ConfigError):
            RunConfig._match_line('mu -0.5\n')


class TestRunConfig(TestCase):

    def setUp(self):
        self.config = RunConfig.from_file(data_file('worked.cfg'))

    def test_from_file(self):
        """Values are read and converted on access"""
        assert self.config.get('dt') == 0.01
        assert self.config.get('n_paths') == 20
        assert self.config.get('eps_ladder') == (0.4, 0.2, 0.1, 0.05)
        assert self.config.get('theta_hi') == 1.5
        assert self.config.get('family') == 'uniform'

    def test_defaults(self):
        """Unset keys fall back to the worked example"""
        config = RunConfig()
        assert config.get('m0') == 2.0
        assert config.get('horizon') == 12.0
        assert config.get('eps_ladder') == (0.08, 0.04, 0.02, 0.01, 0.005)
        assert list(config.as_dict()) == list(DEFAULTS)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            RunConfig(gamma=1.0)
        with pytest.raises(ConfigError):
            self.config.get('gamma')

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            RunConfig(dt='fast').get('dt')

    def test_sequences(self):
        """Sequences are stored as comma-separated text"""
        config = RunConfig(eps_ladder=[0.1, 0.05])
        assert config['eps_ladder'] == '0.1, 0.05'
        assert config.get('eps_ladder') == (0.1, 0.05)

    def test_round_trip(self):
        """A written configuration reads back identically"""
        file_name = data_file('worked.cfg')
        config = RunConfig.from_file(file_name)
        config['seed'] = 7
        out = self.tmp_path.joinpath('copy.cfg')
        config.write(str(out))
        again = RunConfig.from_file(str(out))
        assert again == config
        assert again.config_hash() == config.config_hash()

    def test_hash(self):
        """The hash covers every run key, defaults included, but not the output directory"""
        assert RunConfig().config_hash() == RunConfig(mu=-0.5, dt='0.001').config_hash()
        assert RunConfig().config_hash() != RunConfig(dt=0.01).config_hash()
        assert len(self.config.config_hash()) == 64
        assert RunConfig(out='a').config_hash() == RunConfig(out='b').config_hash()
        assert 'out' not in RunConfig(out='a').echo()

    def test_repr(self):
        assert repr(RunConfig(dt=0.01)) == "RunConfig({'dt': '0.01'})"

    def test_model(self):
        model = self.config.model()
        assert isinstance(model, GeometricBrownianMotion)
        assert (model.mu_coef, model.vol_coef) == (-0.5, 1.0)
        assert self.config.profit().m0 == 2.0

    def test_types(self):
        """Both prior families can be configured"""
        assert isinstance(self.config.types(), UniformTypes)
        config = RunConfig(family='tabulated', type_knots='0.5, 1.0, 1.5',
                           type_probs='0, 0.25, 1')
        dist = config.types()
        assert isinstance(dist, TabulatedTypes)
        assert dist.theta_hi == 1.5
        with pytest.raises(ConfigError):
            RunConfig(family='gamma').types()

    def test_validate(self):
        """Assumptions are checked on the configured model"""
        assert self.config.validate().passed
        broken = RunConfig.from_file(data_file('broken.cfg'))
        assert not broken.validate().passed

    @pytest.fixture(autouse=True)
    def _tmp_path(self, tmp_path):
        self.tmp_path = tmp_path
