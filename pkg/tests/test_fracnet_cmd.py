from unittest.mock import Mock

import pytest

from fracnet.cmd_geometry import GenGeometry
from fracnet.cmd_train import Train
from fracnet.fracnet_cmd import FracnetConfig, FracnetMain
from .conftest import get_abspath


def cmd_main(args, config_filenames=(), extra_config=None):
    main = FracnetMain(config_filenames=config_filenames,
                       extra_config=extra_config)
    main.BIN_NAME = 'fracnet'
    return main.run(args)


def has_toml():
    return FracnetConfig().toml is not None


class TestRun(object):
    def test_version(self, capsys):
        assert 0 == cmd_main(["--version"])
        out, err = capsys.readouterr()
        assert out.startswith("0.1.dev0\n")
        assert "lib @" in out

    def test_usage(self, capsys):
        assert 0 == cmd_main(["--help"])
        out, err = capsys.readouterr()
        assert "fracnet gen-data" in out
        assert "fracnet run-example" in out

    def test_no_args_usage(self, capsys):
        assert 0 == cmd_main([])
        out, err = capsys.readouterr()
        assert "Commands" in out

    def test_subcommand(self, monkeypatch):
        mock_execute = Mock(return_value=0)
        monkeypatch.setattr(GenGeometry, "execute", mock_execute)
        assert 0 == cmd_main(['gen-geometry', '-s', '3', 'exp.json'])
        assert 1 == mock_execute.call_count
        params, args = mock_execute.call_args[0]
        assert 3 == params['seed']
        assert ['exp.json'] == args

    def test_result_code(self, monkeypatch):
        monkeypatch.setattr(Train, "execute", Mock(return_value=1))
        assert 1 == cmd_main(['train'])

    def test_invalid_command(self, capsys):
        assert 3 == cmd_main(['trian'])
        err = capsys.readouterr()[1]
        assert 'ERROR: Invalid parameter: "trian"' in err
        assert 'Type "fracnet help"' in err

    def test_user_error(self, capsys, tmp_path):
        missing = str(tmp_path / 'missing.json')
        assert 3 == cmd_main(['gen-geometry', missing])
        err = capsys.readouterr()[1]
        assert err.startswith('ERROR: gen-geometry: ')
        assert 'not found' in err
        assert 'Traceback' not in err

    def test_option_error(self, capsys):
        assert 3 == cmd_main(['train', '--seed', 'many'])
        err = capsys.readouterr()[1]
        assert 'ERROR: train: ' in err

    def test_unexpected_error(self, capsys, monkeypatch):
        monkeypatch.setattr(GenGeometry, "execute",
                            Mock(side_effect=RuntimeError('boom')))
        assert 3 == cmd_main(['gen-geometry'])
        err = capsys.readouterr()[1]
        assert 'Traceback' in err
        assert 'RuntimeError: boom' in err

    def test_full_command(self, capsys, experiment_file, tmp_path):
        assert 0 == cmd_main(['gen-geometry', '--reporter', 'zero',
                              experiment_file])
        assert (tmp_path / 'out' / 'geometry_sim.json').exists()
        out, err = capsys.readouterr()
        assert '' == out


class TestConfig(object):
    def test_ignore_missing_files(self):
        main = FracnetMain(config_filenames='i_dont_exist.cfg')
        assert [] == main.config_filenames

    def test_extra_config(self):
        main = FracnetMain(config_filenames=(),
                           extra_config={'GLOBAL': {'seed': 4}})
        main.load_config()
        assert {'seed': 4} == main.config['GLOBAL']

    def test_ini(self):
        main = FracnetMain(config_filenames=get_abspath('sample.cfg'))
        main.load_config()
        assert main.config['GLOBAL'] == {'seed': '6', 'out': 'cfg-out'}
        assert main.config['COMMAND'] == {
            'foo': 'tests.sample_plugin:MyCmd'}

    @pytest.mark.skipif('not has_toml()')
    def test_pyproject_toml(self):
        main = FracnetMain(config_filenames=get_abspath('pyproject.toml'))
        main.load_config()
        assert main.config['GLOBAL'] == {'seed': '2', 'out': 'pyproject-out'}
        assert main.config['train'] == {'per_step': True}
        assert main.config['COMMAND'] == {
            'bar': 'tests.sample_plugin:MyCmd'}
        assert main.config['SAMPLER'] == {
            'corner-blocks': 'tests.sample_plugin:CornerBlocksSampler'}

    @pytest.mark.skipif('not has_toml()')
    def test_toml_without_prefix(self, tmp_path):
        path = tmp_path / 'fracnet.toml'
        path.write_text('seed = 9\n[commands.evaluate]\nslack = 1.5\n')
        config = FracnetConfig()
        config.loads([str(path)])
        assert config.as_dict()['GLOBAL'] == {'seed': 9}
        assert config.as_dict()['evaluate'] == {'slack': 1.5}

    @pytest.mark.skipif('not has_toml()')
    def test_pyproject_without_section(self, tmp_path):
        path = tmp_path / 'pyproject.toml'
        path.write_text('[tool.other]\nx = 1\n')
        config = FracnetConfig()
        config.loads([str(path)])
        assert {} == dict(config.as_dict())

    @pytest.mark.skipif('not has_toml()')
    def test_unknown_plugin_type(self, tmp_path, capsys):
        path = tmp_path / 'fracnet.toml'
        path.write_text('[plugins.solver]\nfast = "a.b:C"\n')
        assert 3 == cmd_main(['help'], config_filenames=[str(path)])
        err = capsys.readouterr()[1]
        assert 'ERROR: invalid configuration file' in err
        assert "unknown plugin type 'solver'" in err

    def test_no_toml_parser(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setattr(FracnetConfig, '_TOML_LIBS', ['i_dont_exist'])
        path = tmp_path / 'fracnet.toml'
        path.write_text('seed = 9\n')
        config = FracnetConfig()
        config.loads([str(path)])
        assert {} == dict(config.as_dict())
        err = capsys.readouterr()[1]
        assert 'a TOML parser is not available' in err

    def test_plugin_command(self, capsys):
        assert 0 == cmd_main(['help'],
                             config_filenames=get_abspath('sample.cfg'))
        out = capsys.readouterr()[0]
        assert 'fracnet foo ' in out
        assert 'test extending fracnet commands' in out

    def test_plugin_command_execute(self, capsys):
        assert cmd_main(['foo'], config_filenames=get_abspath('sample.cfg')) \
            is None
        out = capsys.readouterr()[0]
        assert 'this command does nothing!' in out

    def test_config_values_used(self, monkeypatch):
        mock_execute = Mock(return_value=0)
        monkeypatch.setattr(GenGeometry, "execute", mock_execute)
        cmd_main(['gen-geometry'], config_filenames=get_abspath('sample.cfg'))
        params, _ = mock_execute.call_args[0]
        assert 6 == params['seed']
        assert 'cfg-out' == params['out']
