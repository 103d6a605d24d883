"""fracnet CLI (command line interface)"""

import os
import sys
import traceback
from collections import defaultdict
from configparser import ConfigParser
import importlib

from .version import VERSION
from .plugin import PluginDict
from .exceptions import InvalidCommand, InvalidConfig, FracnetError
from .storage import StorageError
from .cmdparse import CmdParseError
from .cmd_help import Help
from .cmd_geometry import GenGeometry
from .cmd_gendata import GenData
from .cmd_train import Train
from .cmd_evaluate import Evaluate
from .cmd_run_example import RunExample


class FracnetConfig():
    """Parse and store values taken from INI and TOML configuration files"""
    # support TOML python libs
    _TOML_LIBS = ['tomllib', 'tomli', 'tomlkit']
    PLUGIN_TYPES = ['command', 'reporter', 'sampler']

    def __init__(self):
        self._toml = None
        self.config = defaultdict(dict)

    def loads(self, config_filenames):
        for config_filename in config_filenames:
            if str(config_filename).lower().endswith('.toml'):
                prefix = ('tool.fracnet'
                          if os.path.basename(config_filename) ==
                          'pyproject.toml' else '')
                toml_config = self.load_config_toml(config_filename, prefix)
                for section in toml_config:
                    self.config[section].update(toml_config[section].items())
            else:
                # INI config format
                ini_config = self.load_config_ini(config_filename)
                for section in ini_config.sections():
                    self.config[section].update(ini_config[section].items())

    @property
    def toml(self):
        """get available toml lib, if any"""
        if self._toml is None:
            for toml_lib in self._TOML_LIBS:
                try:
                    self._toml = importlib.import_module(toml_lib)
                    break
                except ImportError:
                    pass
        return self._toml

    def as_dict(self):
        return self.config

    @staticmethod
    def load_config_ini(filenames):
        """read config from INI files

        :param files: str or list of str.
                      Like ConfigParser.read() param filenames
        """
        cfg_parser = ConfigParser(allow_no_value=True, delimiters=('=',))
        cfg_parser.optionxform = str  # preserve case of option names
        cfg_parser.read(filenames)
        return cfg_parser

    def load_config_toml(self, filename, prefix):
        """read config from a TOML file, adapt to ConfigParser structure

        :param filename: str

        returns an empty dictionary if tool.fracnet is not present
        """
        toml_config = {}
        if not os.path.exists(filename):
            return toml_config
        if not self.toml:
            sys.stderr.write(
                f'WARNING: File "{filename}" might contain fracnet '
                'configuration, but a TOML parser is not available.\n'
                f'\tPlease install one of: {", ".join(self._TOML_LIBS)}.\n')
            return toml_config

        with open(filename, encoding='utf-8') as fp:
            raw = self.toml.loads(fp.read())
        if not raw or not isinstance(raw, dict):
            return toml_config
        if prefix:
            for part in prefix.split('.'):
                raw = raw.get(part, {})
        fracnet_toml = dict(raw)

        # hoist /tool/fracnet/plugins/AAA to /AAA
        for plugin_type, plugins in fracnet_toml.pop('plugins', {}).items():
            if plugin_type not in self.PLUGIN_TYPES:
                raise InvalidConfig(
                    f'{filename}: unknown plugin type {plugin_type!r} '
                    f'(choices: {", ".join(self.PLUGIN_TYPES)})')
            toml_config[plugin_type.upper()] = dict(plugins)

        # hoist /tool/fracnet/commands/bbb to /bbb
        for command, command_config in fracnet_toml.pop('commands',
                                                        {}).items():
            toml_config[command] = dict(command_config)

        # hoist /tool/fracnet/ddd to /GLOBAL/ddd
        for global_name, global_value in fracnet_toml.items():
            toml_config.setdefault('GLOBAL', {})[global_name] = global_value
        return toml_config


class FracnetMain(object):
    # core fracnet commands
    BIN_NAME = sys.argv[0].split('/')[-1]
    FRACNET_CMDS = (Help, GenGeometry, GenData, Train, Evaluate, RunExample)

    def __init__(self, config_filenames=('pyproject.toml', 'fracnet.cfg'),
                 extra_config=None):
        """
        :param extra_config: dict of extra argument values (by argument name)
                             This is parameter is only used by explicit API call.
        """
        if isinstance(config_filenames, str):
            config_filenames = [config_filenames]

        # ignore config files do that not exist
        self.config_filenames = [fn for fn in config_filenames
                                 if os.path.exists(fn)]

        self.config = defaultdict(dict)
        if extra_config:
            for section, items in extra_config.items():
                self.config[section].update(items)

    def load_config(self):
        """combine config option from INI/TOML files and API"""
        config_in = FracnetConfig()
        config_in.loads(self.config_filenames)
        for section, vals in config_in.as_dict().items():
            self.config[section].update(vals)

    @staticmethod
    def print_version():
        """print fracnet version (includes path location)"""
        print(".".join([str(i) for i in VERSION]))
        print("lib @", os.path.dirname(os.path.abspath(__file__)))

    def get_cmds(self):
        """get all sub-commands
        :return dict: name - Command class
        """
        sub_cmds = PluginDict()
        for cmd_cls in self.FRACNET_CMDS:
            sub_cmds[cmd_cls.get_name()] = cmd_cls
        # plugin commands
        sub_cmds.add_plugins(self.config, 'COMMAND')
        return sub_cmds

    def run(self, all_args):
        """entry point for all commands

        :param all_args: list of string arguments from command line

        return codes:
          0: all stages executed successfully
          1: a stage failed
          2: error while executing a stage
          3: error before stage execution starts,
             in this case the Reporter is not used.
        """
        try:
            self.load_config()
        except (InvalidConfig, ValueError) as err:
            sys.stderr.write("ERROR: invalid configuration file: %s\n" % err)
            return 3
        sub_cmds = self.get_cmds()

        # special parameters that dont run anything
        if all_args and all_args[0] == "--version":
            self.print_version()
            return 0
        if not all_args or all_args[0] == "--help":
            help = Help(config=self.config, bin_name=self.BIN_NAME,
                        cmds=sub_cmds)
            help.print_usage(sub_cmds.to_dict())
            return 0

        args = list(all_args)
        cmd_name = args.pop(0)
        if cmd_name not in sub_cmds:
            err = InvalidCommand(not_found=cmd_name)
            err.bin_name = self.BIN_NAME
            sys.stderr.write("ERROR: %s\n" % str(err))
            return 3

        try:
            command = sub_cmds.get_plugin(cmd_name)(
                config=self.config,
                bin_name=self.BIN_NAME,
                cmds=sub_cmds,
            )
            return command.parse_execute(args)

        # dont show traceback for user errors.
        except (CmdParseError, InvalidCommand, FracnetError,
                StorageError) as err:
            if isinstance(err, InvalidCommand):
                err.bin_name = self.BIN_NAME
            sys.stderr.write("ERROR: %s: %s\n" % (cmd_name, str(err)))
            return 3

        except Exception:
            sys.stderr.write(traceback.format_exc())
            return 3
