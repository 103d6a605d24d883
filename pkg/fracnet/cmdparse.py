"""Parse command line options of fracnet sub-commands.

Built on top of getopt. Option values come from (highest priority first)
the command line, environment variables, the config file and the option
defaults hard-coded in each command.
"""
import os
import getopt
import copy
from collections import OrderedDict


class DefaultUpdate(dict):
    """dict that tells apart default values from explicitly set values

    Values set with `set_default`/`add_defaults`/`update_defaults` are
    defaults. Values set with `d[key] = value` are explicit and are not
    replaced by later `update_defaults` calls.
    """
    def __init__(self, *args, **kwargs):
        dict.__init__(self, *args, **kwargs)
        self._explicit = set()

    def set_default(self, key, value):
        dict.__setitem__(self, key, value)

    def add_defaults(self, source):
        """add defaults for keys not present yet"""
        for key, value in source.items():
            if key not in self:
                self.set_default(key, value)

    def update_defaults(self, update_dict):
        """like dict.update but keep explicitly set values"""
        for key, value in update_dict.items():
            if key not in self._explicit:
                self.set_default(key, value)

    def __setitem__(self, key, value):
        # unpickling calls __setitem__ before __init__
        if not hasattr(self, '_explicit'):
            self._explicit = set()
        self._explicit.add(key)
        dict.__setitem__(self, key, value)


class CmdParseError(Exception):
    """Error parsing options """


class CmdOption(object):
    """a command line option

       - name (string) : variable name, also the key in config files
       - section (string): group title used by the help
       - default: default value (already of the option type)
       - type (type): str, int, float, bool or list. bool options are
                      flags, list options accumulate values.
       - short (string): argument short name
       - long (string): argument long name
       - inverse (string): long name setting a bool option to False
       - choices (list - 2-tuple str): (choice name, choice description)
       - help (string): option description, may use %(default)s
       - metavar (string): value placeholder in the help
       - env_var (string): environment variable overriding config/default
    """
    _fields = ('section', 'type', 'short', 'long', 'inverse', 'choices',
               'help', 'metavar', 'env_var')

    def __init__(self, opt_dict):
        opt_dict = opt_dict.copy()
        for required in ('name', 'default'):
            if required not in opt_dict:
                msg = "CmdOption dict %r missing required property '%s'"
                raise CmdParseError(msg % (opt_dict, required))
        unknown = set(opt_dict) - set(self._fields) - {'name', 'default'}
        if unknown:
            msg = "CmdOption dict contains invalid property '%s'"
            raise CmdParseError(msg % sorted(unknown))

        self.name = opt_dict['name']
        self.section = opt_dict.get('section', '')
        self.type = opt_dict.get('type', str)
        self.short = opt_dict.get('short', '')
        self.long = opt_dict.get('long', '')
        self.inverse = opt_dict.get('inverse', '')
        self.choices = dict(opt_dict.get('choices', []))
        self.help = opt_dict.get('help', '')
        self.metavar = opt_dict.get('metavar', 'ARG')
        self.env_var = opt_dict.get('env_var', None)
        self.set_default(opt_dict['default'])

    def __repr__(self):
        return "%s({'name':%r, 'short':%r,'long':%r })" % (
            self.__class__.__name__, self.name, self.short, self.long)

    def set_default(self, val):
        """set default value, value is already the expected type"""
        self.default = copy.copy(val) if self.type is list else val

    def validate_choice(self, given_value):
        """raise error is value is not a valid choice"""
        if given_value not in self.choices:
            choices = ", ".join(f"'{k}'" for k in self.choices)
            raise CmdParseError(
                f"Error parsing parameter '{self.name}'. Provided "
                f"'{given_value}' but available choices are: {choices}.")

    _boolean_states = {
        '1': True, 'yes': True, 'true': True, 'on': True,
        '0': False, 'no': False, 'false': False, 'off': False,
    }

    def str2boolean(self, str_val):
        try:
            return self._boolean_states[str_val.lower()]
        except KeyError:
            raise ValueError('Not a boolean: {}'.format(str_val))

    def str2type(self, str_val):
        """convert string value to option type value

        Values that are not strings (from TOML configs) are kept as is.
        """
        try:
            if not isinstance(str_val, str):
                val = str_val
            elif self.type is bool:
                val = self.str2boolean(str_val)
            elif self.type is list:
                val = [p.strip() for p in str_val.split(',') if p.strip()]
            else:
                val = self.type(str_val)
        except ValueError as exception:
            raise CmdParseError(
                f"Error parsing parameter '{self.name}' {self.type}.\n"
                f"{exception}\n")
        if self.choices:
            self.validate_choice(val)
        return val

    def help_param(self):
        """option short and long names, i.e. `-s ARG, --seed=ARG`"""
        names = []
        if self.short:
            names.append('-' + self.short if self.type is bool
                         else '-%s %s' % (self.short, self.metavar))
        if self.long:
            names.append('--' + self.long if self.type is bool
                         else '--%s=%s' % (self.long, self.metavar))
        return ', '.join(names)

    def help_choices(self):
        """help text listing option choices"""
        if not self.choices:
            return ''
        if any(self.choices.values()):
            return "\nchoices:" + "".join(
                "\n{}: {}".format(name, self.choices[name])
                for name in sorted(self.choices))
        return "\nchoices: " + ", ".join(sorted(self.choices))


class CmdParse(object):
    """Process string with command options

    @ivar options: (list - CmdOption)
    """
    _type = "Command"

    def __init__(self, options):
        self._options = OrderedDict((o.name, o) for o in options)

    def __contains__(self, key):
        return key in self._options

    def __getitem__(self, key):
        return self._options[key]

    @property
    def options(self):
        return list(self._options.values())

    def get_short(self):
        """short options string for getopt, `:` marks a value"""
        return "".join(opt.short + ('' if opt.type is bool else ':')
                       for opt in self._options.values() if opt.short)

    def get_long(self):
        """list of long options for getopt, `=` marks a value"""
        long_list = []
        for opt in self._options.values():
            if opt.long:
                long_list.append(opt.long + ('' if opt.type is bool else '='))
            if opt.inverse:
                long_list.append(opt.inverse)
        return long_list

    def get_option(self, opt_str):
        """@return (CmdOption or None, matched inverse)"""
        for opt in self._options.values():
            if opt_str in ('-' + opt.short, '--' + opt.long):
                return opt, False
            if opt.inverse and opt_str == '--' + opt.inverse:
                return opt, True
        return None, None

    def overwrite_defaults(self, new_defaults):
        """overwrite option defaults (values from a config file)"""
        for key, val in new_defaults.items():
            if key in self._options:
                opt = self._options[key]
                opt.set_default(opt.str2type(val))

    def parse_only(self, in_args, params=None):
        """parse arguments into options(params) and positional arguments

        @param in_args (list - string): typically sys.argv[1:]
        @return params, pos_args
        """
        params = params if params else {}
        try:
            opts, args = getopt.getopt(in_args, self.get_short(),
                                       self.get_long())
        except getopt.GetoptError as error:
            raise CmdParseError(
                f"Error parsing {self._type}: {error} "
                f"(parsing options: {self.options}). Got: {in_args}")

        for opt_str, val in opts:
            this, inverse = self.get_option(opt_str)
            if this.type is bool:
                params[this.name] = not inverse
            elif this.type is list:
                params[this.name] = list(params.get(this.name, [])) + [val]
            else:
                params[this.name] = this.str2type(val)
        return params, args

    def parse(self, in_args):
        """parse arguments, filling defaults and environment values

        @return params (DefaultUpdate with an item for every option), pos_args
        """
        params = DefaultUpdate()
        for opt in self._options.values():
            params.set_default(opt.name, opt.default)
        for opt in self._options.values():
            if opt.env_var:
                val = os.getenv(opt.env_var)
                if val is not None:
                    params[opt.name] = opt.str2type(val)
        return self.parse_only(in_args, params)
