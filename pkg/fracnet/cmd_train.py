from .cmd_base import ExperimentCmdBase


opt_per_step = {
    'section': 'training',
    'name': 'per_step',
    'short': '',
    'long': 'per-step',
    'inverse': 'single-net',
    'type': bool,
    'default': None,
    'help': "train one network per time step, overrides the config file",
}


class Train(ExperimentCmdBase):
    doc_purpose = "train the N_o, N_m and N_s surrogates"
    doc_description = """\
Needs the pair sets written by gen-data in the output directory. Models \
and loss histories are saved in one directory per input mode."""
    cmd_options = (opt_per_step,)
    overrides = ExperimentCmdBase.overrides + ('per_step',)
    stages = ('train',)
