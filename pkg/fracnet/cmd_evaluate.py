from .cmd_base import ExperimentCmdBase


opt_warmup = {
    'section': 'evaluation',
    'name': 'rollout_warmup',
    'short': 'w',
    'long': 'warmup',
    'type': int,
    'default': None,
    'help': ("number of N_s steps applied before the evaluated network, "
             "0 disables the multi-step evaluation"),
}

opt_slack = {
    'section': 'evaluation',
    'name': 'slack',
    'short': '',
    'long': 'slack',
    'type': float,
    'default': None,
    'help': "tolerance factor of the N_o <= N_m <= N_s ordering check",
}


class Evaluate(ExperimentCmdBase):
    doc_purpose = "compute test errors and write the report"
    doc_description = """\
Loads the trained models and reports relative errors (%) against the \
observation data of the test sources in report.json and \
errors_per_sample.csv."""
    cmd_options = (opt_warmup, opt_slack)
    overrides = ExperimentCmdBase.overrides + ('rollout_warmup', 'slack')
    stages = ('evaluate', 'report')
