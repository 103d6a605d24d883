from .cmd_base import ExperimentCmdBase


class RunExample(ExperimentCmdBase):
    name = 'run-example'
    doc_purpose = "run a whole experiment, from geometry to report"
    doc_description = """\
Equivalent to gen-data, train and evaluate in sequence. Without config file \
the defaults of the example selected with --example are used."""
