from .harness import STAGES
from .cmd_base import ExperimentCmdBase


class GenData(ExperimentCmdBase):
    name = 'gen-data'
    doc_purpose = "generate coarse trajectories and training pairs"
    doc_description = """\
Runs the stages from geometry to pairs: multiscale basis, source sampling, \
coarse simulations on both geometries and the one-step pair sets used by \
the train command."""
    stages = STAGES[:STAGES.index('pairs') + 1]
