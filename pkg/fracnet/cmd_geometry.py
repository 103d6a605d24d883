from .cmd_base import ExperimentCmdBase


class GenGeometry(ExperimentCmdBase):
    name = 'gen-geometry'
    doc_purpose = "build the simulation and observation geometries"
    doc_description = """\
Writes geometry_sim.json and geometry_obs.json to the output directory. \
Geometries given by "geometry_sim"/"geometry_obs" in the config file are \
loaded and copied, otherwise they are built from the fracture network of \
the selected example."""
    stages = ('geometry',)
