from .cmd_base import Command


HELP_STAGES = """

Pipeline stages
---------------

geometry:
  build (or load) the simulation and observation geometries,
  writes geometry_sim.json / geometry_obs.json

basis:
  multiscale basis functions and coarse operators of both geometries,
  writes coarse_sim/ and coarse_obs/ (T, A_T, M_T and coarse.json)

sources:
  sample the source terms and the train/test split, writes sources.json

upscaling-check [only with "upscaling_check": true]:
  compare coarse and continuum-averaged fine trajectories,
  writes upscaling_check.json

simulate:
  coarse trajectories of every source on both geometries,
  writes data_sim/ and data_obs/

pairs:
  one-step training pairs for N_o, N_m, N_s and the test pairs,
  writes pairs/train_o, pairs/train_m, pairs/train_s, pairs/test

train:
  train the three networks for every input mode,
  writes <mode>/model_{o,m,s}.* and <mode>/loss_history_{o,m,s}.csv

evaluate:
  relative errors against observation data on the test sources,
  writes <mode>/predictions_{o,m,s}.npy

report:
  writes report.json and errors_per_sample.csv
"""


class Help(Command):
    doc_purpose = "show help"
    doc_usage = "[COMMAND]"
    doc_description = None

    def __init__(self, cmds=None, **kwargs):
        """
        :param cmds: PluginDict
        """
        self.init_kwargs = kwargs
        super(Help, self).__init__(**kwargs)
        self._cmds = cmds
        self.cmds = cmds.to_dict()  # dict name - Command class

    def print_usage(self, cmds):
        """print fracnet "usage" (basic help) instructions

        :var cmds: dict name -> Command class
        """
        print("fracnet -- learned coarse time stepping in fractured media")
        print('')
        print("Commands")
        for cmd_name in sorted(cmds.keys()):
            cmd = cmds[cmd_name]
            print("  {} {:16s}  {}".format(
                self.bin_name, cmd_name, cmd.doc_purpose))
        print("")
        cmd_help = "  {} help".format(self.bin_name)
        for line in [
                "{}              show help / reference",
                "{} stages       show the pipeline stages and their outputs",
                "{} <command>    show command usage"]:
            print(line.format(cmd_help))

    @staticmethod
    def print_stages_help():
        print(HELP_STAGES)

    def execute(self, params, args):
        """execute cmd 'help' """
        if len(args) != 1:
            self.print_usage(self.cmds)
        elif args[0] == 'stages':
            self.print_stages_help()
        elif args[0] in self.cmds:
            cmd = self.cmds[args[0]](cmds=self._cmds, **self.init_kwargs)
            print(cmd.help())
        else:
            self.print_usage(self.cmds)
        return 0
