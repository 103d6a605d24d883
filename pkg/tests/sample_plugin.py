from fracnet.cmd_base import Command
from fracnet.datagen import SourceSampler, BlockWellSource


class MyCmd(Command):
    name = 'mycmd'
    doc_purpose = 'test extending fracnet commands'
    doc_usage = '[XXX]'
    doc_description = 'my command description'

    def execute(self, opt_values, pos_args):
        print("this command does nothing!")


##############

class CornerBlocksSampler(SourceSampler):
    """always the same two wells, lower-left to upper-right block"""
    name = 'corner-blocks'

    def __init__(self, grid, magnitude=1.0):
        self.grid = grid
        self.magnitude = magnitude

    @classmethod
    def for_geometry(cls, geometry, n_steps, **options):
        return cls(geometry.grid, **options)

    def sample(self, count, seed):
        last = self.grid.n_blocks - 1
        return [BlockWellSource(self.grid, 0, last, self.magnitude)
                for _ in range(count)]
