"""Errors raised by fracnet and failure records kept by the stage runner"""

import sys
import traceback


class InvalidCommand(Exception):
    """Invalid command line argument."""
    def __init__(self, *args, **kwargs):
        self.not_found = kwargs.pop('not_found', None)
        super(InvalidCommand, self).__init__(*args, **kwargs)
        self.bin_name = 'fracnet'  # default but might be overwriten

    def __str__(self):
        if self.not_found is None:
            return super(InvalidCommand, self).__str__()

        msg_cmd_not_found = (
            'Invalid parameter: "{not_found}". Must be a command.\n'
            'Type "{bin_name} help" to see available commands.\n')
        return msg_cmd_not_found.format(**self.__dict__)


class FracnetError(Exception):
    """Base for errors in user input or in a numerical stage.

    The stage runner reports these as failures (not errors) and the CLI
    prints them without a traceback.
    """
    pass


class InvalidConfig(FracnetError):
    """Experiment or command configuration is not valid"""
    pass

class InvalidGeometry(FracnetError, ValueError):
    """Fracture network, grid or oversampling request is not valid"""
    pass

class InvalidField(FracnetError, ValueError):
    """A mobility or source field produced an unusable value"""
    pass

class DimensionMismatch(FracnetError, ValueError):
    """Arrays or chained networks have incompatible sizes"""
    pass

class SolverError(FracnetError):
    """Linear solve failed or did not reach the residual tolerance"""
    pass

class SnapshotMismatch(FracnetError):
    """Basis functions were built for another geometry or mobility"""
    pass

class DatasetMismatch(FracnetError):
    """Datasets or pair sets can not be combined"""
    pass

class TrainingDiverged(FracnetError):
    """Training loss became non finite"""
    pass

class ZeroReference(FracnetError, ValueError):
    """Relative error requested against a zero reference vector"""
    pass



class BaseFail(object):
    """Save info on stage failures/errors

    Might contain a caught Exception.

    :ivar report: used by (some) reporters to decide if Failure/Error should
                  be printed
    """
    def __init__(self, msg, exception=None, report=True):
        self.message = msg
        self.traceback = ''
        self.report = report
        # exceptions are not always pickable, keep only the formatted text

        if isinstance(exception, BaseFail):
            self.traceback = exception.traceback
        elif exception is not None:
            self.traceback = traceback.format_exception(
                exception.__class__, exception, sys.exc_info()[2])

    def get_msg(self):
        """return full exception description (includes traceback)"""
        return "%s\n%s" % (self.message, "".join(self.traceback))

    def get_name(self):
        """get fail kind name"""
        return self.__class__.__name__

    def __repr__(self):
        return "(<%s> %s)" % (self.get_name(), self.message)

    def __str__(self):
        return "%s\n%s" % (self.get_name(), self.get_msg())


class StageFailed(BaseFail):
    """Stage stopped on a known fracnet error."""
    pass


class StageError(BaseFail):
    """Unexpected error while executing a stage"""
    pass
