"""Reports fracnet pipeline status/results"""

import sys
import time
import datetime
import json
from io import StringIO

from .exceptions import BaseFail, StageFailed


class ConsoleReporter(object):
    """Default reporter. print results on console/terminal (stdout/stderr)

    @ivar failure_verbosity: (int) 0 show traceback only for unexpected
                             errors, 1 show traceback for all failures.
    """
    # short description, used by the help system
    desc = 'console output'

    def __init__(self, outstream, options):
        # save non-successful result information
        self.failures = []
        self.failure_verbosity = options.get('failure_verbosity', 0)
        self.outstream = outstream

    def write(self, text):
        self.outstream.write(text)

    def initialize(self, stages):
        """called with the stage names before execution starts"""
        pass

    def start_stage(self, stage):
        """called when execution starts"""
        self.write('.  %s\n' % stage)

    def progress(self, stage, msg):
        """intermediate message from a running stage"""
        self.write('   %s: %s\n' % (stage, msg))

    def add_failure(self, stage, fail: BaseFail):
        """called when execution finishes with a failure"""
        result = {'stage': stage, 'exception': fail}
        if fail.report:
            self.failures.append(result)
            self._write_failure(result)

    def add_success(self, stage):
        """called when execution finishes successfully"""
        pass

    def skip_stage(self, stage):
        """stage disabled by the configuration"""
        self.write("-- %s\n" % stage)

    def _write_failure(self, result, write_trace=None):
        fail = result['exception']
        msg = '%s - stage:%s\n' % (fail.get_name(), result['stage'])
        self.write(msg)
        if write_trace is None:
            write_trace = (self.failure_verbosity > 0 or
                           not isinstance(fail, StageFailed))
        if write_trace:
            self.write(fail.get_msg())
        else:
            self.write(fail.message + '\n')
        self.write("\n")

    def complete_run(self):
        """called when finished running all stages"""
        if self.failures:
            self.write("#" * 40 + "\n")
            self.write("Pipeline aborted at stage: %s\n" %
                       self.failures[-1]['stage'])


class ZeroReporter(ConsoleReporter):
    """Report only failures, on stderr"""
    desc = 'report only failures'

    def _just_pass(self, *args):
        """over-write base to do nothing"""
        pass

    initialize = start_stage = progress = add_success = skip_stage \
        = complete_run = _just_pass

    def add_failure(self, stage, fail: BaseFail):
        if fail.report:
            sys.stderr.write('%s - stage:%s\n%s\n' % (
                fail.get_name(), stage, fail.message))


class StageResult(object):
    """result object used by JsonReporter"""
    def __init__(self, stage):
        self.stage = stage
        self.result = None  # fail, success, skipped
        self.messages = []  # progress messages
        self.error = None  # failure description (with traceback)
        self.started = None  # datetime when stage execution started
        self.elapsed = None  # time (in secs) taken to execute stage
        self._started_on = None  # timestamp
        self._finished_on = None  # timestamp

    def start(self):
        """called when stage starts its execution"""
        self._started_on = time.time()

    def set_result(self, result, error=None):
        """called when stage finishes its execution"""
        self._finished_on = time.time()
        self.result = result
        self.error = error

    def to_dict(self):
        """convert result data to dictionary"""
        if self._started_on is not None:
            started = datetime.datetime.fromtimestamp(
                self._started_on, datetime.timezone.utc)
            self.started = str(started.strftime('%Y-%m-%d %H:%M:%S.%f'))
            self.elapsed = self._finished_on - self._started_on
        return {'name': self.stage,
                'result': self.result,
                'messages': self.messages,
                'error': self.error,
                'started': self.started,
                'elapsed': self.elapsed}


class JsonReporter(object):
    """output results in JSON format

    - out (str)
    - err (str)
    - stages (list - dict):
         - name (str)
         - result (str)
         - messages (list - str)
         - error (str)
         - started (str)
         - elapsed (float)
    """

    desc = 'output in JSON format'

    def __init__(self, outstream, options=None):  # pylint: disable=W0613
        # options parameter is not used
        # json result is sent to stdout when fracnet finishes running
        self.s_results = {}
        # output can not contain any other text than the json data.
        # so anything that is sent to stdout/err needs to be captured.
        self._old_out = sys.stdout
        sys.stdout = StringIO()
        self._old_err = sys.stderr
        sys.stderr = StringIO()
        self.outstream = outstream

    def initialize(self, stages):
        for stage in stages:
            self.s_results[stage] = StageResult(stage)

    def _result(self, stage):
        if stage not in self.s_results:
            self.s_results[stage] = StageResult(stage)
        return self.s_results[stage]

    def start_stage(self, stage):
        """called when execution starts"""
        self._result(stage).start()

    def progress(self, stage, msg):
        self._result(stage).messages.append(msg)

    def add_failure(self, stage, exception):
        """called when execution finishes with a failure"""
        self._result(stage).set_result('fail', exception.get_msg())

    def add_success(self, stage):
        """called when execution finishes successfully"""
        self._result(stage).set_result('success')

    def skip_stage(self, stage):
        self._result(stage).set_result('skipped')

    def complete_run(self):
        """called when finished running all stages"""
        # restore stdout
        log_out = sys.stdout.getvalue()
        sys.stdout = self._old_out
        log_err = sys.stderr.getvalue()
        sys.stderr = self._old_err

        stage_result_list = [
            sr.to_dict() for sr in self.s_results.values()]
        json_data = {'stages': stage_result_list,
                     'out': log_out,
                     'err': log_err}
        json.dump(json_data, self.outstream)
