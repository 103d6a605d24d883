import sys
import json
from io import StringIO

from fracnet import reporter
from fracnet.exceptions import StageFailed, StageError


class TestConsoleReporter(object):

    def test_initialize(self):
        rep = reporter.ConsoleReporter(StringIO(), {})
        rep.initialize(['gen-geometry'])
        # no output on initialize
        assert "" == rep.outstream.getvalue()

    def test_start_stage(self):
        rep = reporter.ConsoleReporter(StringIO(), {})
        rep.start_stage('gen-data')
        assert ".  gen-data\n" == rep.outstream.getvalue()

    def test_progress(self):
        rep = reporter.ConsoleReporter(StringIO(), {})
        rep.progress('train', 'epoch 10 loss 0.5')
        assert "   train: epoch 10 loss 0.5\n" == rep.outstream.getvalue()

    def test_skip_stage(self):
        rep = reporter.ConsoleReporter(StringIO(), {})
        rep.skip_stage('evaluate')
        assert "-- evaluate\n" == rep.outstream.getvalue()

    def test_add_success(self):
        rep = reporter.ConsoleReporter(StringIO(), {})
        rep.add_success('train')
        assert "" == rep.outstream.getvalue()

    def test_add_failure(self):
        rep = reporter.ConsoleReporter(StringIO(), {})
        rep.add_failure('train', StageFailed('training diverged'))
        out = rep.outstream.getvalue()
        assert "StageFailed - stage:train" in out
        assert "training diverged" in out
        # no traceback for expected failures
        assert "Traceback" not in out
        assert 1 == len(rep.failures)

    def test_add_failure_not_reported(self):
        rep = reporter.ConsoleReporter(StringIO(), {})
        rep.add_failure('train', StageFailed('quiet', report=False))
        assert "" == rep.outstream.getvalue()
        assert [] == rep.failures

    def test_error_writes_traceback(self):
        rep = reporter.ConsoleReporter(StringIO(), {})
        try:
            raise IndexError('index out of range')
        except Exception as exception:
            fail = StageError('unexpected', exception)
        rep.add_failure('gen-data', fail)
        out = rep.outstream.getvalue()
        assert "StageError - stage:gen-data" in out
        assert "IndexError" in out
        assert "Traceback" in out

    def test_failure_verbosity(self):
        rep = reporter.ConsoleReporter(StringIO(), {'failure_verbosity': 1})
        try:
            raise ValueError('bad value')
        except Exception as exception:
            fail = StageFailed('failed', exception)
        rep.add_failure('train', fail)
        assert "Traceback" in rep.outstream.getvalue()

    def test_complete_run_ok(self):
        rep = reporter.ConsoleReporter(StringIO(), {})
        rep.complete_run()
        assert "" == rep.outstream.getvalue()

    def test_complete_run_failure(self):
        rep = reporter.ConsoleReporter(StringIO(), {})
        rep.add_failure('evaluate', StageFailed('no model'))
        rep.complete_run()
        assert "Pipeline aborted at stage: evaluate" in \
            rep.outstream.getvalue()


class TestZeroReporter(object):
    def test_only_failures(self, capsys):
        rep = reporter.ZeroReporter(StringIO(), {})
        rep.initialize(['train'])
        rep.start_stage('train')
        rep.progress('train', 'epoch 1')
        rep.add_success('train')
        rep.skip_stage('evaluate')
        rep.complete_run()
        assert "" == rep.outstream.getvalue()
        rep.add_failure('train', StageFailed('bad'))
        err = capsys.readouterr()[1]
        assert "StageFailed - stage:train\nbad\n" == err


class TestJsonReporter(object):

    def test_json(self):
        output = StringIO()
        rep = reporter.JsonReporter(output)
        rep.initialize(['gen-geometry', 'gen-data', 'train'])
        rep.start_stage('gen-geometry')
        rep.add_success('gen-geometry')
        rep.start_stage('gen-data')
        rep.progress('gen-data', '3 samples')
        print('printed while running')
        sys.stderr.write('some warning')
        rep.add_failure('gen-data', StageFailed('solver failed'))
        rep.skip_stage('train')
        rep.complete_run()
        got = json.loads(output.getvalue())
        assert 'printed while running\n' == got['out']
        assert 'some warning' == got['err']
        stages = {s['name']: s for s in got['stages']}
        assert ['gen-geometry', 'gen-data', 'train'] == \
            [s['name'] for s in got['stages']]
        assert 'success' == stages['gen-geometry']['result']
        assert stages['gen-geometry']['elapsed'] >= 0
        assert stages['gen-geometry']['started'] is not None
        assert 'fail' == stages['gen-data']['result']
        assert 'solver failed' in stages['gen-data']['error']
        assert ['3 samples'] == stages['gen-data']['messages']
        assert 'skipped' == stages['train']['result']
        assert stages['train']['started'] is None

    def test_restores_streams(self):
        out, err = sys.stdout, sys.stderr
        rep = reporter.JsonReporter(StringIO())
        assert sys.stdout is not out
        rep.complete_run()
        assert sys.stdout is out
        assert sys.stderr is err
