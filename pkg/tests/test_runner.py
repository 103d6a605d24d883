import os

import pytest

from fracnet import runner
from fracnet.exceptions import InvalidGeometry, StageFailed, StageError
from fracnet.storage import Manifest, load_json


# sample jobs
def square(x):
    return x * x

def explode(x):
    if x == 2:
        raise ValueError('no twos')
    return x


class FakeReporter(object):
    """Just log everything in internal attribute - used on tests"""
    def __init__(self, with_exceptions=False):
        self.with_exceptions = with_exceptions
        self.log = []

    def initialize(self, stages):
        self.log.append(('initialize', tuple(stages)))

    def start_stage(self, stage):
        self.log.append(('start', stage))

    def progress(self, stage, msg):
        self.log.append(('progress', stage, msg))

    def add_failure(self, stage, exception):
        if self.with_exceptions:
            self.log.append(('fail', stage, exception))
        else:
            self.log.append(('fail', stage))

    def add_success(self, stage):
        self.log.append(('success', stage))

    def skip_stage(self, stage):
        self.log.append(('skip', stage))

    def complete_run(self):
        self.log.append(('complete_run',))


class TestRunner(object):
    def test_map(self):
        assert [0, 1, 4] == runner.Runner().map(square, range(3))

    def test_map_empty(self):
        assert [] == runner.Runner().map(square, [])


class TestMThreadRunner(object):
    def test_order(self):
        run = runner.MThreadRunner(3)
        assert [x * x for x in range(10)] == run.map(square, range(10))

    def test_single_item_inline(self):
        assert [9] == runner.MThreadRunner(4).map(square, [3])

    def test_empty(self):
        assert [] == runner.MThreadRunner(2).map(square, [])

    def test_error(self):
        run = runner.MThreadRunner(2)
        with pytest.raises(ValueError) as exc_info:
            run.map(explode, [1, 2, 3])
        assert 'no twos' in str(exc_info.value)

    def test_closure(self):
        offset = 10
        run = runner.MThreadRunner(2)
        assert [10, 11] == run.map(lambda x: x + offset, [0, 1])


@pytest.mark.skipif('not runner.MRunner.available()')
class TestMRunner(object):
    def test_order(self):
        run = runner.MRunner(2)
        assert [x * x for x in range(6)] == run.map(square, range(6))

    def test_lambda(self):
        # jobs are sent to children with cloudpickle
        pytest.importorskip('cloudpickle')
        run = runner.MRunner(2)
        assert [1, 2, 3] == run.map(lambda x: x + 1, [0, 1, 2])

    def test_error(self):
        run = runner.MRunner(2)
        pytest.raises(ValueError, run.map, explode, [1, 2, 3])


class TestGetRunner(object):
    def test_serial(self):
        assert type(runner.get_runner()) is runner.Runner
        assert type(runner.get_runner(1, 'thread')) is runner.Runner

    def test_thread(self):
        got = runner.get_runner(3, 'thread')
        assert isinstance(got, runner.MThreadRunner)
        assert 3 == got.num_process

    def test_process(self):
        got = runner.get_runner(2, 'process')
        assert isinstance(got, runner.MRunner)


class TestStage(object):
    def test_repr(self):
        assert '<Stage: train>' == repr(runner.Stage('train', None))

    def test_enabled_default(self):
        assert runner.Stage('train', None).enabled


class TestStageRunner(object):
    def test_success(self):
        done = []
        reporter = FakeReporter()
        stages = [runner.Stage('a', lambda: done.append('a')),
                  runner.Stage('b', lambda: done.append('b'))]
        result = runner.StageRunner(reporter).run_all(stages)
        assert runner.SUCCESS == result
        assert ['a', 'b'] == done
        assert [('initialize', ('a', 'b')),
                ('start', 'a'), ('success', 'a'),
                ('start', 'b'), ('success', 'b'),
                ('complete_run',)] == reporter.log

    def test_fracnet_error_is_failure(self):
        def bad_geometry():
            raise InvalidGeometry('no fracture')
        done = []
        reporter = FakeReporter(with_exceptions=True)
        stage_runner = runner.StageRunner(reporter)
        stages = [runner.Stage('a', bad_geometry),
                  runner.Stage('b', lambda: done.append('b'))]
        assert runner.FAILURE == stage_runner.run_all(stages)
        # execution stops at the first failure
        assert [] == done
        fail = reporter.log[2][2]
        assert isinstance(fail, StageFailed)
        assert 'a: no fracture' == fail.message
        assert stage_runner.failure is fail
        assert ('complete_run',) == reporter.log[-1]

    def test_other_exception_is_error(self):
        def crash():
            raise KeyError('oops')
        reporter = FakeReporter(with_exceptions=True)
        result = runner.StageRunner(reporter).run_all(
            [runner.Stage('a', crash)])
        assert runner.ERROR == result
        assert isinstance(reporter.log[2][2], StageError)

    def test_interrupt_propagates(self):
        def interrupt():
            raise KeyboardInterrupt()
        reporter = FakeReporter()
        stage_runner = runner.StageRunner(reporter)
        pytest.raises(KeyboardInterrupt, stage_runner.run_all,
                      [runner.Stage('a', interrupt)])
        # finish() is still executed
        assert ('complete_run',) == reporter.log[-1]

    def test_disabled_stage(self):
        done = []
        reporter = FakeReporter()
        stages = [runner.Stage('a', lambda: done.append('a'), enabled=False),
                  runner.Stage('b', lambda: done.append('b'))]
        assert runner.SUCCESS == runner.StageRunner(reporter).run_all(stages)
        assert ['b'] == done
        assert ('skip', 'a') in reporter.log


class TestStageRunnerManifest(object):
    def test_complete(self, tmp_path):
        manifest = Manifest(str(tmp_path))
        stages = [runner.Stage('a', lambda: None),
                  runner.Stage('b', lambda: None, enabled=False)]
        runner.StageRunner(FakeReporter(), manifest).run_all(stages)
        saved = load_json(os.path.join(str(tmp_path), 'manifest.json'))
        assert saved == {'complete': True,
                         'stages': {'a': 'success', 'b': 'skipped'}}

    def test_failure_not_complete(self, tmp_path):
        def fail():
            raise InvalidGeometry('bad')
        manifest = Manifest(str(tmp_path))
        stages = [runner.Stage('a', fail), runner.Stage('b', lambda: None)]
        runner.StageRunner(FakeReporter(), manifest).run_all(stages)
        saved = load_json(os.path.join(str(tmp_path), 'manifest.json'))
        assert saved == {'complete': False,
                         'stages': {'a': 'failure', 'b': 'pending'}}

    def test_rerun_keeps_previous_status(self, tmp_path):
        runner.StageRunner(FakeReporter(), Manifest(str(tmp_path))).run_all(
            [runner.Stage('a', lambda: None)])
        manifest = Manifest(str(tmp_path))
        runner.StageRunner(FakeReporter(), manifest).run_all(
            [runner.Stage('b', lambda: None)])
        assert manifest.complete
        assert 'success' == manifest.get('a')
        assert 'success' == manifest.get('b')
