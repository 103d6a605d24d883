"""Job runners (serial / multi-process) and the pipeline stage runner"""

from multiprocessing import Process, Queue as MQueue
from threading import Thread
import pickle
import queue

try:
    import cloudpickle
    pickle_dumps = cloudpickle.dumps
except ImportError:  # pragma: no cover
    pickle_dumps = pickle.dumps

from .exceptions import FracnetError, BaseFail, StageFailed, StageError


# execution result.
SUCCESS = 0
FAILURE = 1
ERROR = 2


class Runner():
    """execute a job over a list of items in the current process

    map() returns results in the order of the items.
    """
    def __init__(self, num_process=1):
        self.num_process = num_process

    def map(self, func, items):
        return [func(item) for item in items]


class MRunner(Runner):
    """MultiProcessing Runner

    Items are dispatched one by one to `num_process` children, results are
    sent back tagged with the item position so the output does not depend
    on scheduling.
    """
    Queue = staticmethod(MQueue)
    Child = staticmethod(Process)

    @staticmethod
    def available():
        """check if multiprocessing module is available"""
        # not available on BSD systems
        try:
            import multiprocessing.synchronize
            multiprocessing  # pyflakes
        except ImportError:  # pragma: no cover
            return False
        else:
            return True

    def map(self, func, items):
        items = list(items)
        if not items:
            return []
        if self.num_process <= 1 or len(items) == 1:
            return Runner.map(self, func, items)

        job_q = self.Queue()
        result_q = self.Queue()
        for idx, item in enumerate(items):
            job_q.put((idx, item))
        n_children = min(self.num_process, len(items))
        for _ in range(n_children):
            job_q.put(None)

        func_dump = pickle_dumps(func)
        proc_list = []
        for _ in range(n_children):
            process = self.Child(target=self.execute_job_subprocess,
                                 args=(func_dump, job_q, result_q))
            process.start()
            proc_list.append(process)

        results = [None] * len(items)
        try:
            for _ in range(len(items)):
                result = result_q.get()
                if 'exit' in result:
                    raise result['exit'](result['exception'])
                results[result['index']] = result['value']
        except (SystemExit, KeyboardInterrupt, Exception):
            if self.Child == Process:
                for proc in proc_list:
                    proc.terminate()
            raise
        for proc in proc_list:
            proc.join()
        return results

    @staticmethod
    def execute_job_subprocess(func_dump, job_q, result_q):
        """executed on child processes

        @param job_q: (index, item) pairs, None means the child can finish
        """
        try:
            func = pickle.loads(func_dump)
            while True:
                job = job_q.get()
                if job is None:
                    return
                idx, item = job
                result_q.put({'index': idx, 'value': func(item)})
        except (SystemExit, KeyboardInterrupt, Exception) as exception:
            # error, blow-up everything. send exception info to master process
            result_q.put({
                'exit': exception.__class__,
                'exception': str(exception)})


class MThreadRunner(MRunner):
    """Parallel runner using threads"""
    Queue = staticmethod(queue.Queue)

    class DaemonThread(Thread):
        """daemon thread to make sure process is terminated if there is
        an uncatch exception and threads are not correctly joined.
        """
        def __init__(self, *args, **kwargs):
            Thread.__init__(self, *args, **kwargs)
            self.daemon = True
    Child = staticmethod(DaemonThread)

    @staticmethod
    def available():
        return True


def get_runner(num_process=0, par_type='process'):
    """pick a job runner for `num_process` workers (0 or 1 -> serial)"""
    if num_process <= 1:
        return Runner()
    if par_type == 'process' and MRunner.available():
        return MRunner(num_process)
    return MThreadRunner(num_process)


class Stage(object):
    """named pipeline step

    :ivar action: callable without arguments
    :ivar enabled: disabled stages are reported as skipped
    """
    def __init__(self, name, action, enabled=True):
        self.name = name
        self.action = action
        self.enabled = enabled

    def __repr__(self):
        return "<Stage: %s>" % self.name


class StageRunner():
    """execute pipeline stages in order

    run_all()
      for each stage:
          execute_stage()
          process_stage_result()
      finish()
    """
    def __init__(self, reporter, manifest=None):
        """
        @param reporter: reporter object to be used
        @param manifest: storage.Manifest updated after every stage
        """
        self.reporter = reporter
        self.manifest = manifest
        self.final_result = SUCCESS  # until something fails
        self.failure = None  # BaseFail of the stage that stopped the run
        self._stop_running = False

    def _set_status(self, stage, status):
        if self.manifest is not None:
            self.manifest.set(stage.name, status)
            self.manifest.dump()

    def _handle_stage_error(self, stage, base_fail):
        """handle all stage failures/errors"""
        assert isinstance(base_fail, BaseFail)
        self.failure = base_fail
        self._set_status(stage, 'failure')
        self.reporter.add_failure(stage.name, base_fail)
        # only return FAILURE if no errors happened.
        if isinstance(base_fail, StageFailed) and self.final_result != ERROR:
            self.final_result = FAILURE
        else:
            self.final_result = ERROR
        self._stop_running = True

    def execute_stage(self, stage):
        """execute stage action

        @return failure: see exceptions.BaseFail or None on success
        """
        self.reporter.start_stage(stage.name)
        try:
            stage.action()
        except FracnetError as exception:
            return StageFailed(f'{stage.name}: {exception}', exception)
        except (KeyboardInterrupt, SystemExit):
            raise
        except Exception as exception:
            return StageError(f'{stage.name}: {exception}', exception)
        return None

    def process_stage_result(self, stage, base_fail):
        if base_fail is None:
            self._set_status(stage, 'success')
            self.reporter.add_success(stage.name)
        else:
            self._handle_stage_error(stage, base_fail)

    def finish(self):
        if self.manifest is not None:
            self.manifest.finish(self.final_result == SUCCESS)
        self.reporter.complete_run()
        return self.final_result

    def run_all(self, stages):
        """entry point to run stages
        @return (int) SUCCESS, FAILURE or ERROR
        """
        names = [stage.name for stage in stages]
        self.reporter.initialize(names)
        if self.manifest is not None:
            self.manifest.start(names)
        try:
            for stage in stages:
                if self._stop_running:
                    break
                if not stage.enabled:
                    self._set_status(stage, 'skipped')
                    self.reporter.skip_stage(stage.name)
                    continue
                base_fail = self.execute_stage(stage)
                self.process_stage_result(stage, base_fail)
        finally:
            self.finish()
        return self.final_result
