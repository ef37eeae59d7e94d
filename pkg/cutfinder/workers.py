import logging
from queue import Queue
from threading import Lock, Thread

logger = logging.getLogger(__name__)


class CellPool(object):
    """
    Runs independent jobs on daemon worker threads fed from a queue.

    Each job is ``(key, fn, args)``; results are collected per key and
    returned sorted by key, so output order never depends on scheduling.
    """

    def __init__(self, thread_count=1):
        self.thread_count = max(1, int(thread_count))
        self.queue = Queue()
        self.results = {}
        self.errors = {}
        self.lock = Lock()
        for i in range(self.thread_count):
            worker = Thread(target=self.do_job_from_queue, name='cutfinder-cell-{}'.format(i))
            worker.daemon = True
            worker.start()

    def submit(self, key, fn, *args):
        self.queue.put((key, fn, args))

    def do_job_from_queue(self):
        while True:
            key, fn, args = self.queue.get()
            try:
                result = fn(*args)
                with self.lock:
                    self.results[key] = result
            except Exception as exc:
                logger.exception('bench cell %s failed', key)
                with self.lock:
                    self.errors[key] = exc
            self.queue.task_done()

    def join(self):
        """Waits for every submitted job; re-raises the first failure by key order."""
        self.queue.join()
        if self.errors:
            raise self.errors[sorted(self.errors)[0]]
        return [self.results[key] for key in sorted(self.results)]
