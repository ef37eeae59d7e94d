import json
import logging

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(level='INFO'):
    root = logging.getLogger()
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
    root.setLevel(level.upper() if isinstance(level, str) else level)


class TraceLog(object):
    """
    Ordered structured records of one run.

    Each record gets the next ``step`` number and is echoed as a JSON line at
    DEBUG level on the ``cutfinder.trace`` logger.
    """

    def __init__(self):
        self.records = []
        self._echo = logging.getLogger('cutfinder.trace')

    def emit(self, source, **fields):
        record = dict(fields)
        record['step'] = len(self.records)
        record['source'] = source
        self.records.append(record)
        if self._echo.isEnabledFor(logging.DEBUG):
            self._echo.debug(json.dumps(record, sort_keys=True))
        return record

    @property
    def position(self):
        return len(self.records) - 1

    def where(self, **match):
        return [r for r in self.records if all(r.get(k) == v for k, v in match.items())]

    def __len__(self):
        return len(self.records)
