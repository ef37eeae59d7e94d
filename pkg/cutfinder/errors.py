class CutfinderError(Exception):
    """Base class for every error raised by cutfinder."""


class ConfigurationError(CutfinderError):
    pass


class MalformedTraceError(CutfinderError):
    pass


class OutOfRangeError(CutfinderError):
    pass


class IngestionError(CutfinderError):

    def __init__(self, message, path=None, row=None):
        """
        Creates a new IngestionError.
        Parameters
        ----------
        message - What was wrong with the input
        path - The file being read, if any
        row - The 1-based data row number (header excluded), if known
        """
        self.path = path
        self.row = row
        location = ''
        if path is not None:
            location = str(path)
        if row is not None:
            location += '{}row {}'.format(':' if location else '', row)
        super(IngestionError, self).__init__('{}: {}'.format(location, message) if location else message)


class ProtocolViolation(CutfinderError):
    pass


class FifoViolation(ProtocolViolation):
    pass


class PreconditionError(CutfinderError):
    pass


class StructuralInvariantViolation(CutfinderError):
    pass
