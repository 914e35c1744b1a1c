"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures to
distinct process statuses; the class name doubles as the machine-readable
error tag.
"""


class BoxRefineError(Exception):
    exit_code = 1


class DegenerateBox(BoxRefineError, ValueError):
    exit_code = 3


class ClassOutOfRange(BoxRefineError, IndexError):
    exit_code = 3


class UnknownEstimator(BoxRefineError, KeyError):
    exit_code = 2

    def __str__(self):
        # KeyError quotes its argument; keep messages plain.
        return str(self.args[0]) if self.args else ""


class InvalidEstimator(BoxRefineError, ValueError):
    exit_code = 2


class NoOverlap(BoxRefineError, ValueError):
    exit_code = 3


class JitterFailed(BoxRefineError, RuntimeError):
    exit_code = 3


class EmptyCorpus(BoxRefineError, ValueError):
    exit_code = 4


class ConfigError(BoxRefineError, ValueError):
    exit_code = 2


class UsageError(BoxRefineError):
    exit_code = 2


class FormatError(BoxRefineError, ValueError):
    """Malformed bundle, boxes file or truth file.

    ``offset`` is the byte offset into the offending file when known.
    """

    exit_code = 5

    def __init__(self, message, path=None, offset=None):
        parts = []
        if path is not None:
            parts.append(str(path))
        if offset is not None:
            parts.append(f"byte {offset}")
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.offset = offset


class VersionMismatch(FormatError):
    exit_code = 6


class ValueRangeError(FormatError):
    exit_code = 7


class MixedShapes(BoxRefineError, ValueError):
    exit_code = 3
