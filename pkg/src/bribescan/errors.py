"""Exception hierarchy shared across the package.

``DataError`` covers bad inputs and violated data preconditions (CLI exit
code 2); everything else under ``BribescanError`` is a runtime failure
(exit code 3).
"""


class BribescanError(Exception):
    """Base class for all package errors."""


class DataError(BribescanError):
    """Invalid input data or a violated data precondition."""


class MalformedLine(DataError):
    """A line of an NDJSON input file is not valid JSON."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class SchemaMismatch(DataError):
    """A field of an input record is missing or has the wrong shape."""

    def __init__(self, field: str, detail: str = ""):
        msg = f"field {field!r}" + (f": {detail}" if detail else "")
        super().__init__(msg)
        self.field = field


class StoreValidationError(DataError):
    """A chain store failed validation (gaps, duplicates, or orphan txs)."""

    def __init__(self, report):
        super().__init__(f"store failed validation: {report.summary()}")
        self.report = report


class MissingBlock(DataError):
    """The RPC endpoint returned no block for a requested number."""

    def __init__(self, block_number: int):
        super().__init__(f"endpoint has no block {block_number}")
        self.block_number = block_number


class MalformedResponse(DataError):
    """The RPC endpoint answered with something that is not a block."""


class InsufficientHistory(DataError):
    """The store does not cover the blocks a scan needs to look back over."""


class UnknownBlock(DataError):
    """A block number referenced by a result is absent from the store."""


class MissingColumn(DataError):
    """A referenced factor column does not exist in the factor table."""

    def __init__(self, name: str):
        super().__init__(f"factor column {name!r} not found")
        self.name = name


class NoOverlap(DataError):
    """Joining proxies with factors produced an empty panel."""


class EmptyInput(DataError):
    """Descriptive statistics were requested for an empty sample."""


class RankDeficient(DataError):
    """The regression design matrix is collinear within tolerance."""


class TooFewRows(DataError):
    """Fewer observations than regression parameters."""


class NetworkError(BribescanError):
    """The RPC endpoint could not be reached after retries."""


class NonContiguousAdvance(BribescanError):
    """A sliding window was advanced with a non-adjacent block."""


class NegativeBlockGap(BribescanError):
    """A trace link does not strictly precede its payment (tracing bug)."""
