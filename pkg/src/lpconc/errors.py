"""Exception hierarchy shared by all modules."""


class LpconcError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameter(LpconcError, ValueError):
    """A numeric parameter is outside its admissible range."""


class InvalidData(LpconcError, ValueError):
    """Input data (prices, series) violates a documented precondition."""


class IngestionError(InvalidData):
    """A pool data file or response could not be parsed or validated."""


class FetchError(LpconcError, OSError):
    """Remote indexer access failed after all retries."""
