"""
DCWS - Error Types
"""


class DCWSError(Exception):
    """Base class for every error raised by the package"""


class DimensionMismatchError(DCWSError, ValueError):
    """Array shapes that must agree do not"""


class AbstainError(DCWSError, ValueError):
    """A weak signal abstains everywhere a covered entry is required"""


class NonFiniteInputError(DCWSError, ValueError):
    """NaN or infinite values where finite reals are required"""


class InfeasibleSpecError(DCWSError, RuntimeError):
    """A synthetic spec could not be realised within the resampling budget"""


class DataFileError(DCWSError, OSError):
    """An input file is missing, unreadable or malformed"""
