"""Exception hierarchy and the CLI exit-code mapping."""


class TvspecError(Exception):
    """Base class for all tvspec errors."""


class InputError(TvspecError):
    """Malformed input: bad JSON, dimension mismatch, horizon violation."""


class HorizonError(InputError):
    """An index or window falls outside the sequence horizon."""


class SingularMatrixError(TvspecError):
    """A factor that must be inverted is numerically singular."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"singular factor at index {index}")


class NumericalRangeError(TvspecError):
    """A requested quantity overflows or underflows double precision."""


class SynthesisError(TvspecError):
    """Feedback synthesis failed for a window after all retries."""

    def __init__(self, window, message=None):
        self.window = window
        super().__init__(message or f"synthesis failed on window {window}")


# CLI exit codes: 0 success, 1 verification failure, 2 input error,
# 3 synthesis/numerical error.
EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, InputError):
        return EXIT_INPUT
    if isinstance(exc, (SingularMatrixError, NumericalRangeError, SynthesisError)):
        return EXIT_NUMERICAL
    return EXIT_NUMERICAL if isinstance(exc, TvspecError) else EXIT_INPUT
