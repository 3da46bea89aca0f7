"""Exception hierarchy.

Every exception carries an ``exit_code`` so the command-line front end can map
failures to distinct process exit statuses. Codes start at 10; 1 and 2 are left
to the interpreter and to argparse usage errors.
"""

from __future__ import annotations


class CharnError(Exception):
    """Base class for all package errors."""

    exit_code = 10


class ParameterError(CharnError, ValueError):
    """Invalid distribution, kernel, bandwidth or weight parameters."""

    exit_code = 11


class SeriesError(CharnError, ValueError):
    """A series violates its invariants (too short, non-finite values)."""

    exit_code = 12


class NumericOverflowError(CharnError, ArithmeticError):
    """A simulated path left the finite range."""

    exit_code = 13

    def __init__(self, step: int, value: float) -> None:
        self.step = step
        self.value = value
        super().__init__(f"non-finite state {value!r} at simulation step {step}")


class EmptyNeighborhoodError(CharnError, ArithmeticError):
    """All kernel weights vanish at an evaluation point."""

    exit_code = 14

    def __init__(self, x: float, h: float) -> None:
        self.x = x
        self.h = h
        super().__init__(f"no design point within the kernel support at x={x!r}, h={h!r}")


class DegenerateVarianceError(CharnError, ArithmeticError):
    """Estimated conditional variance at or below the floor."""

    exit_code = 15

    def __init__(self, indices: list[int], floor: float) -> None:
        self.indices = list(indices)
        self.floor = floor
        shown = ", ".join(str(i) for i in self.indices[:10])
        more = "" if len(self.indices) <= 10 else f" (+{len(self.indices) - 10} more)"
        super().__init__(
            f"sigma_hat^2 <= {floor:g} at design indices j = {shown}{more}; isolated design points "
            "(outliers far from all others) cause this: consider a larger bandwidth, homo mode, "
            "or var_floor=0 with the 'limit' policy"
        )


class InternalConsistencyError(CharnError, RuntimeError):
    exit_code = 16


class IngestError(CharnError):
    """Input file could not be turned into a series."""

    exit_code = 17

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NullTableError(CharnError):
    """Null-table cache file is missing, corrupt or of an unknown format."""

    exit_code = 18


class ConfigError(CharnError):
    """Study or DGP configuration could not be parsed or validated."""

    exit_code = 19


IO_EXIT_CODE = 20

EXIT_CODES: dict[type[CharnError], int] = {
    cls: cls.exit_code
    for cls in (
        CharnError,
        ParameterError,
        SeriesError,
        NumericOverflowError,
        EmptyNeighborhoodError,
        DegenerateVarianceError,
        InternalConsistencyError,
        IngestError,
        NullTableError,
        ConfigError,
    )
}
