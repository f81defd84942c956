"""Exceptions shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 1,
DataError -> 2, NumericalAbort -> 3.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """A run configuration is malformed or internally inconsistent."""


class DataError(ValueError):
    """An input file or dataset violates its documented format."""


class NumericalAbort(RuntimeError):
    """Training produced a non-finite loss or parameter value."""

    def __init__(self, message: str, step: int | None = None,
                 pair: tuple[int, int] | None = None,
                 score_range: tuple[float, float] | None = None):
        detail = message
        if step is not None:
            detail += f" [step {step}]"
        if pair is not None:
            detail += f" [pair ({pair[0]}, {pair[1]})]"
        if score_range is not None:
            detail += f" [score range {score_range[0]:.4g} .. {score_range[1]:.4g}]"
        super().__init__(detail)
        self.step = step
        self.pair = pair
        self.score_range = score_range
