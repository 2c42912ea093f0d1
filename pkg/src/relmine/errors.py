"""Shared exception hierarchy."""


class RelmineError(Exception):
    """Base class for all relmine errors."""


class InputError(RelmineError):
    """Invalid input data, file format, or configuration.

    The CLI maps this class to exit code 1; other RelmineErrors map to 2.
    """
