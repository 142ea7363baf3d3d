"""Error types shared across the package."""


class InputError(Exception):
    """Bad input data or configuration. The CLI maps this to exit code 1."""
