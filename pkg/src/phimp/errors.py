"""Exception types the CLI maps onto exit codes."""


class InputError(ValueError):
    """Invalid user input: malformed files, mismatched alphabets, bad arguments."""


class ResourceError(RuntimeError):
    """A configured resource cap (enumeration size, path count) was exceeded."""
