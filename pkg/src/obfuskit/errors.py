"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs, configs or files violate a documented contract.

    The CLI maps this to exit code 2. ``path`` names the offending field
    (e.g. ``"defense.sigma"``) when one is known.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
