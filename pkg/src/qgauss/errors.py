"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter is outside the domain an operation supports."""


class SizeGuardError(ValueError):
    """An enumeration or brute-force guard was exceeded.

    Guards protect against accidentally launching (2m-1)!!-sized or
    d^(2mN)-sized computations; they can be raised explicitly where an
    operation accepts a ``max_*`` override.
    """


class ResourceCapError(RuntimeError):
    """A matrix-dimension or memory cap was exceeded."""
