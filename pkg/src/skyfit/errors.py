"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented invariant or precondition."""


class BoundsError(IndexError):
    """A pixel or region index falls outside its container."""


class ImageFormatError(ValidationError):
    """An image container file is missing, truncated, or corrupt."""
