"""Exception types raised across the package."""


class SizingError(ValueError):
    """An image or feature map has dimensions the pipeline cannot accept."""


class ScaleError(ValueError):
    """A feature model is missing a scale or its maps are not ladder-consistent."""


class ChannelMismatchError(ValueError):
    pass


class NonFiniteLossError(FloatingPointError):
    """A loss term evaluated to NaN or Inf."""

    def __init__(self, term, value, step=None):
        self.term = term
        self.value = value
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"loss term '{term}' is not finite ({value}){where}")


class ArchiveFormatError(ValueError):
    """A weight archive or checkpoint file is missing, truncated or malformed."""


class DataError(RuntimeError):
    """A dataset directory yields no usable images, or an input image is unreadable."""
