"""Exception types raised by mfract analyses."""


class ImageFormatError(ValueError):
    """An image file could not be decoded or uses an unsupported layout."""


class InsufficientSupportError(ValueError):
    """Too few α bins survive the multiscale regression to form a spectrum."""


def window_too_large_error(window: int, height: int, width: int) -> ValueError:
    return ValueError(
        f"Window size {window} does not fit inside a {height}x{width} image. "
        "Every window must be strictly smaller than both image dimensions; "
        "pass smaller --windows or a larger image."
    )
