"""Source tracing of synthetic-speech generators from paired embedding views."""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
