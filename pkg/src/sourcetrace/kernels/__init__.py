"""Hot numerical kernels with two interchangeable backends.

The compiled Cython backend covers the inner loops that dominate training
time (valid 1-D convolution and window-2 max pooling, forward and backward).
A pure-numpy backend implements the identical contracts and is selected
automatically when the extension is unavailable.

Set SOURCETRACE_BACKEND=numpy|cython to force a backend; the default
("auto") prefers the compiled one. ``BACKEND`` names the active choice.
"""

import os

_requested = os.environ.get("SOURCETRACE_BACKEND", "auto").lower()

if _requested not in ("auto", "cython", "numpy"):
    raise RuntimeError(
        f"SOURCETRACE_BACKEND must be auto, cython or numpy, got {_requested!r}"
    )

if _requested == "numpy":
    from . import _npk as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _cyk as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import _npk as _impl

        BACKEND = "numpy"

conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
maxpool1d_forward = _impl.maxpool1d_forward
maxpool1d_backward = _impl.maxpool1d_backward


def get_backend(name):
    """Return the kernel module for an explicit backend name (benchmarks)."""
    if name == "numpy":
        from . import _npk

        return _npk
    if name == "cython":
        from . import _cyk  # type: ignore[attr-defined]

        return _cyk
    raise ValueError(f"unknown backend {name!r}")
