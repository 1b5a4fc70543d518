"""Backend selection for the hot kernels.

Prefers the compiled extension when it imported cleanly; falls back to
the pure numpy implementations otherwise.  Setting the environment
variable ``TVSPEC_PURE`` to a non-empty value forces the pure backend,
which is useful for benchmarking and for debugging suspected kernel
issues.
"""

from __future__ import annotations

import os

from . import _kernels_py

__all__ = ["BACKEND", "qr_logdiag_scan", "renorm_product", "get_backend"]

if os.environ.get("TVSPEC_PURE"):
    _impl = _kernels_py
    BACKEND = "pure"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build environment
        _impl = _kernels_py
        BACKEND = "pure"

qr_logdiag_scan = _impl.qr_logdiag_scan
renorm_product = _impl.renorm_product


def get_backend(name: str):
    """Return the named kernel module ("compiled" or "pure").

    Raises ImportError if the compiled extension was requested but is
    not available in this installation.
    """
    if name == "pure":
        return _kernels_py
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
