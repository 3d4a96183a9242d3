"""Backend selection for the per-slot simulation kernels.

Prefers the compiled extension; falls back to the pure-Python twin when the
extension is missing or QROUTE_FORCE_PURE is set.  Both expose the same
three functions with identical semantics and bit-identical output:
``ghat_path``, ``g0_pair_path``, ``coupled_path``.
"""

from __future__ import annotations

import os

from . import _kernel_py

if os.environ.get("QROUTE_FORCE_PURE"):
    _impl = _kernel_py
    BACKEND = "pure"
else:
    try:
        from . import _ckernel as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernel_py
        BACKEND = "pure"

ghat_path = _impl.ghat_path
g0_pair_path = _impl.g0_pair_path
coupled_path = _impl.coupled_path
support_from_mask = _kernel_py.support_from_mask


def backend() -> str:
    return BACKEND


def load_impl(name: str):
    """Fetch a specific backend module ("pure" or "compiled"); for tests/benchmarks."""
    if name == "pure":
        return _kernel_py
    if name == "compiled":
        from . import _ckernel  # raises ImportError when not built

        return _ckernel
    raise ValueError(f"unknown backend {name!r}")
