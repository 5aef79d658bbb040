"""Kernel selection: compiled extension when available, pure Python otherwise.

Both backends expose the same two functions with identical semantics:
``count_windows`` and ``gibbs_sweep``. ``benchmarks/bench_kernels.py``
compares their throughput.
"""

from . import pyfallback

try:
    from . import _native

    _impl = _native
    BACKEND = "native"
except ImportError:  # pragma: no cover - depends on build environment
    _impl = pyfallback
    BACKEND = "python"

count_windows = _impl.count_windows
gibbs_sweep = _impl.gibbs_sweep


def get_backend() -> str:
    return BACKEND


def available_backends() -> dict:
    """All importable backends, keyed by name (for tests and benchmarks)."""
    out = {"python": pyfallback}
    if BACKEND == "native":
        out["native"] = _impl
    return out
