"""Threading control for the BLAS-backed kernels.

Kernels parallelise only through the BLAS library.  Deterministic mode pins
BLAS to one thread, which fixes every reduction order.
"""

from __future__ import annotations

import contextlib

from threadpoolctl import threadpool_limits


@contextlib.contextmanager
def deterministic(enabled: bool = True):
    if not enabled:
        yield
        return
    with threadpool_limits(limits=1):
        yield
