import threading
import numpy as np
from contextlib import contextmanager
from typing import List

_local = threading.local()


class BranchTrace:
    """
    Records the discrete branch decisions (relu masks, pooling argmaxes) taken
    while evaluating a function. Two evaluations with equal signatures followed
    the same piecewise-smooth branch.
    """
    def __init__(self):
        self.records: List[np.ndarray] = []

    def record(self, pattern: np.ndarray) -> None:
        self.records.append(np.array(pattern, copy=True))

    def signature(self) -> bytes:
        return b''.join(
            np.asarray(record.shape, dtype=np.int64).tobytes() + record.tobytes()
            for record in self.records
        )


@contextmanager
def branch_trace():
    trace = BranchTrace()
    previous = getattr(_local, 'trace', None)
    _local.trace = trace
    try:
        yield trace
    finally:
        _local.trace = previous

def record_branch(pattern: np.ndarray) -> None:
    trace = getattr(_local, 'trace', None)
    if trace is not None:
        trace.record(pattern)
