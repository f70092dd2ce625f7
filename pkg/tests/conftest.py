import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evtad.events import EventStream  # noqa: E402


def make_stream(t, x, y, p=None, width=16, height=16, **extent) -> EventStream:
    t = np.asarray(t, dtype=np.int64)
    p = np.zeros(len(t), dtype=np.int8) if p is None else p
    return EventStream.from_arrays(t, x, y, p, width, height, **extent)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
