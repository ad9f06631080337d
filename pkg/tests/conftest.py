import numpy as np
import pytest

from starmem import FeatureMap, MemoryConfig


def make_frame(index, side=8, dim=4, values=None, rng=None, timestamp=None):
    if values is None:
        rng = rng or np.random.default_rng(index)
        values = rng.normal(size=(side, side, dim)).astype(np.float32)
    else:
        values = np.asarray(values, dtype=np.float32).reshape(side, side, dim)
    return FeatureMap(
        frame_index=index,
        timestamp_s=float(index) if timestamp is None else timestamp,
        side=side,
        dim=dim,
        values=values,
    )


def small_config(**overrides):
    kwargs = dict(
        p_spa=4, p_tem=2, p_abs=1, n_buff=10, n_spa=2,
        n_tem=4, n_abs=3, n_ret=2, dim=3,
    )
    kwargs.update(overrides)
    return MemoryConfig(**kwargs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
