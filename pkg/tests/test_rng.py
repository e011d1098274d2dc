import numpy as np
import pytest

from pirkit import rng


def test_same_key_same_numbers():
    a = rng.stream(5, 2, 3, rng.LANE_NU).standard_normal(100)
    b = rng.stream(5, 2, 3, rng.LANE_NU).standard_normal(100)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("field", ["seed", "chain", "block", "lane"])
def test_each_key_component_changes_stream(field):
    base = dict(seed=1, chain=1, block=1, lane=1)
    other = dict(base, **{field: 2})
    a = rng.stream(**base).random(16)
    b = rng.stream(**other).random(16)
    assert not np.array_equal(a, b)


def test_prefix_property():
    long = rng.stream(9, lane=rng.LANE_NU).standard_normal(1000)
    short = rng.stream(9, lane=rng.LANE_NU).standard_normal(10)
    assert np.array_equal(long[:10], short)


def test_negative_rejected():
    with pytest.raises(ValueError):
        rng.stream(-1)
