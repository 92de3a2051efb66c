import numpy as np
import pytest

from jointconst.streams import substream


def test_same_key_same_draws():
    a = substream(7, "noise", 0, 3).standard_normal(16)
    b = substream(7, "noise", 0, 3).standard_normal(16)
    assert np.array_equal(a, b)


def test_distinct_keys_differ():
    base = substream(7, "noise", 0).standard_normal(16)
    for other in [(7, "noise", 1), (7, "messages", 0), (8, "noise", 0)]:
        assert not np.array_equal(base, substream(*other).standard_normal(16))


def test_float_and_string_parts():
    a = substream(1, "snr", 0, -5.0).standard_normal(4)
    b = substream(1, "snr", 0, -5.0).standard_normal(4)
    c = substream(1, "snr", 0, -3.0).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        substream(-1, "x")


def test_unsupported_key_type():
    with pytest.raises(TypeError):
        substream(0, object())
