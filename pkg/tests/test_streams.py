import numpy as np

from brwlab.streams import path_entropy, substream


def test_same_path_same_stream():
    a = substream(42, "suite", 3, "chunk", 0).random(64)
    b = substream(42, "suite", 3, "chunk", 0).random(64)
    assert np.array_equal(a, b)


def test_distinct_paths_distinct_streams():
    a = substream(42, "suite", 3).random(64)
    b = substream(42, "suite", 4).random(64)
    c = substream(43, "suite", 3).random(64)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_string_and_int_components_differ():
    assert path_entropy("1") != path_entropy(1)


def test_component_boundaries_matter():
    # ("ab", "c") must not collide with ("a", "bc")
    assert path_entropy("ab", "c") != path_entropy("a", "bc")


def test_entropy_stable():
    assert path_entropy("x", 7) == path_entropy("x", 7)
