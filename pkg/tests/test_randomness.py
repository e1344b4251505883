import numpy as np
import pytest

from nestmlmc.randomness import DrawRecorder, GaussianStream, derive_stream


def test_same_key_replays_identical_sequence():
    a = derive_stream(123, (2, 5)).normals(1000)
    b = derive_stream(123, (2, 5)).normals(1000)
    assert np.array_equal(a, b)


def test_distinct_keys_and_seeds_differ():
    base = derive_stream(123, (0, 1)).normals(100)
    assert not np.array_equal(base, derive_stream(123, (0, 2)).normals(100))
    assert not np.array_equal(base, derive_stream(124, (0, 1)).normals(100))
    # prefix streams are distinct from their children
    assert not np.array_equal(base, derive_stream(123, (0, 1, 0)).normals(100))


def test_child_extends_path():
    s = derive_stream(7, (3,))
    c = s.child(1, 4)
    assert c.path == (3, 1, 4)
    assert np.array_equal(c.normals(10), derive_stream(7, (3, 1, 4)).normals(10))


def test_draws_are_standard_normal():
    x = derive_stream(42, (0,)).normals(200_000)
    assert abs(x.mean()) < 0.01
    assert abs(x.std() - 1.0) < 0.01
    assert abs(np.mean(x**3)) < 0.02
    assert abs(np.mean(x**4) - 3.0) < 0.05


def test_count_and_recorder_track_draw_volume():
    rec = DrawRecorder()
    s = derive_stream(1, (0,), recorder=rec)
    s.normals((10, 7))
    s.next_gaussian()
    child = s.child(2)
    child.normals(29)
    assert s.count == 71
    assert rec.total == 100
    # uniforms are not Gaussian draws and must not count as cost
    s.uniforms(1000)
    assert rec.total == 100


def test_streams_are_independent():
    # empirical correlation between sibling streams is at noise level
    a = derive_stream(9, (0, 0)).normals(100_000)
    b = derive_stream(9, (0, 1)).normals(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_negative_key_rejected():
    with pytest.raises(ValueError):
        derive_stream(5, (1, -2))


def test_sequential_draws_continue_the_stream():
    s = derive_stream(11, (4,))
    first, second = s.normals(50), s.normals(50)
    whole = derive_stream(11, (4,)).normals(100)
    assert np.array_equal(np.concatenate([first, second]), whole)
