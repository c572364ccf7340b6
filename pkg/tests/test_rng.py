import numpy as np

from ultrasim.tensor import Rng


def test_same_seed_same_sequence():
    a = Rng(1234)
    b = Rng(1234)
    assert np.array_equal(a.uniform(size=1000), b.uniform(size=1000))
    assert a.integer(77) == b.integer(77)
    assert np.array_equal(a.permutation(50), b.permutation(50))


def test_different_seeds_differ():
    a = Rng(1)
    b = Rng(2)
    assert not np.array_equal(a.uniform(size=100), b.uniform(size=100))


def test_uniform_bounds_and_range():
    r = Rng(7)
    u = r.uniform(size=10000)
    assert u.min() >= 0.0 and u.max() < 1.0
    v = r.uniform(size=1000, lo=-3.0, hi=5.0)
    assert v.min() >= -3.0 and v.max() < 5.0
    assert abs(v.mean() - 1.0) < 0.25


def test_scalar_draw_advances_counter():
    r = Rng(42)
    x = r.uniform()
    y = r.uniform()
    assert x != y
    assert r.counter == 2


def test_counter_equals_block_draws():
    r = Rng(42)
    seq = r.uniform(size=8)
    r2 = Rng(42)
    singles = np.array([r2.uniform() for _ in range(8)])
    assert np.array_equal(seq, singles)


def test_permutation_is_a_permutation():
    r = Rng(9)
    p = r.permutation(200)
    assert sorted(p.tolist()) == list(range(200))


def test_spawn_streams_are_independent_and_reproducible():
    root = Rng(5)
    c1 = root.spawn(0)
    c2 = root.spawn(1)
    again = Rng(5).spawn(0)
    assert np.array_equal(c1.uniform(size=64), again.uniform(size=64))
    assert not np.array_equal(Rng(5).spawn(0).uniform(size=64), c2.uniform(size=64))
