"""Determinism and stream-consistency checks for the seeded generator."""

import numpy as np

from pixmap.rng import SplitMix64, derive_seed, fnv1a64, mix64


def test_scalar_and_bulk_streams_match():
    a = SplitMix64(12345)
    b = SplitMix64(12345)
    scalar = [a.random() for _ in range(64)]
    bulk = b.uniforms(64)
    assert np.array_equal(np.array(scalar), bulk)


def test_interleaved_draws_share_one_counter():
    a = SplitMix64(9)
    b = SplitMix64(9)
    ref = b.uniforms(10)
    got = [a.random(), a.random()]
    got.extend(a.uniforms(5).tolist())
    got.extend([a.random() for _ in range(3)])
    assert np.array_equal(np.array(got), ref)


def test_same_seed_reproduces_and_seeds_differ():
    assert SplitMix64(7).uniforms(32).tolist() == SplitMix64(7).uniforms(32).tolist()
    assert SplitMix64(7).uniforms(32).tolist() != SplitMix64(8).uniforms(32).tolist()


def test_uniform_range_and_moments():
    u = SplitMix64(2024).uniforms(200_000, -1.0, 1.0)
    assert u.min() >= -1.0 and u.max() < 1.0
    assert abs(u.mean()) < 0.01


def test_normals_moments():
    z = SplitMix64(55).normals(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    assert np.all(np.isfinite(z))


def test_normals_odd_count_prefix_of_even():
    a = SplitMix64(3).normals(7)
    b = SplitMix64(3).normals(8)
    assert np.array_equal(a, b[:7])


def test_randrange_covers_and_bounds():
    rng = SplitMix64(17)
    draws = [rng.randrange(6) for _ in range(2000)]
    assert set(draws) == {0, 1, 2, 3, 4, 5}


def test_shuffle_is_permutation():
    rng = SplitMix64(99)
    items = list(range(50))
    shuffled = items[:]
    rng.shuffle(shuffled)
    assert sorted(shuffled) == items
    assert shuffled != items  # astronomically unlikely to be identity


def test_derive_seed_stable_and_tag_sensitive():
    s = derive_seed(1, "crop", 3)
    assert s == derive_seed(1, "crop", 3) == derive_seed(1, "crop", "3")
    assert s != derive_seed(1, "crop", 4)
    assert s != derive_seed(2, "crop", 3)
    assert derive_seed(1) == 1  # no tags: passthrough of the masked root


def test_generator_regression_values():
    # Pin the documented splitmix64 stream so the algorithm cannot drift
    # silently; these values come straight from the finalizer definition.
    assert mix64(0x123456789) == 5875498230111062770
    assert fnv1a64(b"crop") == 1330364610467660087
    assert SplitMix64(0).next_u64() == 16294208416658607535
