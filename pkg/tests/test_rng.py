import numpy as np

from stochpower.rng import ENTITY_COMPRESS, ENTITY_FCIQMC, stream


def test_streams_reproducible():
    a = stream(123, iteration=7, entity=ENTITY_FCIQMC, run_index=2).random(5)
    b = stream(123, iteration=7, entity=ENTITY_FCIQMC, run_index=2).random(5)
    np.testing.assert_array_equal(a, b)


def test_streams_distinct():
    base = stream(5, 1, ENTITY_FCIQMC, 0).random(4)
    for other in (stream(6, 1, ENTITY_FCIQMC, 0), stream(5, 2, ENTITY_FCIQMC, 0), stream(5, 1, ENTITY_COMPRESS, 0), stream(5, 1, ENTITY_FCIQMC, 1)):
        assert not np.array_equal(base, other.random(4))


def test_documented_key_layout():
    g = np.random.Generator(np.random.Philox(key=[42, 3], counter=[0, ENTITY_COMPRESS, 9, 0]))
    np.testing.assert_array_equal(stream(42, 9, ENTITY_COMPRESS, 3).random(3), g.random(3))


def test_large_seed_accepted():
    a = stream(2**64 - 1).random(2)
    assert not np.array_equal(a, stream(2**64 - 2).random(2))

