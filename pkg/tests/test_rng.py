import numpy as np
from hypothesis import given, strategies as st

from ntalab import rng


@given(st.integers(0, 2 ** 63), st.integers(0, 1000), st.integers(0, 10 ** 6))
def test_uniforms_pure_function(seed, stream, counter):
    keys = rng.stream_keys(seed, [stream])
    a = rng.uniforms(keys, counter)
    b = rng.uniforms(rng.stream_keys(seed, [stream]), counter)
    assert a[0] == b[0]
    assert 0 < a[0] <= 1


def test_scalar_and_vector_paths_agree():
    keys = rng.stream_keys(7, np.arange(16))
    vec = rng.uniforms(keys, 3)
    scal = [rng.uniform_open(np.uint64(rng.stream_key(np.uint64(7), np.uint64(s))), np.uint64(3)) for s in range(16)]
    assert np.array_equal(vec, np.array(scal))


def test_uniform_moments():
    keys = rng.stream_keys(0, np.arange(200_000))
    u = rng.uniforms(keys, 0)
    assert abs(u.mean() - 0.5) < 5 * np.sqrt(1 / 12 / len(u))
    assert abs(u.var() - 1 / 12) < 1e-3


def test_streams_independent():
    keys = rng.stream_keys(0, np.arange(100_000))
    a, b = rng.uniforms(keys, 0), rng.uniforms(keys, 1)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_generator_deterministic():
    assert rng.generator(3, 1).random() == rng.generator(3, 1).random()
    assert rng.generator(3, 1).random() != rng.generator(3, 2).random()
