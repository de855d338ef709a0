import numpy as np
import pytest
from scipy import stats

from app.core.errors import ParameterError
from app.core.rngstreams import (
    StreamKey,
    Substream,
    derive_stream,
    rand_block,
    to_standard_normal,
)


@pytest.fixture
def key():
    return StreamKey(master_seed=12345, set_index=3, block_index=7)


def test_derive_stream_deterministic(key):
    """Test derivasi ulang dari kunci yang sama menghasilkan urutan yang sama"""
    a = derive_stream(key).uniforms(100)
    b = derive_stream(key).uniforms(100)
    assert a.tobytes() == b.tobytes()


def test_sequential_draws_continue_stream(key):
    """Test draw berurutan melanjutkan stream, bukan mengulang"""
    stream = derive_stream(key)
    first = stream.uniforms(50)
    second = stream.uniforms(50)
    whole = derive_stream(key).uniforms(100)
    assert np.concatenate([first, second]).tobytes() == whole.tobytes()


def test_distinct_keys_give_distinct_streams(key):
    """Test setiap komponen kunci mengubah stream"""
    base = derive_stream(key).uniforms(20)
    variants = [
        StreamKey(master_seed=12346, set_index=3, block_index=7),
        StreamKey(master_seed=12345, set_index=4, block_index=7),
        StreamKey(master_seed=12345, set_index=3, block_index=8),
        StreamKey(master_seed=12345, set_index=3, block_index=7, lane=1),
        key.with_substream(Substream.MH),
    ]
    for other in variants:
        assert derive_stream(other).uniforms(20).tobytes() != base.tobytes()


def test_uniforms_strictly_inside_unit_interval(key):
    """Test uniform selalu di (0,1) dan lolos uji KS"""
    u = derive_stream(key).uniforms(20000)
    assert np.all(u > 0.0) and np.all(u < 1.0)
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_large_seed_accepted():
    """Test seed 64-bit penuh diterima"""
    key = StreamKey(master_seed=2 ** 64 - 1)
    assert key.entropy()[1] == 2 ** 32 - 1
    assert key.entropy()[2] == 2 ** 32 - 1


def test_invalid_key_rejected():
    """Test kunci di luar rentang ditolak"""
    with pytest.raises(ParameterError):
        StreamKey(master_seed=-1)
    with pytest.raises(ParameterError):
        StreamKey(master_seed=2 ** 64)
    with pytest.raises(ParameterError):
        StreamKey(master_seed=1, set_index=2 ** 32)


def test_normal_transform():
    """Test transformasi inverse CDF"""
    assert to_standard_normal(np.array([0.5]))[0] == 0.0
    z = derive_stream(StreamKey(master_seed=9)).normals(20000)
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_rand_block_shapes(key):
    """Test jumlah draw per blok"""
    block = rand_block(key, B=5, M=1, d=1)
    assert block.r_mcmc.shape == (5, 1)
    assert block.r_dir.shape == (5, 1)
    assert block.r_mag.shape == (5,)
    assert block.r_mh.shape == (5,)

    block = rand_block(key, B=25, M=25, d=5, width=6)
    assert block.r_mcmc.shape == (25, 6)
    assert block.r_dir.shape == (1, 5)
    assert block.steps == 1


def test_rand_block_without_coupling(key):
    """Test blok untuk engine biasa tidak punya triple coupling"""
    block = rand_block(key, B=4, M=2, d=1, coupling=False)
    assert block.steps == 0
    assert block.r_mcmc.shape == (4, 1)


def test_rand_block_invalid_m(key):
    """Test M yang tidak membagi B ditolak"""
    with pytest.raises(ParameterError):
        rand_block(key, B=5, M=2, d=1)
    with pytest.raises(ParameterError):
        rand_block(key, B=0, M=1, d=1)


def test_rand_block_replay_identical(key):
    """Test regenerasi blok dari kunci yang sama identik per byte"""
    first = rand_block(key, B=10, M=5, d=3, width=4)
    again = rand_block(key, B=10, M=5, d=3, width=4)
    assert first.digest() == again.digest()
    other = rand_block(StreamKey(master_seed=12345, set_index=3, block_index=8), B=10, M=5, d=3, width=4)
    assert other.digest() != first.digest()


def test_sub_block_slices(key):
    """Test potongan sub-blok"""
    block = rand_block(key, B=6, M=3, d=2, width=3)
    sub = block.sub_block(1)
    assert sub.r_mcmc.tobytes() == block.r_mcmc[3:6].tobytes()
    assert sub.r_dir.tobytes() == block.r_dir[1].tobytes()
    assert sub.r_mag == block.r_mag[1]
    with pytest.raises(ParameterError):
        block.sub_block(2)
