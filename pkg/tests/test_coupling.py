import math

import numpy as np
import pytest
from scipy import stats

from app.core.errors import CouplingError, ParameterError
from app.core.rngstreams import StreamKey, derive_stream
from app.services.coupling import RADIUS_TOLERANCE, jump, max_couple, mh_test, propose
from app.services.targets import normal_negloglik


def _draws(seed: int, n: int, d: int):
    stream = derive_stream(StreamKey(master_seed=seed))
    return stream.normals(n * d).reshape(n, d), stream.uniforms(n)


def _coupled_outputs(x, y, r, n, seed):
    dirs, mags = _draws(seed, n, x.size)
    out = np.empty((n, x.size))
    for i in range(n):
        x_star = jump(x, r, dirs[i], mags[i])
        out[i] = max_couple(x, x_star, y, r)
    return out


def test_jump_surface_and_center():
    """Test r_mag = 1 di permukaan bola, r_mag kecil dekat pusat"""
    x = np.array([0.5])
    assert jump(x, 2.0, np.array([2.0]), 1.0)[0] == pytest.approx(2.5)
    assert abs(jump(x, 2.0, np.array([-1.0]), 1e-12)[0] - 0.5) < 1e-10


def test_jump_zero_direction():
    """Test arah bernorma nol tidak boleh diulang"""
    with pytest.raises(CouplingError):
        jump(np.zeros(2), 1.0, np.zeros(2), 0.5)
    with pytest.raises(ParameterError):
        jump(np.zeros(2), 0.0, np.ones(2), 0.5)


def test_jump_radius_law():
    """Test |X* - X| / r berdistribusi s^d (uniform dalam bola)"""
    d, r, n = 3, 2.0, 20000
    dirs, mags = _draws(31, n, d)
    x = np.array([1.0, -1.0, 0.5])
    s = np.array([np.linalg.norm(jump(x, r, dirs[i], mags[i]) - x) / r for i in range(n)])
    assert np.all(s <= 1.0 + RADIUS_TOLERANCE)
    assert stats.kstest(s, lambda v: np.clip(v, 0, 1) ** d).pvalue > 1e-3


def test_propose_checks_radius():
    """Test JumpProposal menyimpan asal dan tujuan"""
    proposal = propose(np.array([0.0, 0.0]), 1.5, np.array([3.0, 4.0]), 1.0)
    assert np.linalg.norm(proposal.destination - proposal.origin) == pytest.approx(1.5)


def test_max_couple_overlap_copies():
    """Test cabang overlap menyalin x_star"""
    x, y, x_star = np.array([0.0]), np.array([1.0]), np.array([0.8])
    out = max_couple(x, x_star, y, 1.0)
    assert out.tobytes() == x_star.tobytes()


def test_max_couple_reflection_example():
    """Test contoh 1-d: x = 0, y = 1, x_star = -0.9 menghasilkan 1.1"""
    out = max_couple(np.array([0.0]), np.array([-0.9]), np.array([1.0]), 1.0)
    assert out[0] == pytest.approx(1.1)
    assert abs(out[0] - 1.0) <= 1.0
    assert abs(out[0] - 0.0) > 1.0


def test_max_couple_axis_aligned():
    """Test jump sejajar v: w = r - L"""
    r = 1.0
    x, y = np.array([0.0, 0.0]), np.array([1.0, 0.0])
    x_star = np.array([-0.3, 0.0])
    out = max_couple(x, x_star, y, r)
    L = 0.5
    expected = y + (x_star - x) + 2 * (r - L) * np.array([1.0, 0.0])
    assert np.allclose(out, expected)


def test_max_couple_identical_points():
    """Test y = x: coupling total"""
    x = np.array([0.2, 0.4])
    x_star = np.array([0.5, 0.1])
    assert max_couple(x, x_star, x.copy(), 1.0).tobytes() == x_star.tobytes()


def test_max_couple_precondition():
    """Test |x_star - x| > r ditolak"""
    with pytest.raises(CouplingError):
        max_couple(np.array([0.0]), np.array([1.5]), np.array([3.0]), 1.0)


def test_max_couple_exclusion_branch():
    """Test cabang eksklusi: Y* di bola Y dan di luar zona overlap"""
    rng_key = StreamKey(master_seed=77)
    stream = derive_stream(rng_key)
    n = 20000
    for i in range(n):
        d = 1 + i % 3
        r = 0.5 + 2.0 * stream.uniforms(1)[0]
        x = stream.normals(d) * 2.0
        y = x + stream.normals(d) * r * stream.uniforms(1)[0] * 2.0
        x_star = jump(x, r, stream.normals(d), stream.uniforms(1)[0])
        z = max_couple(x, x_star, y, r)
        if np.linalg.norm(y - x_star) <= r:
            assert z.tobytes() == x_star.tobytes()
        else:
            assert np.linalg.norm(z - y) <= r + RADIUS_TOLERANCE
            assert np.linalg.norm(z - x) > r - RADIUS_TOLERANCE


def test_max_couple_coupling_probability():
    """Test peluang coupling 1/2 untuk |y - x| = 1, r = 1 (1-d)"""
    n = 20000
    x, y = np.array([0.0]), np.array([1.0])
    dirs, mags = _draws(5, n, 1)
    hits = 0
    for i in range(n):
        x_star = jump(x, 1.0, dirs[i], mags[i])
        hits += int(max_couple(x, x_star, y, 1.0).tobytes() == x_star.tobytes())
    assert abs(hits / n - 0.5) < 4 * math.sqrt(0.25 / n)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_max_couple_marginal_law(d):
    """Test Y* - Y uniform dalam bola: KS radius dan chi-square oktan"""
    r, n = 1.0, 20000
    x = np.zeros(d)
    y = np.zeros(d)
    y[0] = 0.8
    out = _coupled_outputs(x, y, r, n, seed=100 + d)
    offsets = out - y
    s = np.linalg.norm(offsets, axis=1) / r
    assert stats.kstest(s, lambda v: np.clip(v, 0, 1) ** d).pvalue > 1e-3
    octant = (offsets > 0).astype(int) @ (2 ** np.arange(d))
    counts = np.bincount(octant, minlength=2 ** d)
    assert stats.chisquare(counts).pvalue > 1e-3


@pytest.mark.slow
def test_max_couple_marginal_law_full_scale():
    """Test hukum marginal dengan 10^6 draw (d = 2)"""
    d, r, n = 2, 1.0, 1000000
    x, y = np.zeros(d), np.array([0.7, 0.4])
    out = _coupled_outputs(x, y, r, n, seed=999)
    s = np.linalg.norm(out - y, axis=1) / r
    assert stats.kstest(s, lambda v: np.clip(v, 0, 1) ** d).pvalue > 1e-3


def test_mh_test_rules():
    """Test aturan penerimaan M-H"""
    x, x_star = np.array([0.0]), np.array([1.0])
    # exp(-0.5) = 0.6065 >= 0.5
    assert mh_test(normal_negloglik, x, x_star, 0.5).tobytes() == x_star.tobytes()
    assert mh_test(normal_negloglik, x, x_star, 0.7).tobytes() == x.tobytes()

    def half(z):
        return 0.0 if z[0] == 0.0 else math.log(2.0)

    assert mh_test(half, x, x_star, 0.6).tobytes() == x.tobytes()
    assert mh_test(lambda z: 1.0, x, x_star, 0.999).tobytes() == x_star.tobytes()


def test_mh_test_infinite_energy_rejects():
    """Test U(x_star) = inf selalu ditolak"""
    x, x_star = np.array([0.0]), np.array([1.0])
    assert mh_test(lambda z: 0.0 if z[0] == 0.0 else math.inf, x, x_star, 1e-12).tobytes() == x.tobytes()
