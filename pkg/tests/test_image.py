import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchsynth import ImageBuffer, NoiseSpec, add_awgn, make_test_image, mse, psnr
from patchsynth._random import gaussian, laplace, make_rng


def test_buffer_rejects_bad_input():
    with pytest.raises(ValueError):
        ImageBuffer(2, 2, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        ImageBuffer(1, 2, [1.0, np.nan])
    with pytest.raises(ValueError):
        ImageBuffer(0, 2, [])


def test_zero_noise_is_identity():
    img = make_test_image("piecewise", 9, 7)
    out = add_awgn(img, NoiseSpec(0.0, 7))
    assert np.array_equal(out.data, img.data)


def test_noise_statistics():
    out = add_awgn(ImageBuffer(16, 16, np.zeros(256)), NoiseSpec(1.0, 1))
    assert abs(out.data.mean()) <= 4 / 16
    assert 0.6 <= out.data.var(ddof=1) <= 1.5


def test_noise_bounds_hold_for_independent_sampler():
    # the same statistical window, checked on numpy's ziggurat sampler
    w = np.random.default_rng(1).standard_normal(256)
    assert abs(w.mean()) <= 4 / 16 and 0.6 <= w.var(ddof=1) <= 1.5


def test_noise_is_deterministic():
    img = make_test_image("gradient", 8, 8)
    a = add_awgn(img, NoiseSpec(0.1, 42))
    b = add_awgn(img, NoiseSpec(0.1, 42))
    assert a.data.tobytes() == b.data.tobytes()
    assert not np.array_equal(a.data, add_awgn(img, NoiseSpec(0.1, 43)).data)


def test_box_muller_moments():
    g = gaussian(make_rng(3), 200_001)
    assert g.size == 200_001
    assert abs(g.mean()) < 0.01
    assert abs(g.var() - 1) < 0.01
    assert abs(np.mean(g**4) - 3) < 0.05


def test_laplace_moments():
    v = laplace(make_rng(4), 200_000, scale=2.0)
    assert abs(v.mean()) < 0.03
    assert abs(v.var() - 8.0) < 0.15


def test_rng_rejects_bad_seed():
    with pytest.raises(ValueError):
        make_rng(-1)
    with pytest.raises(ValueError):
        NoiseSpec(-0.1, 0)


def test_mse_examples():
    z = ImageBuffer(2, 2, np.zeros(4))
    assert mse(z, z) == 0
    assert mse(z, ImageBuffer(2, 2, np.ones(4))) == 1
    assert mse(ImageBuffer(2, 2, [0, 0, 0, 3.0]), z) == 2.25
    with pytest.raises(ValueError):
        mse(z, ImageBuffer(1, 4, np.zeros(4)))


def test_psnr_examples():
    z = ImageBuffer(1, 1, [0.0])
    assert psnr(ImageBuffer(1, 1, [1.0]), z, peak=1) == pytest.approx(0.0)
    assert psnr(ImageBuffer(1, 1, [0.1]), z, peak=1) == pytest.approx(20.0)
    assert psnr(z, z) == float("inf")
    with pytest.raises(ValueError):
        psnr(z, z, peak=0)


def test_test_images():
    assert np.all(make_test_image("constant", 4, 4, value=0.5).data == 0.5)
    assert make_test_image("checkerboard", 2, 2, period=1).data.tolist() == [0, 1, 1, 0]
    assert np.allclose(make_test_image("gradient", 1, 4).data, [0, 1 / 3, 2 / 3, 1])
    pw = make_test_image("piecewise", 64, 64)
    assert set(np.unique(pw.data)) == {0.2, 0.5, 0.8}
    with pytest.raises(ValueError):
        make_test_image("stripes", 4, 4)


# values on a 0.01 lattice so squared differences never underflow
values = st.integers(-1000, 1000).map(lambda k: k / 100)
vectors = st.lists(values, min_size=1, max_size=30)


@given(vectors, st.data())
def test_mse_symmetric_and_zero_iff_equal(a, data):
    b = data.draw(st.lists(values, min_size=len(a), max_size=len(a)))
    A, B = ImageBuffer(1, len(a), a), ImageBuffer(1, len(a), b)
    assert mse(A, B) == mse(B, A) >= 0
    assert (mse(A, B) == 0) == np.array_equal(A.data, B.data)


@settings(max_examples=50)
@given(st.floats(1e-6, 10), st.floats(1e-6, 10))
def test_psnr_decreases_with_mse(e1, e2):
    z = ImageBuffer(1, 1, [0.0])
    p1, p2 = psnr(ImageBuffer(1, 1, [e1]), z), psnr(ImageBuffer(1, 1, [e2]), z)
    if e1 < e2:
        assert p1 > p2
