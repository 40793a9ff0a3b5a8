"""Spectral diagnostics against a naive definitional DFT oracle."""

import numpy as np
import pytest

from pixmap.errors import PixmapError
from pixmap.image import ImageF
from pixmap.rng import SplitMix64
from pixmap.spectral import (
    RadialProfile,
    Spectrum2D,
    azimuthal_profile,
    band_ratio,
    dft2,
    idft2,
    heatmap_u8,
    mean_spectrum,
    power_spectrum,
)


def naive_dft2(x):
    """Definitional O(N^2)-per-output transform via explicit DFT matrices."""
    x = np.asarray(x, dtype=complex)
    h, w = x.shape
    eh = np.exp(-2j * np.pi * np.outer(np.arange(h), np.arange(h)) / h)
    ew = np.exp(-2j * np.pi * np.outer(np.arange(w), np.arange(w)) / w)
    return eh @ x @ ew.T


def _rand(seed, h, w):
    return SplitMix64(seed).uniforms(h * w, -1.0, 1.0).reshape(h, w)


def _checkerboard(n):
    yy, xx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.where((yy + xx) % 2 == 0, 1.0, -1.0)


# --- dft2 ---------------------------------------------------------------------


def test_dft2_constant_is_dc_only():
    x = np.full((6, 4), 3.5)
    freq = dft2(x)
    assert freq[0, 0] == pytest.approx(3.5 * 24)
    freq[0, 0] = 0
    assert np.max(np.abs(freq)) < 1e-9


def test_dft2_impulse_is_flat():
    x = np.zeros((8, 8))
    x[0, 0] = 1.0
    assert np.allclose(dft2(x), 1.0, atol=1e-12)


def test_dft2_matches_naive_oracle_8x8():
    for seed in range(10):
        x = _rand(seed, 8, 8)
        assert np.max(np.abs(dft2(x) - naive_dft2(x))) < 1e-9


def test_dft2_matches_naive_oracle_rectangular():
    x = _rand(99, 5, 12)
    assert np.max(np.abs(dft2(x) - naive_dft2(x))) < 1e-9


@pytest.mark.parametrize("h,w", [(3, 3), (16, 16), (64, 64), (33, 64)])
def test_roundtrip_and_parseval(h, w):
    x = _rand(h * 1000 + w, h, w)
    freq = dft2(x)
    back = idft2(freq)
    assert np.max(np.abs(back - x)) / np.max(np.abs(x)) < 1e-9
    space = np.sum(np.abs(x) ** 2)
    spectral = np.sum(np.abs(freq) ** 2) / (h * w)
    assert abs(space - spectral) / space < 1e-9


# --- power spectrum ---------------------------------------------------------------


def test_power_spectrum_centered_dc():
    x = np.full((6, 8), 2.0)
    spec = power_spectrum(x)
    assert spec.power[3, 4] == pytest.approx((2.0 * 48) ** 2)
    masked = spec.power.copy()
    masked[3, 4] = 0
    assert np.max(masked) < 1e-9


def test_power_spectrum_impulse_uniform():
    x = np.zeros((4, 4))
    x[1, 2] = 1.0
    assert np.allclose(power_spectrum(x).power, 1.0, atol=1e-12)


def test_power_spectrum_checkerboard_at_corner_bins():
    n = 8
    spec = power_spectrum(_checkerboard(n))
    # Nyquist bin lands at index 0 of the centered spectrum
    assert spec.power[0, 0] == pytest.approx(float(n * n) ** 2)
    masked = spec.power.copy()
    masked[0, 0] = 0
    assert np.max(masked) < 1e-9
    oracle = np.abs(naive_dft2(_checkerboard(n))) ** 2
    assert np.max(np.abs(np.fft.fftshift(oracle) - spec.power)) < 1e-6


def test_power_spectrum_conjugate_symmetry_even_dims():
    x = _rand(5, 8, 10)
    p = power_spectrum(x).power
    h, w = p.shape
    for i in range(h):
        for j in range(w):
            assert p[i, j] == pytest.approx(p[(h - i) % h, (w - j) % w], rel=1e-9)


# --- mean spectrum ----------------------------------------------------------------


def _imagef(seed, h, w, c=3):
    return ImageF(SplitMix64(seed).uniforms(h * w * c, 0, 255).reshape(h, w, c))


def test_mean_spectrum_single_image_channel_average():
    img = _imagef(1, 4, 4)
    spec = mean_spectrum([img])
    expect = np.zeros((4, 4))
    for c in range(3):
        expect += np.fft.fftshift(np.abs(naive_dft2(img.data[:, :, c])) ** 2)
    assert np.allclose(spec.power, expect / 3, rtol=1e-9)


def test_mean_spectrum_copies_equal_single():
    img = _imagef(2, 4, 6)
    one = mean_spectrum([img]).power
    many = mean_spectrum([img, img, img]).power
    assert np.allclose(one, many, rtol=1e-12)


def test_mean_spectrum_two_known_images_hand_average():
    a, b = _imagef(3, 4, 4), _imagef(4, 4, 4)
    got = mean_spectrum([a, b]).power

    def oracle_one(img):
        acc = np.zeros((4, 4))
        for c in range(3):
            acc += np.fft.fftshift(np.abs(naive_dft2(img.data[:, :, c])) ** 2)
        return acc / 3

    assert np.allclose(got, (oracle_one(a) + oracle_one(b)) / 2, rtol=1e-9)


def test_mean_spectrum_errors():
    with pytest.raises(PixmapError):
        mean_spectrum([])
    with pytest.raises(PixmapError):
        mean_spectrum([_imagef(1, 4, 4), _imagef(2, 6, 4)])


# --- azimuthal profile -------------------------------------------------------------


def test_azimuthal_constant_image():
    prof = azimuthal_profile(power_spectrum(np.full((8, 8), 5.0)))
    assert prof.values[0] > 0
    assert np.all(prof.values[1:] == 0)


def test_azimuthal_impulse_flat():
    x = np.zeros((8, 8))
    x[3, 3] = 1.0
    prof = azimuthal_profile(power_spectrum(x))
    assert np.allclose(prof.values, 1.0, atol=1e-12)


def test_azimuthal_checkerboard_maximal_at_top_radius():
    prof = azimuthal_profile(power_spectrum(_checkerboard(8)))
    assert np.argmax(prof.values) == prof.max_radius


def test_azimuthal_energy_accounting_exact():
    for seed in (1, 2):
        for h, w in ((8, 8), (9, 13), (16, 6)):
            spec = power_spectrum(_rand(seed, h, w))
            prof = azimuthal_profile(spec)
            assert len(prof.values) == min(h, w) // 2 + 1
            total = float(np.sum(prof.values * prof.counts))
            assert total == pytest.approx(float(spec.power.sum()), rel=1e-9)
            assert np.all(prof.values >= 0)
            assert np.all(prof.counts >= 1)


# --- band ratio ---------------------------------------------------------------------


def test_band_ratio_flat_spectrum_is_one():
    x = np.zeros((16, 16))
    x[5, 9] = 1.0
    prof = azimuthal_profile(power_spectrum(x))
    assert band_ratio(prof) == pytest.approx(1.0)


def test_band_ratio_requires_six_radii():
    prof = RadialProfile(np.ones(4), np.ones(4, dtype=np.int64))
    with pytest.raises(PixmapError):
        band_ratio(prof)


def test_band_ratio_degenerate_spectrum():
    prof = RadialProfile(
        np.array([5.0, 0, 0, 0, 0, 0, 0]), np.ones(7, dtype=np.int64)
    )
    with pytest.raises(PixmapError) as err:
        band_ratio(prof)
    assert err.value.code == "degenerate-spectrum"


def test_band_ratio_smooth_versus_mapped():
    # smooth blurred noise should sit far below 1; mapping must raise it
    from pixmap.mapping import apply_mapping, build_fixed_table
    from pixmap.image import to_float
    from pixmap.synthgen import GeneratorSpec, gen_real

    table = build_fixed_table()
    for seed in range(20):
        spec = GeneratorSpec(
            kind="real", family="A", brightness_shift=0.0,
            noise_sigma=0.0, size=32, seed=seed,
        )
        img = gen_real(spec)
        raw = band_ratio(azimuthal_profile(mean_spectrum([to_float(img)])))
        mapped = band_ratio(azimuthal_profile(mean_spectrum([apply_mapping(img, table)])))
        assert raw < 0.1
        assert mapped > raw


# --- type guards / export -------------------------------------------------------------


def test_spectrum_rejects_negative_power():
    with pytest.raises(PixmapError):
        Spectrum2D(np.array([[1.0, -1.0]]))


def test_heatmap_u8_range():
    spec = power_spectrum(_rand(8, 16, 16))
    heat = heatmap_u8(spec)
    assert heat.dtype == np.uint8
    assert heat.max() == 255
