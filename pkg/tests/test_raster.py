import numpy as np
import pytest

from cellsift.raster import (GaussianKernelSpec, build_gaussian_kernel, convolve_channel,
                             gaussian_filter, hsv_to_rgb, normalize_image, rgb_to_hsv)

from oracles import hsv_reference

# frozen from a 50-digit evaluation of exp(-(x²+y²)/(2·1.5²)) on the 3x3 grid
KERNEL_CENTER = 0.147761316347
KERNEL_EDGE = 0.118318012703
KERNEL_CORNER = 0.094741658210


def solid(h, w, color):
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[:, :] = color
    return img


class TestNormalize:
    def test_full_range_channel_unchanged(self):
        img = np.zeros((16, 16, 3), dtype=np.uint8)
        img[..., 0] = np.arange(256, dtype=np.uint8).reshape(16, 16)
        out = normalize_image(img)
        assert np.array_equal(out[..., 0], img[..., 0])

    def test_constant_image_passthrough(self):
        img = solid(8, 8, (100, 100, 100))
        assert np.array_equal(normalize_image(img), img)

    def test_two_level_channel_stretches(self):
        img = solid(2, 2, (50, 0, 0))
        img[0, 0, 0] = 150
        out = normalize_image(img)
        assert set(out[..., 0].ravel()) == {0, 255}
        assert out[0, 0, 0] == 255

    def test_output_dimensions(self):
        img = solid(5, 9, (1, 2, 3))
        assert normalize_image(img).shape == img.shape

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            normalize_image(np.zeros((4, 4), dtype=np.uint8))


class TestKernel:
    def test_size_one_is_identity_weight(self):
        k = build_gaussian_kernel(GaussianKernelSpec(1, 2.0))
        assert k.shape == (1, 1)
        assert k[0, 0] == 1.0

    def test_default_3x3_sigma_1_5(self):
        k = build_gaussian_kernel(GaussianKernelSpec(3, 1.5))
        assert abs(k[1, 1] - KERNEL_CENTER) < 1e-9
        assert abs(k[0, 1] - KERNEL_EDGE) < 1e-9
        assert abs(k[0, 0] - KERNEL_CORNER) < 1e-9

    def test_large_sigma_tends_uniform(self):
        k = build_gaussian_kernel(GaussianKernelSpec(3, 1e9))
        assert np.allclose(k, 1.0 / 9.0, atol=1e-12)

    @pytest.mark.parametrize("size,sigma", [(1, 0.3), (3, 1.5), (5, 0.7), (7, 2.5), (9, 10.0)])
    def test_weights_sum_to_one(self, size, sigma):
        k = build_gaussian_kernel(GaussianKernelSpec(size, sigma))
        assert abs(k.sum() - 1.0) < 1e-9
        assert (k >= 0).all()

    @pytest.mark.parametrize("size,sigma", [(2, 1.0), (0, 1.0), (-3, 1.0), (3, 0.0), (3, -1.5)])
    def test_rejects_invalid_spec(self, size, sigma):
        with pytest.raises(ValueError):
            GaussianKernelSpec(size, sigma)


class TestGaussianFilter:
    def test_constant_image_unchanged(self):
        img = solid(12, 12, (37, 99, 200))
        assert np.array_equal(gaussian_filter(img, GaussianKernelSpec(3, 1.5)), img)

    def test_size_one_identity(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(9, 7, 3), dtype=np.uint8)
        assert np.array_equal(gaussian_filter(img, GaussianKernelSpec(1, 1.0)), img)

    def test_single_bright_pixel_stamps_kernel(self):
        # float path: interior impulse response equals the kernel exactly
        ch = np.zeros((9, 9))
        ch[4, 4] = 255.0
        kernel = build_gaussian_kernel(GaussianKernelSpec(3, 1.5))
        out = convolve_channel(ch, kernel)
        assert np.allclose(out[3:6, 3:6], kernel * 255.0, atol=1e-12)
        assert out[0, 0] == 0.0

    def test_uint8_path_rounds_stamp(self):
        img = np.zeros((9, 9, 3), dtype=np.uint8)
        img[4, 4] = (255, 255, 255)
        out = gaussian_filter(img, GaussianKernelSpec(3, 1.5))
        kernel = build_gaussian_kernel(GaussianKernelSpec(3, 1.5))
        expected = np.rint(kernel * 255.0).astype(np.uint8)
        assert np.array_equal(out[3:6, 3:6, 0], expected)

    def test_mean_preserved_on_constant(self):
        img = solid(20, 20, (111, 7, 254))
        out = gaussian_filter(img, GaussianKernelSpec(5, 2.0))
        for c in range(3):
            assert abs(out[..., c].mean() - img[..., c].mean()) < 1e-6

    def test_mean_preserved_pre_quantization(self):
        # edge-replicate padding of a separable kernel redistributes weight
        # without losing any: the channel mean survives the float path
        rng = np.random.default_rng(8)
        kernel = build_gaussian_kernel(GaussianKernelSpec(3, 1.5))
        ch = rng.uniform(0, 255, size=(48, 64))
        out = convolve_channel(ch, kernel)
        assert abs(out.mean() - ch.mean()) < 1e-6

    def test_convolution_is_linear(self):
        rng = np.random.default_rng(1)
        kernel = build_gaussian_kernel(GaussianKernelSpec(3, 1.5))
        X = rng.normal(size=(11, 13))
        Y = rng.normal(size=(11, 13))
        a, b = 2.5, -0.75
        lhs = convolve_channel(a * X + b * Y, kernel)
        rhs = a * convolve_channel(X, kernel) + b * convolve_channel(Y, kernel)
        assert np.allclose(lhs, rhs, atol=1e-12)


class TestHsv:
    @pytest.mark.parametrize("rgb,expected", [
        ((255, 255, 255), (0.0, 0.0, 255.0)),
        ((0, 0, 0), (0.0, 0.0, 0.0)),
        ((0, 0, 255), (120.0, 255.0, 255.0)),
    ])
    def test_known_conversions(self, rgb, expected):
        hsv = rgb_to_hsv(solid(1, 1, rgb))[0, 0]
        assert np.allclose(hsv, expected, atol=1e-9)

    def test_matches_colorsys(self):
        rng = np.random.default_rng(2)
        pixels = rng.integers(0, 256, size=(64, 3))
        img = pixels.reshape(8, 8, 3).astype(np.uint8)
        hsv = rgb_to_hsv(img).reshape(-1, 3)
        for (r, g, b), got in zip(pixels, hsv):
            ref = hsv_reference(int(r), int(g), int(b))
            assert np.allclose(got, ref, atol=1e-9), (r, g, b)

    def test_hue_stays_below_180(self):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        hsv = rgb_to_hsv(img)
        assert hsv[..., 0].max() < 180.0
        assert hsv[..., 0].min() >= 0.0

    def test_round_trip_strided_sweep(self):
        # every RGB triple on the stride-17 lattice must round-trip within ±1
        vals = np.arange(0, 256, 17, dtype=np.uint8)
        r, g, b = np.meshgrid(vals, vals, vals, indexing="ij")
        img = np.stack([r.ravel(), g.ravel(), b.ravel()], axis=1).reshape(-1, 1, 3)
        back = hsv_to_rgb(rgb_to_hsv(img))
        diff = np.abs(back.astype(int) - img.astype(int))
        assert diff.max() <= 1
