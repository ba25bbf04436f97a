import json

import numpy as np
import pytest

from hbpn.imaging import ImageRGB, make_synthetic_image, rgb_to_y, transform
from hbpn.metrics import (
    PSNR_CAP, MetricsReport, gaussian_window, psnr_y, self_ensemble_infer, shave, single_infer,
    ssim_plane, ssim_y,
)
from hbpn.network import HBPNModel


def shifted(img: ImageRGB, y_delta: float) -> ImageRGB:
    # equal RGB offsets move Y by delta * 219 on the 8-bit scale
    return ImageRGB(img.data.astype(np.float64) + y_delta / 219.0)


class TestPSNR:
    def test_identical_capped(self):
        img = make_synthetic_image(20, 20, seed=0)
        assert psnr_y(img, img, 2) == PSNR_CAP == 100.0

    def test_uniform_unit_difference(self):
        base = ImageRGB(np.full((3, 16, 16), 0.4))
        assert psnr_y(base, shifted(base, 1.0), 4) == pytest.approx(48.13, abs=0.01)
        assert 10 * np.log10(255.0 ** 2) == pytest.approx(48.1308, abs=1e-4)

    def test_symmetric(self):
        a = make_synthetic_image(24, 24, seed=1)
        b = make_synthetic_image(24, 24, seed=2)
        assert psnr_y(a, b, 2) == psnr_y(b, a, 2)

    def test_only_interior_counts(self):
        a = ImageRGB(np.full((3, 12, 12), 0.5))
        data = a.data.copy()
        data[:, :2, :] = 0.0
        data[:, :, -2:] = 1.0
        assert psnr_y(a, ImageRGB(data), 2) == PSNR_CAP
        assert psnr_y(a, ImageRGB(data), 1) < PSNR_CAP

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            psnr_y(ImageRGB(np.zeros((3, 8, 8))), ImageRGB(np.zeros((3, 8, 9))), 1)


class TestShave:
    @pytest.mark.parametrize("s", [0, 1, 2, 4, 8])
    def test_removes_s_pixels_each_side(self, s):
        plane = np.arange(30 * 20.0).reshape(30, 20)
        out = shave(plane, s)
        assert out.shape == (30 - 2 * s, 20 - 2 * s)
        assert out[0, 0] == plane[s, s]

    def test_too_small(self):
        with pytest.raises(ValueError):
            shave(np.zeros((8, 8)), 4)


class TestSSIM:
    def test_identical_is_one(self):
        img = make_synthetic_image(32, 32, seed=3)
        assert ssim_y(img, img, 2) == 1.0

    def test_window(self):
        g = gaussian_window()
        assert g.shape == (11,) and g.sum() == pytest.approx(1.0)
        assert g.argmax() == 5

    def test_matches_scikit_image(self):
        metrics = pytest.importorskip("skimage.metrics")
        a = rgb_to_y(make_synthetic_image(40, 36, seed=4))
        b = rgb_to_y(make_synthetic_image(40, 36, seed=5))
        ref = metrics.structural_similarity(a, b, data_range=255, gaussian_weights=True, sigma=1.5,
                                            use_sample_covariance=False)
        assert ssim_plane(a, b) == pytest.approx(ref, abs=1e-10)

    def test_symmetric_and_below_one(self):
        a = make_synthetic_image(24, 24, seed=6)
        b = make_synthetic_image(24, 24, seed=7)
        assert ssim_y(a, b, 1) == pytest.approx(ssim_y(b, a, 1), abs=1e-12)
        assert ssim_y(a, b, 1) < 1.0

    def test_too_small_plane(self):
        with pytest.raises(ValueError):
            ssim_plane(np.zeros((10, 20)), np.zeros((10, 20)))


class TestReport:
    def test_text_and_records(self, tmp_path):
        report = MetricsReport(scale=4, crop=4)
        report.add("a", 30.0, 0.9)
        report.add("b", 32.0, 0.8)
        assert report.mean_psnr == 31.0 and report.mean_ssim == pytest.approx(0.85)
        report.write(tmp_path / "r.txt", tmp_path / "r.jsonl")
        records = [json.loads(line) for line in (tmp_path / "r.jsonl").read_text().splitlines()]
        assert records == [{"name": "a", "psnr": 30.0, "ssim": 0.9}, {"name": "b", "psnr": 32.0, "ssim": 0.8}]
        assert "31.00" in (tmp_path / "r.txt").read_text()


class TestInference:
    def test_identity_callable_round_trips(self):
        img = make_synthetic_image(13, 10, seed=8)
        assert single_infer(lambda a: a, img) == img
        np.testing.assert_allclose(self_ensemble_infer(lambda a: a, img).data, img.data, atol=1e-6)

    def test_ensemble_invariant_to_pre_transform(self):
        model = HBPNModel(modules=1, depth=1, base_channels=2, seed=1)
        img = make_synthetic_image(8, 8, seed=9)
        base = self_ensemble_infer(model, img).data
        for k in range(8):
            moved = self_ensemble_infer(model, ImageRGB(transform(img.data, k))).data
            np.testing.assert_allclose(moved, transform(base, k), atol=1e-5)

    def test_model_output_cropped_back(self):
        model = HBPNModel(modules=1, depth=2, base_channels=2)
        out = single_infer(model, make_synthetic_image(10, 7, seed=1))
        assert out.shape == (10, 7)
