"""Tests for image quality metrics, composites and report files."""

import csv

import numpy as np
import pytest
import torch
from skimage import color
from skimage.metrics import mean_squared_error, peak_signal_noise_ratio, structural_similarity

from src.services import metrics, reference_tables
from src.services.data_io import procedural_scene
from src.utils.errors import DimensionError, ShapeMismatchError
from src.utils.seeding import make_generator

LUMA = np.array([0.299, 0.587, 0.114])


def _pair(seed: int, size=(32, 32)):
    rng = np.random.default_rng(seed)
    target = rng.random((*size, 3))
    pred = np.clip(target + 0.1 * rng.standard_normal((*size, 3)), 0.0, 1.0)
    return pred, target


def _scene(seed: int = 0, size: int = 64) -> np.ndarray:
    return metrics.as_numpy_image(procedural_scene(size, make_generator(seed)))


def _fog(image: np.ndarray, t: float, airlight: float = 0.5) -> np.ndarray:
    return image * t + airlight * (1.0 - t)


class TestFullReference:
    """PSNR, MSE and SSIM against scikit-image."""

    @pytest.mark.parametrize("seed", range(10))
    def test_mse_and_psnr_match_reference(self, seed):
        pred, target = _pair(seed)
        mse, rmse = metrics.mse_rmse(pred, target)
        assert mse == pytest.approx(mean_squared_error(target, pred), abs=1e-4)
        assert rmse == pytest.approx(np.sqrt(mse))
        expected = peak_signal_noise_ratio(target, pred, data_range=1.0)
        assert metrics.psnr(pred, target) == pytest.approx(expected, abs=1e-4)

    @pytest.mark.parametrize("seed", range(10))
    def test_ssim_matches_reference(self, seed):
        pred, target = _pair(seed)
        expected = structural_similarity(
            target @ LUMA,
            pred @ LUMA,
            gaussian_weights=True,
            sigma=1.5,
            use_sample_covariance=False,
            data_range=1.0,
        )
        assert metrics.ssim(pred, target) == pytest.approx(expected, abs=1e-4)

    def test_identical_images(self):
        _, target = _pair(0)
        assert metrics.psnr(target, target) == metrics.PSNR_CAP_DB
        assert metrics.ssim(target, target) == pytest.approx(1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            metrics.psnr(np.zeros((8, 8, 3)), np.zeros((8, 9, 3)))

    def test_ssim_needs_a_full_window(self):
        with pytest.raises(DimensionError):
            metrics.ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))

    def test_tensor_conversion(self):
        tensor = torch.rand(1, 3, 5, 7)
        array = metrics.as_numpy_image(tensor)
        assert array.shape == (5, 7, 3)
        assert array.dtype == np.float64
        with pytest.raises(ShapeMismatchError):
            metrics.as_numpy_image(torch.rand(2, 3, 5, 7))


class TestUIQM:
    """UIQM constant-image, flip and ordering checks."""

    def test_constant_gray_is_zero(self):
        image = np.full((32, 32, 3), 0.5)
        assert metrics.uiqm(image) == pytest.approx(0.0, abs=1e-9)

    def test_components_of_constant_image(self):
        uicm, uism, uiconm = metrics.uiqm_components(np.full((32, 32, 3), (0.6, 0.4, 0.3)))
        assert uicm < 0
        assert uism == pytest.approx(0.0, abs=1e-9)
        assert uiconm == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("flip", [np.fliplr, np.flipud])
    def test_flip_invariance(self, flip):
        image = _scene(1, 64)
        flipped = np.ascontiguousarray(flip(image))
        assert metrics.uiqm(flipped) == pytest.approx(metrics.uiqm(image), rel=1e-9, abs=1e-9)

    def test_colour_measure_drops_with_growing_cast(self):
        gray = np.repeat(_scene(2, 64).mean(axis=2, keepdims=True), 3, axis=2) * 0.6
        values = []
        for cast in (0.0, 0.1, 0.2, 0.3):
            image = gray.copy()
            image[..., 0] += cast
            values.append(metrics.uiqm_components(image)[0])
        assert all(a > b for a, b in zip(values, values[1:]))


class TestUCIQE:
    """UCIQE constant-image, flip and ordering checks."""

    def test_constant_gray_is_near_zero(self):
        assert metrics.uciqe(np.full((16, 16, 3), 0.5)) == pytest.approx(0.0, abs=1e-3)

    def test_grows_with_chroma(self):
        rng = np.random.default_rng(0)
        light = 40.0 + 30.0 * rng.random((32, 32))
        a, b = rng.uniform(-1, 1, (32, 32)), rng.uniform(-1, 1, (32, 32))
        scores = []
        for scale in (0.0, 5.0, 10.0, 20.0):
            lab = np.stack([light, scale * a, scale * b], axis=2)
            scores.append(metrics.uciqe(color.lab2rgb(lab)))
        assert all(x < y for x, y in zip(scores, scores[1:]))

    def test_flip_invariance(self):
        image = _scene(3, 48)
        flipped = np.ascontiguousarray(np.fliplr(image))
        assert metrics.uciqe(flipped) == pytest.approx(metrics.uciqe(image), rel=1e-9)


class TestCCF:
    """CCF (without colour) constant-image, flip and ordering checks."""

    def test_constant_image_is_zero(self):
        assert metrics.ccf_no_color(np.full((32, 32, 3), 0.4)) == 0.0

    def test_drops_under_fog(self):
        image = _scene(4, 64)
        scores = [metrics.ccf_no_color(_fog(image, t)) for t in (1.0, 0.7, 0.4)]
        assert all(a > b for a, b in zip(scores, scores[1:]))

    def test_flip_invariance(self):
        image = _scene(5, 64)
        flipped = np.ascontiguousarray(np.flipud(image))
        assert metrics.ccf_no_color(flipped) == pytest.approx(
            metrics.ccf_no_color(image), rel=1e-9
        )


class TestCEIQ:
    """CEIQ constant-image, range and ordering checks."""

    def test_constant_image_scores_range_minimum(self):
        assert metrics.ceiq(np.full((32, 32, 3), 0.3)) == 0.0

    def test_within_range(self):
        assert 0.0 <= metrics.ceiq(_scene(6, 64)) <= 5.0

    def test_full_range_beats_compressed_range(self):
        rng = np.random.default_rng(1)
        gray = rng.random((64, 64))
        full = np.repeat(gray[..., None], 3, axis=2)
        compressed = 0.45 + 0.1 * full
        assert metrics.ceiq(full) > metrics.ceiq(compressed)

    def test_flip_invariance(self):
        image = _scene(7, 64)
        flipped = np.ascontiguousarray(np.fliplr(image))
        assert metrics.ceiq(flipped) == pytest.approx(metrics.ceiq(image), rel=1e-9)

    @pytest.mark.parametrize("size", [(8, 8), (10, 16), (1, 5)])
    def test_images_smaller_than_the_ssim_window(self, size):
        rng = np.random.default_rng(4)
        score = metrics.ceiq(rng.random((*size, 3)))
        assert np.isfinite(score)
        assert 0.0 <= score <= 5.0

    def test_unpaired_scoring_of_a_small_image(self):
        rng = np.random.default_rng(5)
        row = metrics.score_image(rng.random((10, 16, 3)))
        assert set(row) == {"uiqm", "uciqe", "ccf", "ceiq"}
        assert all(np.isfinite(value) for value in row.values())


class TestComposites:
    """ALL and Aggregative against the published tables."""

    def test_all_reproduces_published_row(self):
        row = reference_tables.method_row(reference_tables.UIEB_VAL, "SMDR-IS")
        total = metrics.all_score(row, reference_tables.UIEB_VAL_DIRECTIONS)
        assert total == pytest.approx(60.466, abs=0.01)

    @pytest.mark.parametrize("method", reference_tables.METHODS)
    def test_all_for_every_method(self, method):
        index = reference_tables.METHODS.index(method)
        row = reference_tables.method_row(reference_tables.UIEB_VAL, method)
        total = metrics.all_score(row, reference_tables.UIEB_VAL_DIRECTIONS)
        assert total == pytest.approx(reference_tables.UIEB_VAL_ALL[index], abs=0.01)

    def test_no_reference_tables(self):
        directions = reference_tables.NO_REFERENCE_DIRECTIONS
        for table, totals in (
            (reference_tables.UIEB_TEST, reference_tables.UIEB_TEST_ALL),
            (reference_tables.U45, reference_tables.U45_ALL),
        ):
            row = reference_tables.method_row(table, "SMDR-IS")
            assert metrics.all_score(row, directions) == pytest.approx(totals[-1], abs=0.01)

    def test_aggregative_published_value(self):
        assert metrics.aggregative(60.466, 0.0607) == pytest.approx(60.4053, abs=1e-4)

    @pytest.mark.parametrize("index", range(len(reference_tables.METHODS)))
    def test_aggregative_table(self, index):
        value = metrics.aggregative(
            reference_tables.UIEB_VAL_ALL[index], reference_tables.SECONDS_PER_IMAGE[index]
        )
        assert value == pytest.approx(reference_tables.AGGREGATIVE[index], abs=1e-4)

    def test_ablation_all_is_psnr_plus_ssim(self):
        for rows in reference_tables.ABLATION_TABLES.values():
            for _, psnr, ssim, total in rows:
                assert psnr + ssim == pytest.approx(total, abs=2e-3)

    def test_absent_metrics_are_skipped(self):
        directions = {"psnr": "higher", "mse": "lower", "uiqm": "higher"}
        assert metrics.all_score({"psnr": 20.0, "mse": 0.5}, directions) == pytest.approx(19.5)

    def test_negative_seconds(self):
        with pytest.raises(ValueError):
            metrics.aggregative(10.0, -1.0)


class TestReports:
    """Per-image rows, means and report files."""

    def _rows(self, paired: bool, paper_compat: bool = False):
        directions = metrics.report_directions(paired)
        rows = []
        for seed in range(3):
            pred, target = _pair(seed)
            values = metrics.score_image(pred, target if paired else None, paper_compat)
            rows.append(metrics.finish_row(f"{seed:04d}", values, 0.01, directions))
        return rows

    def test_paired_row_columns_and_all(self):
        row = self._rows(paired=True)[0]
        for key in ("psnr", "mse", "rmse", "ssim", "uiqm", "uciqe", "ccf", "ceiq", "all"):
            assert key in row
        expected = row["psnr"] - row["mse"] + row["ssim"]
        expected += row["uiqm"] + row["uciqe"] + row["ccf"] + row["ceiq"]
        assert row["all"] == pytest.approx(expected)
        assert row["aggregative"] == pytest.approx(row["all"] - 0.01)

    def test_unpaired_rows_have_no_reference_columns(self):
        row = self._rows(paired=False)[0]
        assert "psnr" not in row and "ssim" not in row and "mse" not in row

    def test_paper_compat_reports_rmse(self):
        row = self._rows(paired=True, paper_compat=True)[0]
        assert row["mse"] == row["rmse"]

    def test_mean_row(self):
        rows = self._rows(paired=True)
        report = metrics.build_report(rows, paired=True)
        assert report.mean["image"] == "mean"
        assert report.mean["psnr"] == pytest.approx(np.mean([r["psnr"] for r in rows]))

    def test_write_and_read(self, tmp_path):
        report = metrics.build_report(self._rows(paired=True), paired=True, paper_compat=True)
        csv_path, json_path = metrics.write_report(report, tmp_path)
        lines = csv_path.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# directions: psnr=higher, mse=lower")
        assert lines[1].startswith("# mse column carries RMSE")
        records = list(csv.DictReader(lines[2:]))
        assert [r["image"] for r in records] == ["0000", "0001", "0002", "mean"]
        loaded = metrics.read_report_json(json_path)
        assert loaded.mean == report.mean
        assert loaded.paper_compat
