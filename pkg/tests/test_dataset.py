import numpy as np
import pytest

from helpers import smooth_image, write_fixture_tree, _save_png

from semrobust.dataset import (
    MVTEC_EXCLUDES,
    MVTEC_THRESHOLD,
    VISA_EXCLUDES,
    VISA_THRESHOLD,
    category_corner_mse,
    corner_mse,
    load_category,
    load_dataset,
    select_rotation_invariant,
)
from semrobust.errors import DatasetError

MVTEC_TABLE = {
    "metal_nut": 0.000255,
    "pill": 0.000304,
    "hazelnut": 0.000391,
    "bottle": 0.002179,
    "screw": 0.005964,
    "leather": 0.013949,
    "wood": 0.021015,
    "capsule": 0.02621,
    "cable": 0.027923,
    "transistor": 0.077574,
    "tile": 0.09312,
    "carpet": 0.104486,
    "grid": 0.126188,
    "toothbrush": 0.17937,
    "zipper": 0.92926,
}

VISA_TABLE = {
    "pipe_fryum": 0.000668,
    "pcb3": 0.001449,
    "macaroni1": 0.004837,
    "pcb4": 0.005264,
    "fryum": 0.00995,
    "pcb2": 0.010521,
    "pcb1": 0.013953,
    "chewinggum": 0.024117,
    "macaroni2": 0.035739,
    "cashew": 0.049281,
    "candle": 0.051116,
    "capsules": 0.082838,
}


class TestLoading:
    def test_fixture_tree(self, tmp_path):
        root = write_fixture_tree(tmp_path / "data", n_good=3, n_defect=2)
        samples = load_category(root, "widget")
        assert len(samples) == 5
        flags = [s.is_anomalous for s in samples]
        assert flags.count(False) == 3 and flags.count(True) == 2
        for s in samples:
            assert s.image.shape[:2] == s.mask.shape
            assert (s.mask.any() != 0) == s.is_anomalous
            assert 0.0 <= s.image.min() and s.image.max() <= 1.0

    def test_good_samples_zero_mask(self, tmp_path):
        root = write_fixture_tree(tmp_path / "data")
        for s in load_category(root, "widget"):
            if not s.is_anomalous:
                assert s.mask.sum() == 0

    def test_empty_category(self, tmp_path):
        (tmp_path / "thing" / "test").mkdir(parents=True)
        assert load_category(tmp_path, "thing") == []

    def test_missing_mask_is_hard_error(self, tmp_path):
        root = write_fixture_tree(tmp_path / "data")
        for mask_file in (root / "widget" / "ground_truth" / "crack").iterdir():
            mask_file.unlink()
        with pytest.raises(DatasetError):
            load_category(root, "widget")

    def test_unreadable_image_skipped(self, tmp_path, caplog):
        root = write_fixture_tree(tmp_path / "data", n_good=2, n_defect=0)
        (root / "widget" / "test" / "good" / "broken.png").write_bytes(b"not a png")
        with caplog.at_level("WARNING"):
            samples = load_category(root, "widget")
        assert len(samples) == 2
        assert any("broken.png" in rec.getMessage() for rec in caplog.records)

    def test_deterministic_order(self, tmp_path):
        root = write_fixture_tree(tmp_path / "data")
        paths = [s.path for s in load_dataset(root)]
        assert paths == sorted(paths)

    def test_unknown_layout(self, tmp_path):
        with pytest.raises(ValueError):
            load_dataset(tmp_path, layout="coco")

    def test_missing_root(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "nope")


class TestCornerMse:
    def test_constant_image_zero(self):
        assert corner_mse(np.full((32, 32, 3), 0.7)) < 1e-10

    def test_nonnegative(self):
        for seed in range(5):
            assert corner_mse(smooth_image(seed)) >= 0.0

    def test_centered_disc_smaller_than_full_texture(self):
        rng = np.random.default_rng(0)
        size = 48
        texture = rng.uniform(size=(size, size, 3))
        yy, xx = np.ogrid[:size, :size]
        disc = (yy - size / 2) ** 2 + (xx - size / 2) ** 2 <= (size / 4) ** 2
        confined = np.full((size, size, 3), 0.5)
        confined[disc] = texture[disc]
        assert corner_mse(confined) < corner_mse(texture)

    def test_category_mean(self, tmp_path):
        root = write_fixture_tree(tmp_path / "data", categories=("widget",))
        samples = load_dataset(root)
        table = category_corner_mse(samples)
        want = float(np.mean([corner_mse(s.image) for s in samples]))
        assert abs(table["widget"] - want) < 1e-15


class TestSelection:
    def test_mvtec_table_reproduces_used_column(self):
        selections = select_rotation_invariant(
            MVTEC_TABLE, MVTEC_THRESHOLD, exclude=MVTEC_EXCLUDES
        )
        used = {s.category for s in selections if s.used}
        assert used == {"metal_nut", "pill", "hazelnut", "bottle", "screw", "capsule"}
        reasons = {s.category: s.reason for s in selections}
        assert reasons["leather"] == "manual-exclude"
        assert reasons["wood"] == "manual-exclude"
        assert reasons["cable"] == "above-threshold"
        assert reasons["capsule"] == "below-threshold"

    def test_visa_table_reproduces_used_column(self):
        selections = select_rotation_invariant(
            VISA_TABLE, VISA_THRESHOLD, exclude=VISA_EXCLUDES
        )
        unused = {s.category for s in selections if not s.used}
        assert unused == {"candle", "capsules"}

    def test_infinite_threshold_uses_all(self):
        selections = select_rotation_invariant(MVTEC_TABLE, float("inf"))
        assert all(s.used for s in selections)

    def test_manual_include_overrides_threshold(self):
        selections = select_rotation_invariant(
            MVTEC_TABLE, MVTEC_THRESHOLD, include=("zipper",)
        )
        by_cat = {s.category: s for s in selections}
        assert by_cat["zipper"].used and by_cat["zipper"].reason == "manual-include"

    def test_unknown_override_rejected(self):
        with pytest.raises(ValueError):
            select_rotation_invariant(MVTEC_TABLE, 0.027, include=("gizmo",))

    def test_pure_function(self):
        a = select_rotation_invariant(VISA_TABLE, VISA_THRESHOLD)
        b = select_rotation_invariant(VISA_TABLE, VISA_THRESHOLD)
        assert a == b
