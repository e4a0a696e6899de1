import numpy as np
import pytest
from PIL import Image as PILImage

from blastokit.errors import DataError, ImageFormatError, ShapeError
from blastokit.imgcore import (
    Dataset,
    Image,
    LabeledSample,
    augment_dataset,
    dataset_hash,
    draw_transform,
    load_dataset,
    load_image,
    read_manifest,
    reflect,
    resize,
    rotate,
    save_image,
    split_stratified,
    transform_tag,
    write_tree,
)

from conftest import blob_image, make_class_tree


def bilinear_resize_oracle(src: np.ndarray, tw: int, th: int) -> np.ndarray:
    """Direct evaluation of the documented half-pixel-center formula."""
    h, w, c = src.shape
    out = np.zeros((th, tw, c))
    for r in range(th):
        for col in range(tw):
            sy = min(max((r + 0.5) * h / th - 0.5, 0.0), h - 1.0)
            sx = min(max((col + 0.5) * w / tw - 0.5, 0.0), w - 1.0)
            y0 = min(int(np.floor(sy)), h - 2) if h > 1 else 0
            x0 = min(int(np.floor(sx)), w - 2) if w > 1 else 0
            fy, fx = sy - y0, sx - x0
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            out[r, col] = (
                src[y0, x0] * (1 - fy) * (1 - fx)
                + src[y0, x1] * (1 - fy) * fx
                + src[y1, x0] * fy * (1 - fx)
                + src[y1, x1] * fy * fx
            )
    return out


def rotate_oracle(src: np.ndarray, angle: float) -> np.ndarray:
    """Explicit per-pixel inverse-rotation sampling loop."""
    h, w, c = src.shape
    t = np.deg2rad(angle)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    fill = src.reshape(-1, c).mean(axis=0)
    out = np.zeros((h, w, c))
    for r in range(h):
        for col in range(w):
            sx = cx + np.cos(t) * (col - cx) + np.sin(t) * (r - cy)
            sy = cy - np.sin(t) * (col - cx) + np.cos(t) * (r - cy)
            if not (0.0 <= sx <= w - 1 and 0.0 <= sy <= h - 1):
                out[r, col] = fill
                continue
            y0 = min(int(np.floor(sy)), h - 2)
            x0 = min(int(np.floor(sx)), w - 2)
            fy, fx = sy - y0, sx - x0
            out[r, col] = (
                src[y0, x0] * (1 - fy) * (1 - fx)
                + src[y0, x0 + 1] * (1 - fy) * fx
                + src[y0 + 1, x0] * fy * (1 - fx)
                + src[y0 + 1, x0 + 1] * fy * fx
            )
    return out


class TestImageType:
    def test_invariants_enforced(self):
        with pytest.raises(ShapeError):
            Image(np.zeros((4, 4)))  # not 3-channel
        with pytest.raises(ShapeError):
            Image(np.full((2, 2, 3), 1.5))
        with pytest.raises(ShapeError):
            Image(np.full((2, 2, 3), np.nan))

    def test_immutable(self):
        img = Image(np.zeros((2, 2, 3), np.float32))
        with pytest.raises((ValueError, AttributeError)):
            img.data[0, 0, 0] = 1.0


class TestLoadImage:
    def test_uniform_gray_any_size(self, tmp_path):
        arr = np.full((17, 23), 128, np.uint8)
        path = tmp_path / "gray.png"
        PILImage.fromarray(arr, "L").save(path)
        img = load_image(path, (8, 6))
        assert img.data.shape == (6, 8, 3)
        assert np.allclose(img.data, 128 / 255, atol=1e-6)

    def test_1x1_black_to_4x4_zeros(self, tmp_path):
        path = tmp_path / "black.png"
        PILImage.fromarray(np.zeros((1, 1, 3), np.uint8)).save(path)
        img = load_image(path, (4, 4))
        assert img.data.shape == (4, 4, 3)
        assert np.all(img.data == 0.0)

    def test_checkerboard_upsample_matches_oracle(self, tmp_path):
        checker = np.zeros((2, 2, 3), np.uint8)
        checker[0, 1] = checker[1, 0] = 255
        path = tmp_path / "check.png"
        PILImage.fromarray(checker).save(path)
        img = load_image(path, (4, 4))
        expected = bilinear_resize_oracle(checker.astype(np.float64) / 255.0, 4, 4)
        assert np.allclose(img.data, expected, atol=1e-6)

    def test_jpeg_accepted(self, tmp_path):
        path = tmp_path / "x.jpg"
        PILImage.fromarray(np.full((5, 5, 3), 100, np.uint8)).save(path, "JPEG")
        assert load_image(path).data.shape == (5, 5, 3)

    def test_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(OSError):
            load_image(tmp_path / "nope.png")

    def test_non_image_is_format_error(self, tmp_path):
        bad = tmp_path / "bad.png"
        bad.write_text("this is not a png")
        with pytest.raises(ImageFormatError):
            load_image(bad)

    def test_unsupported_format_rejected(self, tmp_path):
        path = tmp_path / "img.bmp"
        PILImage.fromarray(np.zeros((4, 4, 3), np.uint8)).save(path, "BMP")
        with pytest.raises(ImageFormatError):
            load_image(path)

    def test_png_roundtrip(self, tmp_path):
        rng = np.random.default_rng(3)
        img = Image(rng.integers(0, 256, (9, 7, 3)).astype(np.float32) / 255.0)
        save_image(img, tmp_path / "rt.png")
        back = load_image(tmp_path / "rt.png")
        assert np.allclose(back.data, img.data, atol=1 / 510)


class TestRotate:
    def test_zero_angle_identity(self):
        img = blob_image(np.random.default_rng(0), 32)
        assert rotate(img, 0.0) is img

    def test_constant_image_any_angle(self):
        img = Image(np.full((15, 12, 3), 0.625, np.float32))
        for angle in (-10, -3.7, 5.0, 9.99):
            assert np.allclose(rotate(img, angle).data, 0.625, atol=1e-5)

    def test_bright_pixel_matches_inverse_map_oracle(self):
        src = np.zeros((21, 21, 3), np.float32)
        src[5, 14] = 1.0
        img = Image(src)
        got = rotate(img, 5.0).data
        expected = rotate_oracle(src.astype(np.float64), 5.0)
        assert np.allclose(got, np.clip(expected, 0, 1), atol=1e-5)
        # the bright mass lands where the forward rotation matrix predicts
        t = np.deg2rad(5.0)
        pred_c = 10 + np.cos(t) * (14 - 10) - np.sin(t) * (5 - 10)
        pred_r = 10 + np.sin(t) * (14 - 10) + np.cos(t) * (5 - 10)
        gr, gc = np.unravel_index(got[..., 0].argmax(), got[..., 0].shape)
        assert (gr, gc) == (round(pred_r), round(pred_c))

    def test_dimensions_preserved(self):
        img = blob_image(np.random.default_rng(1), 28)
        out = rotate(img, -7.2)
        assert (out.height, out.width) == (img.height, img.width)

    def test_nonfinite_angle_rejected(self):
        img = Image(np.zeros((4, 4, 3), np.float32))
        with pytest.raises(ShapeError):
            rotate(img, float("nan"))


class TestReflect:
    def test_involution_bit_exact(self):
        img = blob_image(np.random.default_rng(2), 19)
        assert np.array_equal(reflect(reflect(img)).data, img.data)

    def test_half_black_half_white_swaps(self):
        data = np.zeros((4, 8, 3), np.float32)
        data[:, 4:] = 1.0
        out = reflect(Image(data)).data
        assert np.all(out[:, :4] == 1.0) and np.all(out[:, 4:] == 0.0)

    def test_symmetric_image_fixed_point(self):
        data = np.zeros((3, 5, 3), np.float32)
        data[:, 0] = data[:, 4] = 0.8
        data[:, 2] = 0.5
        assert np.array_equal(reflect(Image(data)).data, data)


class TestAugment:
    def _dataset(self, n=4, size=16, seed=0):
        rng = np.random.default_rng(seed)
        samples = [
            LabeledSample(blob_image(rng, size, i % 2), i % 2, f"s{i}") for i in range(n)
        ]
        return Dataset(samples)

    def test_count_arithmetic(self):
        ds = self._dataset(6)
        aug = augment_dataset(ds, variants_per_image=14, seed=1)
        assert len(aug.samples) == 6 * 15

    def test_zero_variants_returns_originals(self):
        ds = self._dataset(3)
        aug = augment_dataset(ds, 0, seed=1)
        assert len(aug.samples) == 3
        assert dataset_hash(aug) == dataset_hash(ds)

    def test_determinism_and_seed_sensitivity(self):
        ds = self._dataset(4)
        a = augment_dataset(ds, 5, seed=9)
        b = augment_dataset(ds, 5, seed=9)
        c = augment_dataset(ds, 5, seed=10)
        assert dataset_hash(a) == dataset_hash(b)
        assert dataset_hash(a) != dataset_hash(c)
        tags_a = [s.transform_tag for s in a.samples]
        tags_c = [s.transform_tag for s in c.samples]
        assert tags_a != tags_c

    def test_variants_inherit_label_and_dims(self):
        ds = self._dataset(4, size=20)
        aug = augment_dataset(ds, 3, seed=2)
        by_source = {}
        for s in aug.samples:
            by_source.setdefault(s.source_id, []).append(s)
        for src_id, group in by_source.items():
            labels = {s.label for s in group}
            assert len(labels) == 1
            for s in group:
                assert (s.image.height, s.image.width) == (20, 20)

    def test_class_balance_preserved(self):
        ds = self._dataset(6)
        aug = augment_dataset(ds, 4, seed=3)
        good, poor = aug.class_counts()
        assert good == poor == 15

    def test_tags_describe_transform(self):
        ds = self._dataset(2)
        aug = augment_dataset(ds, 10, seed=4)
        variant_tags = [s.transform_tag for s in aug.samples if s.transform_tag != "original"]
        assert all(t == "mirror" or t.startswith("rot") and t.endswith("+mirror")
                   for t in variant_tags)
        # both transform kinds appear over 20 draws
        assert any(t == "mirror" for t in variant_tags)
        assert any(t.startswith("rot") for t in variant_tags)

    def test_rejects_already_augmented_input(self):
        ds = self._dataset(2)
        aug = augment_dataset(ds, 1, seed=0)
        with pytest.raises(DataError):
            augment_dataset(aug, 1, seed=0)

    def test_draw_transform_schedule_independent(self):
        a = draw_transform(7, 3, 5)
        b = draw_transform(7, 3, 5)
        assert a == b
        assert transform_tag(*a) == transform_tag(*b)
        assert -10.0 <= a[1] <= 10.0


class TestSplit:
    def test_49_per_class_gives_39_10(self):
        rng = np.random.default_rng(0)
        samples = [
            LabeledSample(blob_image(rng, 8, i % 2), i % 2, f"s{i}") for i in range(98)
        ]
        ds = split_stratified(Dataset(samples), 0.8, seed=1)
        for cls in (0, 1):
            splits = [sp for s, sp in zip(ds.samples, ds.split_assignment) if s.label == cls]
            assert splits.count("train") == 39
            assert splits.count("test") == 10

    def test_fraction_one_all_train(self):
        rng = np.random.default_rng(0)
        samples = [LabeledSample(blob_image(rng, 8, i % 2), i % 2, f"s{i}") for i in range(6)]
        ds = split_stratified(Dataset(samples), 1.0, seed=0)
        assert set(ds.split_assignment) == {"train"}

    def test_empty_class_rejected(self):
        rng = np.random.default_rng(0)
        samples = [LabeledSample(blob_image(rng, 8, 0), 0, f"s{i}") for i in range(4)]
        with pytest.raises(DataError):
            split_stratified(Dataset(samples), 0.8, seed=0)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(0)
        samples = [LabeledSample(blob_image(rng, 8, i % 2), i % 2, f"s{i}") for i in range(10)]
        a = split_stratified(Dataset(samples), 0.8, seed=5)
        b = split_stratified(Dataset(samples), 0.8, seed=5)
        assert a.split_assignment == b.split_assignment


class TestTreeAndManifest:
    def test_roundtrip(self, tmp_path):
        src = make_class_tree(tmp_path / "src", per_class=3, size=16, seed=2)
        ds = load_dataset(src, 16)
        assert len(ds.samples) == 6
        aug = split_stratified(augment_dataset(ds, 2, seed=1), 0.8, seed=1)
        manifest = write_tree(aug, tmp_path / "out")
        assert manifest.name == "manifest.csv"
        rows = read_manifest(tmp_path / "out")
        assert len(rows) == len(aug.samples)
        assert {r.split for r in rows} == {"train", "test"}
        for row in rows:
            assert (tmp_path / "out" / row.path).is_file()

    def test_missing_class_dir(self, tmp_path):
        (tmp_path / "src" / "good").mkdir(parents=True)
        with pytest.raises(DataError):
            load_dataset(tmp_path / "src", 16)
