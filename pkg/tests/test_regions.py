"""
Tests for characterness.regions

    python -m pytest tests/test_regions.py -v
    python -m pytest tests/test_regions.py -m "not slow"
"""

import time
import unittest

import numpy as np
import pytest
from scipy import ndimage

from characterness.errors import ImageShapeError
from characterness.imgcore import gradient_magnitude
from characterness.regions import (
    BrightOnDark,
    DarkOnBright,
    MserParams,
    Polarity,
    Region,
    dedup_regions,
    emser_preprocess,
    extract_candidates,
    mask_iou,
    mser_detect,
    preprocess,
)
from characterness.synth import render_scene
from tests.helpers import square_image

FOUR_NEIGHBOURS = ndimage.generate_binary_structure(2, 1)


def best_iou(glyph: np.ndarray, regions) -> float:
    target = Region.from_mask(glyph)
    return max((mask_iou(target, r) for r in regions), default=0.0)


def smooth_noise(seed: int, shape=(48, 64)) -> np.ndarray:
    rng = np.random.default_rng(seed)
    field = ndimage.gaussian_filter(rng.normal(size=shape), 3.0)
    field = (field - field.min()) / (np.ptp(field) or 1.0)
    return np.rint(field * 255).astype(np.uint8)


class TestRegion(unittest.TestCase):
    def setUp(self):
        mask = np.zeros((20, 30), dtype=bool)
        mask[5:10, 8:20] = True
        self.full = mask
        self.region = Region.from_mask(mask, Polarity.BRIGHT_ON_DARK, 77)

    def test_from_mask_crops_to_bbox(self):
        self.assertEqual(self.region.bbox, (8, 5, 20, 10))
        self.assertEqual(self.region.mask.shape, (5, 12))
        self.assertEqual(self.region.area, 60)
        np.testing.assert_array_equal(self.region.full_mask(self.full.shape), self.full)

    def test_geometry_uses_image_coordinates(self):
        cx, cy = self.region.centroid
        self.assertAlmostEqual(cx, 13.5)
        self.assertAlmostEqual(cy, 7.0)
        self.assertEqual(self.region.geometry.bbox, self.region.bbox)

    def test_translated(self):
        moved = self.region.translated(3, -2)
        self.assertEqual(moved.bbox, (11, 3, 23, 8))
        self.assertAlmostEqual(moved.centroid[0], self.region.centroid[0] + 3)
        self.assertEqual(moved.polarity, Polarity.BRIGHT_ON_DARK)

    def test_empty_mask_rejected(self):
        with self.assertRaises(ImageShapeError):
            Region.from_mask(np.zeros((4, 4), dtype=bool))

    def test_byte_mask_is_normalised(self):
        """0/255 掩码 gives the same region as the boolean mask."""
        region = Region.from_mask(self.full.astype(np.uint8) * 255)
        self.assertEqual(region.mask.dtype, bool)
        self.assertLessEqual(set(np.unique(region.mask.view(np.uint8)).tolist()), {0, 1})
        self.assertEqual((region.bbox, region.area), (self.region.bbox, self.region.area))
        np.testing.assert_array_equal(region.skeleton, self.region.skeleton)


    def test_mask_iou(self):
        other = np.zeros_like(self.full)
        other[5:10, 14:26] = True
        iou = mask_iou(self.region, Region.from_mask(other))
        self.assertAlmostEqual(iou, 30 / 90)
        self.assertEqual(mask_iou(self.region, self.region), 1.0)


class TestParams(unittest.TestCase):
    def test_defaults(self):
        params = MserParams()
        self.assertEqual((params.delta, params.gamma), (10, 0.5))

    def test_invalid(self):
        for kwargs in ({"delta": 0}, {"gamma": -0.1}, {"max_area": 0.0}, {"max_area": 1.5}, {"min_area": -1}):
            with self.subTest(**kwargs):
                with self.assertRaises(ValueError):
                    MserParams(**kwargs)


class TestEmserPreprocess(unittest.TestCase):
    def test_gamma_zero_is_identity(self):
        img = smooth_noise(1).astype(np.float64)
        grad = np.abs(np.gradient(img)[0])
        for polarity in Polarity:
            with self.subTest(polarity=polarity):
                np.testing.assert_array_equal(emser_preprocess(img, grad, 0.0, polarity), img)

    def test_constant_image_unchanged(self):
        img = np.full((10, 10), 90.0)
        smoothed, grad = preprocess(np.full((10, 10, 3), 90, dtype=np.uint8))
        np.testing.assert_allclose(smoothed, img)
        for polarity in Polarity:
            np.testing.assert_allclose(emser_preprocess(smoothed, grad, 0.5, polarity), img)

    def test_sign_and_clamp(self):
        img = np.tile([50.0, 50.0, 200.0, 200.0, 200.0], (3, 1))
        grad = np.full(img.shape, 120.0)
        dark = emser_preprocess(img, grad, 0.5, Polarity.DARK_ON_BRIGHT)
        bright = emser_preprocess(img, grad, 0.5, Polarity.BRIGHT_ON_DARK)
        np.testing.assert_array_equal(dark[1], [50.0, 50.0, 255.0, 200.0, 200.0])
        np.testing.assert_array_equal(bright[1], [50.0, 0.0, 200.0, 200.0, 200.0])

    def test_blurred_stroke_keeps_its_width(self):
        """模糊笔画: stroke pixels keep their value, the bright rim outside is raised."""
        bar = np.zeros((60, 60), dtype=bool)
        bar[10:50, 28:31] = True
        img = ndimage.gaussian_filter(np.where(bar, 30.0, 220.0), 1.0)
        enhanced = emser_preprocess(img, gradient_magnitude(img), 0.5, Polarity.DARK_ON_BRIGHT)
        np.testing.assert_array_equal(enhanced[bar], img[bar])
        for column in (27, 31):
            with self.subTest(column=column):
                self.assertTrue(np.all(enhanced[15:45, column] > img[15:45, column] + 20))

    def test_shape_mismatch(self):
        with self.assertRaises(ImageShapeError):
            emser_preprocess(np.zeros((4, 4)), np.zeros((4, 5)), 0.5, Polarity.DARK_ON_BRIGHT)


class TestMserDetect(unittest.TestCase):
    def test_dark_square_is_the_only_region(self):
        img = np.full((100, 100), 220.0)
        img[40:60, 30:50] = 30.0
        regions = mser_detect(img, MserParams())
        self.assertEqual(len(regions), 1)
        region = regions[0]
        expected = np.zeros((100, 100), dtype=bool)
        expected[40:60, 30:50] = True
        np.testing.assert_array_equal(region.full_mask(expected.shape), expected)
        self.assertEqual(region.polarity, Polarity.DARK_ON_BRIGHT)
        self.assertTrue(30 <= region.source_threshold < 220)

    def test_bright_pass_ignores_the_ground(self):
        img = np.full((100, 100), 220.0)
        img[40:60, 30:50] = 30.0
        self.assertEqual(mser_detect(img, MserParams(), Polarity.BRIGHT_ON_DARK), [])

    def test_bright_square(self):
        img = square_image(size=100, x0=30, y0=40, side=20, fg=220, bg=30)
        regions = mser_detect(img, MserParams(), Polarity.BRIGHT_ON_DARK)
        self.assertEqual(len(regions), 1)
        self.assertEqual(regions[0].bbox, (30, 40, 50, 60))
        self.assertEqual(regions[0].polarity, Polarity.BRIGHT_ON_DARK)

    def test_constant_image(self):
        for polarity in Polarity:
            self.assertEqual(mser_detect(np.full((40, 40), 128.0), MserParams(), polarity), [])

    def test_regions_are_extremal(self):
        for seed in range(3):
            levels = smooth_noise(seed)
            for polarity in Polarity:
                regions = mser_detect(levels, MserParams(min_area=10, max_variation=1.0), polarity)
                for region in regions:
                    with self.subTest(seed=seed, polarity=polarity, bbox=region.bbox):
                        member = region.full_mask(levels.shape)
                        ring = ndimage.binary_dilation(member, structure=FOUR_NEIGHBOURS) & ~member
                        t = region.source_threshold
                        if polarity is Polarity.DARK_ON_BRIGHT:
                            self.assertTrue(np.all(levels[member] <= t))
                            self.assertTrue(np.all(levels[ring] > t))
                        else:
                            self.assertTrue(np.all(levels[member] >= t))
                            self.assertTrue(np.all(levels[ring] < t))
                        _, count = ndimage.label(member, structure=np.ones((3, 3)))
                        self.assertEqual(count, 1)

    def test_regions_form_a_forest(self):
        levels = smooth_noise(7)
        regions = mser_detect(levels, MserParams(min_area=5, max_variation=1.0))
        masks = [r.full_mask(levels.shape) for r in regions]
        for i in range(len(masks)):
            for j in range(i + 1, len(masks)):
                overlap = masks[i] & masks[j]
                if overlap.any():
                    nested = np.array_equal(overlap, masks[i]) or np.array_equal(overlap, masks[j])
                    self.assertTrue(nested, f"regions {i} and {j} overlap without nesting")

    def test_max_variation_is_monotone(self):
        levels = smooth_noise(5)
        counts = [len(mser_detect(levels, MserParams(min_area=5, max_variation=v))) for v in (0.1, 0.25, 0.5, 1.0, 4.0)]
        self.assertEqual(counts, sorted(counts))

    def test_area_bounds(self):
        levels = smooth_noise(9)
        params = MserParams(min_area=40, max_area=0.1, max_variation=2.0)
        for region in mser_detect(levels, params):
            self.assertGreaterEqual(region.area, 40)
            self.assertLessEqual(region.area, 0.1 * levels.size)


class TestPasses(unittest.TestCase):
    def test_pass_polarities(self):
        params = MserParams()
        self.assertIs(DarkOnBright(params).polarity, Polarity.DARK_ON_BRIGHT)
        self.assertIs(BrightOnDark(params).polarity, Polarity.BRIGHT_ON_DARK)

    def test_flat_patch_is_left_alone(self):
        smoothed = np.full((4, 4), 100.0)
        grad = np.full((4, 4), 40.0)
        np.testing.assert_array_equal(BrightOnDark(MserParams()).enhance(smoothed, grad), 100.0)
        np.testing.assert_array_equal(DarkOnBright(MserParams()).enhance(smoothed, grad), 100.0)

    def test_bright_pass_darkens_the_dark_rim(self):
        smoothed = np.tile([200.0, 200.0, 50.0, 50.0, 50.0], (3, 1))
        grad = np.full(smoothed.shape, 40.0)
        np.testing.assert_array_equal(BrightOnDark(MserParams()).enhance(smoothed, grad)[1], [200.0, 200.0, 30.0, 50.0, 50.0])


class TestDedup(unittest.TestCase):
    def test_drops_near_duplicates_across_polarities(self):
        mask = np.zeros((30, 30), dtype=bool)
        mask[5:15, 5:15] = True
        nearly = mask.copy()
        nearly[5, 5] = False
        a = Region.from_mask(mask, Polarity.DARK_ON_BRIGHT)
        b = Region.from_mask(nearly, Polarity.BRIGHT_ON_DARK)
        other = np.zeros_like(mask)
        other[20:25, 20:28] = True
        c = Region.from_mask(other)
        kept = dedup_regions([a, b, c])
        self.assertEqual(len(kept), 2)
        self.assertIs(kept[0], c)
        self.assertIs(kept[1], b)

    def test_order_is_independent_of_input_order(self):
        masks = []
        for k in range(5):
            m = np.zeros((40, 40), dtype=bool)
            m[k * 7 : k * 7 + 3 + k, 2 : 10 + k] = True
            masks.append(Region.from_mask(m))
        forward = [r.bbox for r in dedup_regions(masks)]
        backward = [r.bbox for r in dedup_regions(masks[::-1])]
        self.assertEqual(forward, backward)


class TestExtractCandidates(unittest.TestCase):
    def setUp(self):
        self.scene = render_scene(3, words=["HUE", "COHO"], dark_text=False, foreground=(235, 235, 235), background=(20, 20, 20))

    def test_blank_image(self):
        self.assertEqual(extract_candidates(np.full((50, 60, 3), 128, dtype=np.uint8), MserParams()), [])
        self.assertEqual(extract_candidates(np.zeros((0, 0, 3), dtype=np.uint8), MserParams()), [])

    def test_ids_follow_order(self):
        regions = extract_candidates(self.scene.image, MserParams())
        self.assertEqual([r.id for r in regions], list(range(len(regions))))
        areas = [r.area for r in regions]
        self.assertEqual(areas, sorted(areas))

    def test_bright_glyphs_recovered(self):
        regions = extract_candidates(self.scene.image, MserParams())
        for k, glyph in enumerate(self.scene.glyph_masks):
            with self.subTest(glyph=k):
                self.assertGreaterEqual(best_iou(glyph, regions), 0.9)

    def test_polarity_symmetry(self):
        bright = extract_candidates(self.scene.image, MserParams())
        dark = extract_candidates(255 - self.scene.image, MserParams())
        for k, glyph in enumerate(self.scene.glyph_masks):
            with self.subTest(glyph=k):
                target = Region.from_mask(glyph)
                a = max(bright, key=lambda r: mask_iou(target, r))
                b = max(dark, key=lambda r: mask_iou(target, r))
                self.assertGreaterEqual(mask_iou(a, b), 0.9)
                self.assertEqual(a.polarity, Polarity.BRIGHT_ON_DARK)
                self.assertEqual(b.polarity, Polarity.DARK_ON_BRIGHT)


@pytest.mark.slow
class TestBlurredFixtures(unittest.TestCase):
    """Dark text with Gaussian blur (sigma 1) over twenty rendered scenes."""

    def setUp(self):
        self.scenes = [render_scene(100 + seed, dark_text=True, blur=1.0) for seed in range(20)]

    def test_recovery_and_edge_enhancement(self):
        start = time.perf_counter()
        enhanced, plain = [], []
        for scene in self.scenes:
            with_grad = extract_candidates(scene.image, MserParams(gamma=0.5))
            without = extract_candidates(scene.image, MserParams(gamma=0.0))
            for glyph in scene.glyph_masks:
                enhanced.append(best_iou(glyph, with_grad))
                plain.append(best_iou(glyph, without))
        recovered = np.mean(np.array(enhanced) >= 0.7)
        self.assertGreaterEqual(recovered, 0.9)
        self.assertGreaterEqual(np.mean(enhanced), np.mean(plain))
        self.assertLess(time.perf_counter() - start, 30.0)


if __name__ == "__main__":
    unittest.main()
