"""
Tests for characterness.cli

    python -m pytest tests/test_cli.py -v

Commands run in-process through click's CliRunner (for output) and through
``main(argv)`` (for exit codes).
"""

import csv
import json
import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np
from click.testing import CliRunner
from PIL import Image

from characterness.charmodel import MODEL_HEADER, load_model, save_model
from characterness.cli import cli, main
from characterness.errors import EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE
from characterness.imageio import write_mask
from characterness.synth import render_scene
from tests.helpers import two_bin_model


def write_rgb(path: Path, image: np.ndarray) -> Path:
    Image.fromarray(image, mode="RGB").save(path)
    return path


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())
        self.runner = CliRunner()
        self.model_path = self.tmp / "model.txt"
        save_model(two_bin_model(prior=0.6), self.model_path)

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def mkdir(self, name: str) -> Path:
        path = self.tmp / name
        path.mkdir()
        return path


class TestGroupOptions(CliTestCase):
    def test_config_dump_applies_overrides(self):
        result = self.runner.invoke(cli, ["--set", "beta=0.25", "--set", "cues=sw", "config-dump"])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("beta = 0.25\n", result.output)
        self.assertIn("cues = sw\n", result.output)

    def test_config_file(self):
        cfg = self.tmp / "run.cfg"
        cfg.write_text("labeling = none\n", encoding="utf-8")
        result = self.runner.invoke(cli, ["--config", str(cfg), "config-dump"])
        self.assertIn("labeling = none\n", result.output)

    def test_exit_codes(self):
        cases = [
            (["--version"], EXIT_OK),
            (["config-dump"], EXIT_OK),
            (["--set", "nope=1", "config-dump"], EXIT_USAGE),
            (["--set", "beta=3", "config-dump"], EXIT_USAGE),
            (["detect"], EXIT_USAGE),
            (["no-such-command"], EXIT_USAGE),
            (["--config", str(self.tmp / "missing.cfg"), "config-dump"], EXIT_IO),
        ]
        for argv, code in cases:
            with self.subTest(argv=argv):
                self.assertEqual(main(argv), code)


class TestTrain(CliTestCase):
    def test_manifest_without_masks(self):
        write_rgb(self.tmp / "a.png", render_scene(1).image)
        manifest = self.tmp / "set.json"
        manifest.write_text(json.dumps([{"image": "a.png"}]), encoding="utf-8")
        self.assertEqual(main(["-q", "train", str(manifest), "-o", str(self.tmp / "m.txt")]), EXIT_DATA)

    def test_manifest_with_missing_file(self):
        manifest = self.tmp / "set.json"
        manifest.write_text(json.dumps([{"image": "gone.png", "mask": "gone_gt.png"}]), encoding="utf-8")
        self.assertEqual(main(["-q", "train", str(manifest), "-o", str(self.tmp / "m.txt")]), EXIT_DATA)

    def test_writes_model(self):
        entries = []
        for seed in range(3):
            # counters of O give background candidates
            scene = render_scene(seed, words=["ECHO", "COHO"], dark_text=seed % 2 == 0)
            write_rgb(self.tmp / f"s{seed}.png", scene.image)
            write_mask(self.tmp / f"s{seed}_gt.png", scene.mask)
            entries.append({"image": f"s{seed}.png", "mask": f"s{seed}_gt.png"})
        manifest = self.tmp / "set.json"
        manifest.write_text(json.dumps(entries), encoding="utf-8")
        out = self.tmp / "trained.txt"

        code = main(["-q", "--set", "workers=2", "train", str(manifest), "-o", str(out)])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(out.read_text(encoding="utf-8").startswith(MODEL_HEADER))
        model = load_model(out)
        self.assertEqual(model.likelihoods["sw"].p_char.size, 50)


class TestDetect(CliTestCase):
    def test_blank_image(self):
        image = write_rgb(self.tmp / "blank.png", np.full((60, 90, 3), 128, dtype=np.uint8))
        out = self.tmp / "out"
        result = self.runner.invoke(cli, ["-q", "detect", str(image), "-m", str(self.model_path), "-o", str(out)])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(json.loads(result.output), [])
        self.assertEqual(json.loads((out / "blank_boxes.json").read_text(encoding="utf-8")), [])
        saliency = np.asarray(Image.open(out / "blank_map.png"))
        self.assertEqual(saliency.shape, (60, 90))
        self.assertFalse(saliency.any())

    def test_saliency_command(self):
        image = write_rgb(self.tmp / "scene.png", render_scene(3).image)
        out = self.tmp / "maps"
        code = main(["-q", "saliency", str(image), "-m", str(self.model_path), "-o", str(out)])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(np.asarray(Image.open(out / "scene.png")).shape, (120, 220))

    def test_debug_dir(self):
        image = write_rgb(self.tmp / "scene.png", render_scene(3).image)
        debug = self.tmp / "debug"
        code = main(["-q", "--set", f"debug_dir={debug}", "detect", str(image), "-m", str(self.model_path)])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue((debug / "scene_cues.csv").is_file())
        self.assertTrue((debug / "scene_graph.txt").is_file())

    def test_missing_model(self):
        image = write_rgb(self.tmp / "blank.png", np.zeros((10, 10, 3), dtype=np.uint8))
        self.assertEqual(main(["-q", "detect", str(image), "-m", str(self.tmp / "none.txt")]), EXIT_IO)

    def test_unreadable_image(self):
        broken = self.tmp / "broken.png"
        broken.write_bytes(b"not a png")
        self.assertEqual(main(["-q", "detect", str(broken), "-m", str(self.model_path)]), EXIT_IO)


class TestEvalSaliency(CliTestCase):
    def setUp(self):
        super().setUp()
        self.maps = self.mkdir("maps")
        self.gt = self.mkdir("gt")
        for seed in range(3):
            mask = render_scene(seed).mask
            write_mask(self.maps / f"img{seed}.png", mask)
            write_mask(self.gt / f"img{seed}.png", mask)

    def test_maps_equal_to_masks(self):
        out = self.tmp / "report"
        code = main(["-q", "eval-saliency", str(self.maps), str(self.gt), "-o", str(out)])
        self.assertEqual(code, EXIT_OK)
        summary = (out / "summary.txt").read_text(encoding="utf-8")
        self.assertIn("images 3\n", summary)
        self.assertIn("fmeasure 1.0000\n", summary)
        self.assertIn("voc 1.0000\n", summary)
        with open(out / "pr_curve.csv", newline="", encoding="utf-8") as f:
            self.assertEqual(len(list(csv.reader(f))), 257)
        with open(out / "per_image.csv", newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        self.assertEqual([r[0] for r in rows[1:]], ["img0", "img1", "img2"])

    def test_unmatched_files_are_skipped(self):
        write_mask(self.maps / "extra.png", np.ones((5, 5), dtype=bool))
        out = self.tmp / "report"
        self.assertEqual(main(["-q", "eval-saliency", str(self.maps), str(self.gt), "-o", str(out)]), EXIT_OK)
        self.assertIn("images 3\n", (out / "summary.txt").read_text(encoding="utf-8"))

    def test_empty_directory(self):
        empty = self.mkdir("empty")
        self.assertEqual(main(["-q", "eval-saliency", str(empty), str(self.gt)]), EXIT_DATA)


class TestEvalBoxes(CliTestCase):
    def setUp(self):
        super().setUp()
        self.pred = self.mkdir("pred")
        self.gt = self.mkdir("gt")
        detected = [{"x": 10, "y": 10, "w": 40, "h": 20, "angle": 0.0, "region_ids": [0, 1]}]
        (self.pred / "a_boxes.json").write_text(json.dumps(detected), encoding="utf-8")
        (self.gt / "a.txt").write_text("10 10 40 20\n100 100 30 10\n", encoding="utf-8")

    def test_summary(self):
        out = self.tmp / "report"
        result = self.runner.invoke(cli, ["-q", "eval-boxes", str(self.pred), str(self.gt), "-o", str(out)])
        self.assertEqual(result.exit_code, 0, result.output)
        summary = (out / "summary.txt").read_text(encoding="utf-8")
        self.assertEqual(
            summary, "images 1\nprecision 1.0000\nrecall 0.5000\nfmeasure 0.6667\n"
        )
        self.assertTrue((out / "per_image.csv").is_file())

    def test_bad_iou(self):
        self.assertEqual(main(["-q", "eval-boxes", str(self.pred), str(self.gt), "--iou", "1.5"]), EXIT_USAGE)

    def test_no_counterparts(self):
        other = self.mkdir("other")
        (other / "b.txt").write_text("0 0 4 4\n", encoding="utf-8")
        self.assertEqual(main(["-q", "eval-boxes", str(self.pred), str(other)]), EXIT_DATA)


if __name__ == "__main__":
    unittest.main()
