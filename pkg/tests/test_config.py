"""
Tests for characterness.config

    python -m pytest tests/test_config.py -v
"""

import tempfile
import unittest
from pathlib import Path

from characterness.config import (
    PipelineConfig,
    apply_overrides,
    config_keys,
    dump_config,
    load_config,
    parse_config,
)
from characterness.errors import ConfigError, InputOutputError


class TestPipelineConfig(unittest.TestCase):
    def test_defaults(self):
        config = PipelineConfig()
        self.assertEqual(config.mser_delta, 10)
        self.assertEqual(config.cues, ("sw", "pd", "ehog"))
        self.assertEqual(config.labeling, "mrf")
        self.assertAlmostEqual(config.fmeasure_beta2, 0.3)

    def test_registry_lists_every_field(self):
        keys = config_keys()
        self.assertEqual(len(keys), len(set(keys)))
        for key in ("guided_radius", "mser_delta", "beta", "bandwidth", "match_iou", "workers", "debug_dir"):
            self.assertIn(key, keys)

    def test_invalid_values(self):
        cases = {
            "mser_delta": 0,
            "beta": 1.5,
            "cues": ("sw", "shape"),
            "labeling": "crf",
            "angle_limit": 0.0,
            "workers": 0,
        }
        for key, value in cases.items():
            with self.subTest(key=key):
                with self.assertRaises(ConfigError):
                    PipelineConfig(**{key: value})

    def test_replace_validates(self):
        self.assertEqual(PipelineConfig().replace(beta=0.2).beta, 0.2)
        with self.assertRaises(ConfigError):
            PipelineConfig().replace(dedup_iou=2.0)


class TestConfigText(unittest.TestCase):
    def test_round_trip(self):
        config = PipelineConfig(mser_delta=7, cues=("sw", "ehog"), guided_eps=12.5, debug_dir="dbg")
        self.assertEqual(parse_config(dump_config(config)), config)

    def test_dump_has_every_key(self):
        text = dump_config(PipelineConfig())
        for key in config_keys():
            self.assertIn(f"\n{key} = ", text)

    def test_comments_and_blank_lines(self):
        config = parse_config("# tuned\n\nmser_delta = 5  # smaller\ncues = pd\n")
        self.assertEqual(config.mser_delta, 5)
        self.assertEqual(config.cues, ("pd",))

    def test_unknown_key_names_line(self):
        with self.assertRaisesRegex(ConfigError, "line 2"):
            parse_config("beta = 0.4\nmser_delat = 5\n")

    def test_unparseable_value(self):
        with self.assertRaises(ConfigError):
            parse_config("mser_delta = ten\n")

    def test_missing_equals(self):
        with self.assertRaises(ConfigError):
            parse_config("mser_delta 10\n")

    def test_load_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.cfg"
            path.write_text("labeling = none\n", encoding="utf-8")
            self.assertEqual(load_config(path).labeling, "none")
            self.assertEqual(load_config(None), PipelineConfig())
            with self.assertRaises(InputOutputError):
                load_config(Path(tmp) / "missing.cfg")


class TestOverrides(unittest.TestCase):
    def test_applied_on_top(self):
        base = parse_config("beta = 0.3\nbandwidth = 3.0\n")
        config = apply_overrides(base, ["beta=0.7", "cues = sw,pd"])
        self.assertEqual(config.beta, 0.7)
        self.assertEqual(config.bandwidth, 3.0)
        self.assertEqual(config.cues, ("sw", "pd"))

    def test_bad_overrides(self):
        for item in ("beta", "nope=1", "beta=2.0"):
            with self.subTest(item=item):
                with self.assertRaises(ConfigError):
                    apply_overrides(PipelineConfig(), [item])


if __name__ == "__main__":
    unittest.main()
