import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from src.config.loader import load_config
from src.config.settings import Config
from src.core.exceptions import ConfigError, MissingInputError, UsageError
from src.main import run

CONFIG_DIR = Path(__file__).resolve().parents[1] / "config"

# Маленький корпус, чтобы gen укладывался в доли секунды
SMALL_CORPUS = ["--corpus.n_train=10", "--corpus.n_test=3", "--corpus.len_range=[2,4]"]


class TestLoadConfig(unittest.TestCase):
    """
    Тесты загрузки конфигурации
    """

    def test_defaults(self):
        config = load_config()
        self.assertEqual(config, Config())
        self.assertEqual(config.vocab.to_spec().total_vocab, 87)

    def test_desk_yaml(self):
        config = load_config(CONFIG_DIR / "desk.yaml")
        self.assertEqual(config.vocab.n_speech, 64)
        self.assertEqual(config.corpus.n_train, 2000)
        self.assertEqual(config.train.layout, "bti")

    def test_typed_overrides(self):
        config = load_config(overrides=[
            "--train.epochs=3",
            "--train.augment.speed_factors=[1.0]",
            "--decode.boundary_threshold=0.5",
            "--decode.dedup=false",
        ])
        self.assertEqual(config.train.epochs, 3)
        self.assertEqual(config.train.augment.speed_factors, [1.0])
        self.assertEqual(config.decode.boundary_threshold, 0.5)
        self.assertFalse(config.decode.dedup)

    def test_override_beats_file(self):
        config = load_config(CONFIG_DIR / "desk.yaml", ["--corpus.n_train=5"])
        self.assertEqual(config.corpus.n_train, 5)

    def test_unknown_flag(self):
        with self.assertRaises(UsageError) as ctx:
            load_config(overrides=["--train.bogus=1"])
        self.assertIn("--train.bogus", str(ctx.exception))
        with self.assertRaises(UsageError):
            load_config(overrides=["--train.epochs"])

    def test_invalid_value(self):
        with self.assertRaises(ConfigError):
            load_config(overrides=["--train.epochs=0"])
        with self.assertRaises(ConfigError):
            load_config(overrides=["--decode.mode=ctc"])

    def test_broken_yaml(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "broken.yaml"
            path.write_text("train: [1, 2\n", encoding="utf-8")
            with self.assertRaises(ConfigError):
                load_config(path)
            with self.assertRaises(MissingInputError):
                load_config(Path(tmp) / "absent.yaml")

    def test_nested_unknown_key(self):
        """
        Тест: опечатка во вложенной секции YAML - ошибка конфигурации
        """
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "typo.yaml"
            path.write_text("train:\n  epoch: 3\n", encoding="utf-8")
            with self.assertRaises(ConfigError):
                load_config(path)
            path.write_text("train:\n  augment:\n    speed_factor: [1.0]\n", encoding="utf-8")
            with self.assertRaises(ConfigError):
                load_config(path)

    def test_environment_is_ignored(self):
        with patch.dict(os.environ, {"WORKERS": "7", "TRAIN__EPOCHS": "99"}):
            config = load_config()
        self.assertEqual(config.workers, 1)
        self.assertEqual(config.train.epochs, 10)


class TestCli(unittest.TestCase):
    """
    Тесты командной строки
    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def run_cli(self, *argv: str) -> int:
        return run(list(argv))

    def test_usage_errors(self):
        out_dir = str(self.root / "usage")
        self.assertEqual(self.run_cli("transcribe", "--out-dir", out_dir), 2)
        self.assertEqual(self.run_cli("gen", "--out-dir", out_dir, "--bogus=1"), 2)
        self.assertEqual(self.run_cli("gen", "--out-dir", out_dir, "--layout", "ctc"), 2)

    def test_config_error(self):
        self.assertEqual(self.run_cli("gen", "--out-dir", str(self.root / "c"), "--corpus.p_sub=0.7"), 3)

        path = self.root / "typo.yaml"
        path.write_text("corpus:\n  n_trian: 5\n", encoding="utf-8")
        self.assertEqual(self.run_cli("gen", "--config", str(path), "--out-dir", str(self.root / "t")), 3)

    def test_missing_corpus(self):
        out_dir = self.root / "empty"
        self.assertEqual(self.run_cli("train", "--out-dir", str(out_dir)), 4)
        self.assertFalse((out_dir / "run_manifest.json").exists())

    def test_gen_is_reproducible(self):
        """
        Тест: два запуска gen дают побайтно одинаковый корпус
        """
        first, second = self.root / "a", self.root / "b"
        self.assertEqual(self.run_cli("gen", "--out-dir", str(first), *SMALL_CORPUS), 0)
        self.assertEqual(self.run_cli("gen", "--out-dir", str(second), "--workers", "2", *SMALL_CORPUS), 0)
        for name in ("manifest.json", "train.jsonl", "test.jsonl"):
            self.assertEqual((first / "corpus" / name).read_bytes(), (second / "corpus" / name).read_bytes())

        manifest = json.loads((first / "run_manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["command"], "gen")
        self.assertIn("corpus/manifest.json", manifest["artifacts"])
        self.assertTrue((first / "logs" / "streamasr.log").exists())

    def test_masks_dump(self):
        out_dir = self.root / "m"
        self.assertEqual(self.run_cli("gen", "--out-dir", str(out_dir), *SMALL_CORPUS), 0)
        self.assertEqual(self.run_cli("masks", "dump", "--out-dir", str(out_dir), "--utt-id", "test-00001"), 0)
        for variant in ("global", "causal", "right_chunk"):
            pbm = (out_dir / f"mask_{variant}.pbm").read_text(encoding="ascii").splitlines()
            self.assertEqual(pbm[0], "P1")
            self.assertTrue((out_dir / f"mask_{variant}.csv").exists())

        self.assertEqual(self.run_cli("masks", "dump", "--out-dir", str(out_dir), "--utt-id", "nope"), 4)


if __name__ == '__main__':
    unittest.main()
