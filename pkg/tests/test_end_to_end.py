"""
Сквозные прогоны на корпусе настольного масштаба

Запуск: pytest -m slow (несколько минут на CPU)
"""
import tempfile
import unittest
from pathlib import Path

import pytest

from src.analytics.ablation import ablation_suite
from src.analytics.evaluator import evaluate_params
from src.config.loader import load_config
from src.main import run
from src.model.params import ModelConfig
from src.storage.corpus_store import load_corpus
from src.train.trainer import train

DESK_CONFIG = Path(__file__).resolve().parents[1] / "config" / "desk.yaml"

# Допуск направленных сравнений в долях CER
SLACK = 0.002


@pytest.mark.slow
class TestConvergence(unittest.TestCase):
    """
    Сходимость BTI, TTI и непотоковой модели на одном корпусе
    """

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls.tmp.name)
        cls.config = load_config(DESK_CONFIG)
        cls.corpus_dir = cls.root / "corpus"
        assert run(["gen", "--config", str(DESK_CONFIG), "--out-dir", str(cls.root)]) == 0
        cls.vocab = cls.config.vocab.to_spec()
        cls.test_utts = list(load_corpus(cls.corpus_dir, "test", expected_vocab=cls.vocab))
        cls.cer = {}
        for layout in ("bti", "nonstreaming", "tti"):
            train_config = cls.config.train.model_copy(update={"layout": layout, "dev_size": 20})
            decode_config = cls.config.decode.model_copy(update={"mode": layout})
            result = train(
                train_config,
                cls.corpus_dir,
                ModelConfig.from_settings(cls.config.model, cls.vocab),
                cls.config.train.seed,
                decode_config,
                cls.root / layout,
            )
            cls.cer[layout] = evaluate_params(result.params, cls.test_utts, decode_config).cer

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_bti_converges(self):
        self.assertLess(self.cer["bti"], 0.05)

    def test_nonstreaming_not_worse(self):
        self.assertLessEqual(self.cer["nonstreaming"], self.cer["bti"] + 0.02)

    def test_tti_not_better(self):
        self.assertGreaterEqual(self.cer["tti"], self.cer["bti"] - SLACK)


@pytest.mark.slow
class TestAblationOrdering(unittest.TestCase):
    """
    Без right-chunk и без сглаживания меток CER не лучше полного BTI
    """

    def test_ordering(self):
        config = load_config(DESK_CONFIG, [
            "--ablation.variants=[bti_full, no_right_chunk, no_label_smoothing]",
            "--ablation.seeds=[0, 1, 2]",
            "--ablation.p_sub=0.15",
        ])
        with tempfile.TemporaryDirectory() as tmp:
            rows = {row["variant"]: row for row in ablation_suite(config, tmp)}
            self.assertTrue((Path(tmp) / "ablation.md").exists())
        full = rows["bti_full"]["cer"]
        self.assertGreaterEqual(rows["no_right_chunk"]["cer"], full - SLACK)
        self.assertGreaterEqual(rows["no_label_smoothing"]["cer"], full - SLACK)
        self.assertEqual(rows["bti_full"]["n_seeds"], 3)


@pytest.mark.slow
class TestCliReproducibility(unittest.TestCase):
    """
    Два запуска train и eval с одинаковой конфигурацией дают одинаковые байты
    """

    def test_train_eval_twice(self):
        overrides = [
            "--corpus.n_train=200", "--corpus.n_test=20",
            "--train.epochs=2", "--train.dev_size=5",
        ]
        with tempfile.TemporaryDirectory() as tmp:
            runs = [Path(tmp) / "a", Path(tmp) / "b"]
            for out_dir in runs:
                common = ["--config", str(DESK_CONFIG), "--out-dir", str(out_dir), *overrides]
                self.assertEqual(run(["gen", *common]), 0)
                self.assertEqual(run(["train", *common]), 0)
                self.assertEqual(run(["eval", *common]), 0)
            first, second = runs
            for name in ("checkpoints/epoch_002.bin", "checkpoints/epoch_002.json", "metrics.tsv", "report.tsv"):
                self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), msg=name)


@pytest.mark.slow
class TestNoiselessCorpus(unittest.TestCase):
    """
    Без шума замены модель почти без ошибок распознает собственный обучающий корпус
    """

    def test_training_utterances(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            overrides = ["--corpus.p_sub=0.0"]
            config = load_config(DESK_CONFIG, overrides)
            self.assertEqual(run(["gen", "--config", str(DESK_CONFIG), "--out-dir", str(root), *overrides]), 0)
            vocab = config.vocab.to_spec()
            result = train(
                config.train,
                root / "corpus",
                ModelConfig.from_settings(config.model, vocab),
                config.train.seed,
                config.decode,
                root / "run",
            )
            train_utts = list(load_corpus(root / "corpus", "train", expected_vocab=vocab))[:200]
            self.assertLess(evaluate_params(result.params, train_utts, config.decode).cer, 0.01)
