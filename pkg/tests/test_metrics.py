import itertools
import tempfile
import unittest
from functools import lru_cache
from pathlib import Path

import numpy as np

from src.analytics.evaluator import REPORT_COLUMNS, evaluate_params, write_report
from src.analytics.metrics import BoundaryCounts, boundary_counts, cer, edit_distance, latency_stats
from src.config.settings import DecodeConfig
from src.core.exceptions import MetricError
from src.decoding.events import DecodeEvent, DecodeEventKind
from src.model.params import init_params
from tests.factories import make_utt, random_utterance, tiny_model_config


def brute_edit_distance(a, b):
    """Расстояние Левенштейна по рекуррентному определению"""
    @lru_cache(maxsize=None)
    def solve(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            solve(i - 1, j) + 1,
            solve(i, j - 1) + 1,
            solve(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )
    return solve(len(a), len(b))


def text_event(consumed, token=8):
    return DecodeEvent(kind=DecodeEventKind.TEXT_EMITTED, stream_index=0, consumed_inputs=consumed, token=token)


def trigger_event(consumed):
    return DecodeEvent(kind=DecodeEventKind.BOUNDARY_TRIGGERED, stream_index=0, consumed_inputs=consumed)


class TestCer(unittest.TestCase):
    """
    Тесты CER
    """

    def test_examples(self):
        self.assertAlmostEqual(cer([1, 2, 3], [1, 3]), 1 / 3)
        self.assertEqual(cer([1, 2], []), 1.0)
        self.assertEqual(cer([1], [2, 3]), 2.0)
        self.assertEqual(cer([4, 5], [4, 5]), 0.0)

    def test_empty_reference(self):
        with self.assertRaises(MetricError):
            cer([], [1])

    def test_exhaustive_small_strings(self):
        """
        Тест: совпадение с полным перебором на строках длины до 4 над алфавитом из 3 символов
        """
        strings = [s for n in range(5) for s in itertools.product(range(3), repeat=n)]
        for a in strings:
            for b in strings:
                self.assertEqual(edit_distance(a, b), brute_edit_distance(a, b))

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = [int(x) for x in rng.integers(0, 4, size=int(rng.integers(1, 8)))]
            b = [int(x) for x in rng.integers(0, 4, size=int(rng.integers(0, 8)))]
            relabel = {symbol: 10 + (3 * symbol + 1) % 4 for symbol in range(4)}
            self.assertEqual(cer(a, b), cer([relabel[x] for x in a], [relabel[x] for x in b]))


class TestLatency(unittest.TestCase):
    """
    Тесты задержки выдачи
    """

    def setUp(self):
        self.utt = make_utt(list(range(8)), [8, 9, 10], [1, 4, 7])

    def test_delays(self):
        stats = latency_stats([trigger_event(2), text_event(3), text_event(5), text_event(8)], self.utt)
        self.assertEqual(stats.delays, [1, 0, 0])
        self.assertEqual(stats.interior, [1, 0])
        self.assertEqual(stats.interior_mean, 0.5)
        self.assertEqual(stats.unmatched, 0)

    def test_unmatched(self):
        stats = latency_stats([text_event(8)], self.utt)
        self.assertEqual(stats.delays, [6])
        self.assertEqual(stats.unmatched, 2)
        self.assertIsNone(latency_stats([], self.utt).mean)


class TestBoundaryCounts(unittest.TestCase):
    """
    Тесты точности и полноты границ
    """

    def setUp(self):
        self.utt = make_utt(list(range(10)), [8, 9, 10], [2, 5, 9])

    def test_tolerance(self):
        # кадры срабатывания 3, 9 и 9: вторая девятка остается без пары
        events = [trigger_event(4), trigger_event(10), trigger_event(10)]
        counts = boundary_counts(events, self.utt, tolerance=1)
        self.assertEqual(counts, BoundaryCounts(2, 3, 3))
        self.assertAlmostEqual(counts.precision, 2 / 3)
        self.assertAlmostEqual(counts.recall, 2 / 3)

    def test_outside_tolerance(self):
        counts = boundary_counts([trigger_event(1)], self.utt, tolerance=1)
        self.assertEqual(counts.matched, 0)
        self.assertEqual(counts.precision, 0.0)

    def test_sum(self):
        self.assertEqual(BoundaryCounts(1, 2, 3) + BoundaryCounts(1, 1, 1), BoundaryCounts(2, 3, 4))


class TestEvaluator(unittest.TestCase):
    """
    Тесты сборки отчета
    """

    def setUp(self):
        self.params = init_params(tiny_model_config(), 0)
        rng = np.random.default_rng(1)
        self.utts = [random_utterance(rng, utt_id=f"e{i}") for i in range(6)]

    def test_workers_do_not_change_report(self):
        config = DecodeConfig(delta=1)
        single = evaluate_params(self.params, self.utts, config, workers=1)
        parallel = evaluate_params(self.params, self.utts, config, workers=2)
        self.assertEqual(single.row(), parallel.row())
        self.assertEqual([score.utt_id for score in parallel.scores], [utt.id for utt in self.utts])

    def test_corpus_cer_is_pooled(self):
        report = evaluate_params(self.params, self.utts, DecodeConfig())
        self.assertEqual(report.ref_len, sum(utt.n_text for utt in self.utts))
        self.assertAlmostEqual(report.cer, report.edits / report.ref_len)

    def test_nonstreaming_has_no_boundary_metrics(self):
        report = evaluate_params(self.params, self.utts[:2], DecodeConfig(mode="nonstreaming", max_text_tokens=4))
        row = report.row()
        self.assertIsNone(row["boundary_precision"])
        self.assertIsNone(row["boundary_recall"])

    def test_report_files(self):
        report = evaluate_params(self.params, self.utts, DecodeConfig())
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_report(report, tmp)
            self.assertEqual([path.name for path in paths], ["report.tsv", "utterances.tsv", "summary.txt"])
            lines = (Path(tmp) / "report.tsv").read_text(encoding="utf-8").splitlines()
            self.assertEqual(lines[0].split("\t"), list(REPORT_COLUMNS))
            self.assertEqual(len(lines), 2)
            utterances = (Path(tmp) / "utterances.tsv").read_text(encoding="utf-8").splitlines()
            self.assertEqual(len(utterances), 1 + len(self.utts))


if __name__ == '__main__':
    unittest.main()
