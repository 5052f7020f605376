import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.config.settings import CorpusSettings
from src.core.exceptions import (
    CorpusFormatError, MissingInputError, UtteranceInvariantError, VocabMismatchError
)
from src.core.tokens import build_vocab
from src.corpus.generator import gen_corpus, synth_split, synth_utterance
from src.corpus.lexicon import gen_lexicon
from src.corpus.utterance import validate_utterance
from src.storage.corpus_store import load_corpus, read_manifest, read_utterances, split_path
from tests.factories import VOCAB, make_utt


def collapse(tokens):
    """Свертка повторов подряд"""
    result = []
    for token in tokens:
        if not result or result[-1] != token:
            result.append(token)
    return result


class TestUtterance(unittest.TestCase):
    """
    Тесты инвариантов высказывания
    """

    def test_valid(self):
        utt = make_utt([0, 1, 2, 3], [8, 9], [1, 3])
        self.assertIs(validate_utterance(utt), utt)
        self.assertEqual(utt.segments(), [(0, 2), (2, 4)])
        self.assertEqual(utt.segment_lengths(), [2, 2])

    def test_violations(self):
        """
        Тест нарушений: порядок границ, последняя граница, длины
        """
        cases = [
            make_utt([0, 1, 2], [], []),
            make_utt([0], [8, 9], [0, 0]),
            make_utt([0, 1, 2, 3], [8, 9], [2, 1]),
            make_utt([0, 1, 2, 3], [8, 9], [1, 2]),
            make_utt([0, 1, 2, 3], [8, 9], [3]),
        ]
        for utt in cases:
            with self.assertRaises(UtteranceInvariantError):
                validate_utterance(utt)


class TestGenerator(unittest.TestCase):
    """
    Тесты генератора синтетического корпуса
    """

    def setUp(self):
        self.lexicon = gen_lexicon(7, VOCAB)

    def test_lexicon(self):
        """
        Тест лексикона: детерминизм и различные кластеры внутри шаблона
        """
        self.assertEqual(gen_lexicon(7, VOCAB), self.lexicon)
        self.assertEqual(len(self.lexicon.templates), VOCAB.n_text)
        for template in self.lexicon.templates:
            self.assertTrue(2 <= len(template) <= 4)
            self.assertEqual(len(set(template)), len(template))
            self.assertTrue(all(VOCAB.is_speech(unit) for unit in template))

    def test_clean_segments_follow_templates(self):
        """
        Тест выравнивания: без шума каждый сегмент после свертки совпадает с шаблоном
        """
        text = [8, 10, 12, 9]
        utt = validate_utterance(synth_utterance(self.lexicon, 3, text, 0.0))
        for (start, end), symbol in zip(utt.segments(), text):
            self.assertEqual(tuple(collapse(utt.speech[start:end])), self.lexicon.template(symbol))

    def test_deterministic(self):
        first = synth_utterance(self.lexicon, [1, 2], [8, 9, 10], 0.1)
        second = synth_utterance(self.lexicon, [1, 2], [8, 9, 10], 0.1)
        self.assertEqual(first, second)

    def test_noise_keeps_boundaries(self):
        """
        Тест шума: границы и длина не зависят от p_sub
        """
        clean = synth_utterance(self.lexicon, 5, [8, 9, 10, 11], 0.0)
        noisy = synth_utterance(self.lexicon, 5, [8, 9, 10, 11], 0.3)
        self.assertEqual(clean.boundaries, noisy.boundaries)
        self.assertEqual(clean.n_frames, noisy.n_frames)

    def test_noise_rate(self):
        """
        Тест доли замененных кадров методом Монте-Карло

        Замена на тот же кластер незаметна, поэтому ожидаемая доля
        p_sub * (1 - 1 / n_speech).
        """
        vocab = build_vocab(64, 20)
        lexicon = gen_lexicon(11, vocab)
        p_sub = 0.2
        changed = 0
        total = 0
        rng = np.random.default_rng(0)
        for seed in range(40):
            text = [int(y) for y in rng.integers(vocab.text_offset, vocab.boundary_id, size=64)]
            clean = synth_utterance(lexicon, seed, text, 0.0)
            noisy = synth_utterance(lexicon, seed, text, p_sub)
            changed += sum(a != b for a, b in zip(clean.speech, noisy.speech))
            total += clean.n_frames
        expected = p_sub * (1 - 1 / vocab.n_speech)
        self.assertAlmostEqual(changed / total, expected, delta=0.015)

    def test_invalid_p_sub(self):
        with self.assertRaises(ValueError):
            synth_utterance(self.lexicon, 0, [8], 0.5)

    def test_parallel_equals_sequential(self):
        """
        Тест: число процессов не влияет на результат
        """
        settings = CorpusSettings(n_train=12, n_test=3, len_range=(2, 5), seed=3, p_sub=0.1)
        sequential = synth_split(self.lexicon, settings, "train", 0, 12, workers=1)
        parallel = synth_split(self.lexicon, settings, "train", 0, 12, workers=3)
        self.assertEqual(sequential, parallel)
        for utt in sequential:
            validate_utterance(utt)
            self.assertTrue(2 <= utt.n_text <= 5)


class TestCorpusStore(unittest.TestCase):
    """
    Тесты записи и чтения корпуса
    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.settings = CorpusSettings(n_train=10, n_test=4, len_range=(2, 6), seed=1, p_sub=0.05)

    def tearDown(self):
        self.tmp.cleanup()

    def test_generation_is_byte_identical(self):
        """
        Тест: повторная генерация дает побайтно одинаковые файлы
        """
        gen_corpus(self.settings, VOCAB, self.root / "a")
        gen_corpus(self.settings, VOCAB, self.root / "b")
        for name in ("manifest.json", "train.jsonl", "test.jsonl"):
            self.assertEqual((self.root / "a" / name).read_bytes(), (self.root / "b" / name).read_bytes())

    def test_round_trip(self):
        manifest = gen_corpus(self.settings, VOCAB, self.root / "c")
        self.assertEqual(read_manifest(self.root / "c"), manifest)
        train = list(load_corpus(self.root / "c", "train", expected_vocab=VOCAB))
        test = list(load_corpus(self.root / "c", "test"))
        self.assertEqual(len(train), 10)
        self.assertEqual(len(test), 4)
        self.assertEqual(len({utt.id for utt in train + test}), 14)

    def test_corrupt_line_reports_line_number(self):
        """
        Тест: поврежденная строка указывается по номеру
        """
        gen_corpus(self.settings, VOCAB, self.root / "d")
        path = split_path(self.root / "d", "train")
        lines = path.read_text(encoding="utf-8").splitlines()
        lines[1] = '{"id": "broken", "speech": [0, 1'
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

        with self.assertRaises(CorpusFormatError) as context:
            list(read_utterances(path, VOCAB))
        self.assertEqual(context.exception.line_no, 2)

    def test_invariant_violation_names_utterance(self):
        path = self.root / "bad.jsonl"
        utt = make_utt([0, 1, 2], [8, 9], [2, 1], utt_id="bad-7")
        path.write_text(utt.model_dump_json() + "\n", encoding="utf-8")
        with self.assertRaises(UtteranceInvariantError) as context:
            list(read_utterances(path))
        self.assertEqual(context.exception.utt_id, "bad-7")

    def test_vocab_mismatch(self):
        gen_corpus(self.settings, VOCAB, self.root / "e")
        with self.assertRaises(VocabMismatchError):
            load_corpus(self.root / "e", "train", expected_vocab=build_vocab(16, 5))

    def test_token_outside_manifest_vocab(self):
        gen_corpus(self.settings, VOCAB, self.root / "f")
        path = split_path(self.root / "f", "test")
        utt = make_utt([0, 99], [8], [1], utt_id="wide")
        path.write_text(utt.model_dump_json() + "\n", encoding="utf-8")
        with self.assertRaises(VocabMismatchError):
            list(load_corpus(self.root / "f", "test"))

    def test_missing_corpus(self):
        with self.assertRaises(MissingInputError):
            load_corpus(self.root / "nothing", "train")


if __name__ == '__main__':
    unittest.main()
