import unittest
from unittest.mock import patch

import numpy as np

from src.analytics.metrics import boundary_counts, latency_stats
from src.config.settings import DecodeConfig
from src.core.exceptions import ConfigError, DecoderStateError, VocabError
from src.decoding.bti import BtiDecoder, decode_bti, is_boundary_trigger
from src.decoding.events import DecodeEventKind
from src.decoding.nonstreaming import decode_nonstreaming
from src.decoding.runner import decode, decode_utterances
from src.decoding.tti import decode_tti
from src.layout.sequences import Modality
from src.model.params import init_params
from src.model.step_cache import forward_step
from tests.factories import VOCAB, make_utt, tiny_model_config

# Кластер, которым заканчивается каждый сегмент в тестах с идеальным триггером
END_UNIT = 7


def perfect_trigger_step(params, cache, token, position, modality, speech_visible=None):
    """
    Настоящий шаг модели, но речевые логиты подменены: граница предсказывается
    ровно после кластера END_UNIT
    """
    logits = forward_step(params, cache, token, position, modality, speech_visible)
    if modality != Modality.SPEECH_STREAM:
        return logits
    forced = np.zeros_like(logits)
    forced[VOCAB.boundary_id if token == END_UNIT else 0] = 10.0
    return forced


def segmented_utterance(segments, utt_id="seg"):
    """Высказывание из сегментов, каждый из которых заканчивается END_UNIT"""
    speech, boundaries = [], []
    for segment in segments:
        speech.extend(segment + [END_UNIT])
        boundaries.append(len(speech) - 1)
    text = [VOCAB.text_offset + i % VOCAB.n_text for i in range(len(segments))]
    return make_utt(speech, text, boundaries, utt_id)


class TestBoundaryTrigger(unittest.TestCase):
    """
    Тесты правила срабатывания границы
    """

    def test_argmax_and_threshold(self):
        logits = np.zeros(VOCAB.total_vocab)
        logits[VOCAB.boundary_id] = 1.0
        logits[0] = 2.0
        self.assertFalse(is_boundary_trigger(logits, VOCAB.boundary_id, None))
        self.assertTrue(is_boundary_trigger(logits, VOCAB.boundary_id, 0.1))
        self.assertFalse(is_boundary_trigger(logits, VOCAB.boundary_id, 0.9))


class TestBtiLatency(unittest.TestCase):
    """
    Тесты задержки выдачи при идеальном триггере
    """

    def setUp(self):
        self.params = init_params(tiny_model_config(), 0)
        self.utt = segmented_utterance([[0, 1], [2], [3, 4], [5, 6, 0, 1, 2]])

    def run_decoder(self, delta, dedup=False):
        config = DecodeConfig(delta=delta, dedup=dedup)
        with patch("src.decoding.bti.forward_step", side_effect=perfect_trigger_step):
            return decode_bti(self.params, self.utt.speech, config)

    def test_emission_waits_delta_frames(self):
        """
        Тест: символ k выдается после min(t_k + 1 + Δ, T) прочитанных кадров
        """
        n_frames = self.utt.n_frames
        for delta in range(5):
            result = self.run_decoder(delta)
            self.assertEqual(len(result.text), self.utt.n_text)
            consumed = [event.consumed_inputs for event in result.emitted()]
            expected = [min(boundary + 1 + delta, n_frames) for boundary in self.utt.boundaries]
            self.assertEqual(consumed, expected)
            stats = latency_stats(result.events, self.utt)
            self.assertEqual(stats.interior_mean, float(delta))
            self.assertEqual(stats.unmatched, 0)

    def test_boundaries_match_reference(self):
        result = self.run_decoder(2)
        counts = boundary_counts(result.events, self.utt, tolerance=0)
        self.assertEqual(counts.precision, 1.0)
        self.assertEqual(counts.recall, 1.0)

    def test_event_order(self):
        """
        Тест монотонности событий
        """
        for delta in (0, 3, 20):
            events = self.run_decoder(delta).events
            consumed = [event.consumed_inputs for event in events]
            self.assertEqual(consumed, sorted(consumed))
            triggers = [event.stream_index for event in events if event.kind == DecodeEventKind.BOUNDARY_TRIGGERED]
            self.assertTrue(all(a < b for a, b in zip(triggers, triggers[1:])))
            emitted = [event.stream_index for event in events if event.kind == DecodeEventKind.TEXT_EMITTED]
            self.assertEqual(emitted, sorted(emitted))
            self.assertTrue(all(text >= trigger for text, trigger in zip(emitted, triggers)))
            seen_triggers = 0
            seen_text = 0
            for event in events:
                if event.kind == DecodeEventKind.BOUNDARY_TRIGGERED:
                    seen_triggers += 1
                elif event.kind == DecodeEventKind.TEXT_EMITTED:
                    seen_text += 1
                    self.assertLessEqual(seen_text, seen_triggers)

    def test_dedup_counts_original_frames(self):
        """
        Тест: при дедупликации задержка считается в исходных кадрах
        """
        utt = make_utt([0, 0, END_UNIT, END_UNIT, 1, 1, END_UNIT], [8, 9], [3, 6])
        with patch("src.decoding.bti.forward_step", side_effect=perfect_trigger_step):
            result = decode_bti(self.params, utt.speech, DecodeConfig(delta=0, dedup=True))
        self.assertEqual([event.consumed_inputs for event in result.triggers()], [3, 7])
        self.assertEqual(latency_stats(result.events, utt).delays, [-1, 0])


class TestBtiDecoder(unittest.TestCase):
    """
    Тесты состояния потокового декодера на случайной модели
    """

    def setUp(self):
        self.params = init_params(tiny_model_config(), 3)
        self.rng = np.random.default_rng(0)

    def test_feed_equals_batch(self):
        """
        Тест: подача по одному токену эквивалентна декодированию целиком
        """
        for case in range(100):
            speech = [int(x) for x in self.rng.integers(0, 3, size=int(self.rng.integers(1, 20)))]
            config = DecodeConfig(delta=int(self.rng.integers(0, 4)), beam=1 + case % 3)
            decoder = BtiDecoder(self.params, config)
            for token in speech:
                decoder.feed(token)
            streamed = decoder.finalize()
            batch = decode_bti(self.params, speech, config)
            self.assertEqual(streamed.model_dump(), batch.model_dump())
            self.assertEqual(len(streamed.text), len(streamed.triggers()))

    def test_empty_input(self):
        result = decode_bti(self.params, [], DecodeConfig())
        self.assertEqual(result.text, [])
        self.assertEqual(result.events, [])

    def test_state_errors(self):
        decoder = BtiDecoder(self.params, DecodeConfig())
        decoder.feed(1)
        with self.assertRaises(VocabError):
            decoder.feed(VOCAB.boundary_id)
        decoder.finalize()
        with self.assertRaises(DecoderStateError):
            decoder.feed(1)
        with self.assertRaises(DecoderStateError):
            decoder.finalize()

    def test_dedup_skips_repeats(self):
        decoder = BtiDecoder(self.params, DecodeConfig(dedup=True))
        for token in (2, 2, 2, 3):
            decoder.feed(token)
        self.assertEqual(decoder.consumed_inputs, 4)
        self.assertEqual(decoder.stream_length - len(decoder.finalize().triggers()), 2)

    def test_beam_is_deterministic(self):
        speech = [int(x) for x in self.rng.integers(0, VOCAB.n_speech, size=15)]
        config = DecodeConfig(beam=4, delta=2)
        first = decode_bti(self.params, speech, config)
        second = decode_bti(self.params, speech, config)
        self.assertEqual(first.model_dump(), second.model_dump())
        self.assertLessEqual(first.score, 0.0)


def text_step(text_logits):
    """
    Шаг модели с идеальным триггером, текстовые логиты задает text_logits(token, speech_visible)
    """
    def step(params, cache, token, position, modality, speech_visible=None):
        logits = perfect_trigger_step(params, cache, token, position, modality, speech_visible)
        if modality != Modality.TEXT_SLOT:
            return logits
        return text_logits(token, speech_visible)
    return step


class TestBtiBeam(unittest.TestCase):
    """
    Тесты лучевого поиска по текстовым слотам
    """

    def setUp(self):
        self.params = init_params(tiny_model_config(), 5)

    def run_decoder(self, utt, beam, text_logits):
        config = DecodeConfig(delta=0, beam=beam)
        with patch("src.decoding.bti.forward_step", side_effect=text_step(text_logits)):
            return decode_bti(self.params, utt.speech, config)

    def test_greedy_optimal_matches_wide_beam(self):
        """
        Тест: если слоты независимы, beam=1 совпадает с лучшей гипотезой beam=10
        """
        def by_position(token, speech_visible):
            logits = np.zeros(VOCAB.total_vocab)
            logits[VOCAB.text_offset + speech_visible % VOCAB.n_text] = 3.0
            return logits

        utt = segmented_utterance([[0], [1, 2], [3]])
        greedy = self.run_decoder(utt, 1, by_position)
        wide = self.run_decoder(utt, 10, by_position)
        self.assertEqual(len(greedy.text), 3)
        self.assertEqual(greedy.text, wide.text)
        self.assertAlmostEqual(greedy.score, wide.score)

    def test_beam_beats_greedy(self):
        """
        Тест: жадный выбор первого символа проигрывает, луч из двух гипотез находит лучший текст
        """
        first, second, third = VOCAB.text_offset, VOCAB.text_offset + 1, VOCAB.text_offset + 2
        text_ids = VOCAB.text_ids()

        def by_previous(token, speech_visible):
            logits = np.zeros(VOCAB.total_vocab)
            if token == VOCAB.sos_text_id:
                logits[text_ids.start:text_ids.stop] = -10.0
                logits[first] = 1.0
                logits[second] = 0.9
            elif token == second:
                logits[third] = 10.0
            return logits

        utt = segmented_utterance([[0], [1]])
        greedy = self.run_decoder(utt, 1, by_previous)
        beam = self.run_decoder(utt, 2, by_previous)
        self.assertEqual(greedy.text, [first, first])
        self.assertEqual(beam.text, [second, third])
        self.assertGreater(beam.score, greedy.score)
        self.assertEqual(
            [event.consumed_inputs for event in beam.emitted()],
            [event.consumed_inputs for event in greedy.emitted()],
        )


class TestTtiDecoder(unittest.TestCase):
    """
    Тесты жадного декодера TTI
    """

    def setUp(self):
        self.params = init_params(tiny_model_config(), 4)

    @staticmethod
    def always_text(params, cache, token, position, modality, speech_visible=None):
        forward_step(params, cache, token, position, modality, speech_visible)
        logits = np.zeros(VOCAB.total_vocab)
        logits[VOCAB.text_offset] = 5.0
        return logits

    def test_cap_terminates(self):
        """
        Тест: подряд не более max_consecutive_text символов на каждый речевой токен
        """
        config = DecodeConfig(mode="tti", max_consecutive_text=3)
        with patch("src.decoding.tti.forward_step", side_effect=self.always_text):
            result = decode_tti(self.params, [0, 1, 2, 3, 4], config)
        self.assertEqual(len(result.text), 15)
        caps = [event for event in result.events if event.kind == DecodeEventKind.CAP_REACHED]
        self.assertEqual([event.consumed_inputs for event in caps], [1, 2, 3, 4, 5])

    def test_position_budget(self):
        """
        Тест: текст не вытесняет оставшуюся речь за предел позиций
        """
        params = init_params(tiny_model_config(max_positions=10), 4)
        config = DecodeConfig(mode="tti", max_consecutive_text=8)
        with patch("src.decoding.tti.forward_step", side_effect=self.always_text):
            result = decode_tti(params, [0, 1, 2, 3, 4], config)
        self.assertEqual(len(result.text), 5)

    def test_random_model_terminates(self):
        rng = np.random.default_rng(1)
        config = DecodeConfig(mode="tti", max_consecutive_text=2)
        for _ in range(20):
            speech = [int(x) for x in rng.integers(0, VOCAB.n_speech, size=10)]
            result = decode_tti(self.params, speech, config)
            self.assertLessEqual(len(result.text), 2 * 10)
            self.assertTrue(all(VOCAB.is_text(token) for token in result.text))


class TestNonstreamingDecoder(unittest.TestCase):
    """
    Тесты непотокового декодера
    """

    def setUp(self):
        self.params = init_params(tiny_model_config(), 5)

    def test_terminates(self):
        config = DecodeConfig(mode="nonstreaming", max_text_tokens=3)
        result = decode_nonstreaming(self.params, [0, 1, 1, 2, 3], config)
        self.assertLessEqual(len(result.text), 3)
        self.assertTrue(all(event.consumed_inputs == 5 for event in result.events))

    def test_empty(self):
        self.assertEqual(decode_nonstreaming(self.params, [], DecodeConfig(mode="nonstreaming")).text, [])


class TestRunner(unittest.TestCase):
    """
    Тесты выбора декодера
    """

    def setUp(self):
        self.params = init_params(tiny_model_config(), 6)

    def test_modes(self):
        utts = [make_utt([0, 1, 2], [8], [2], "a"), make_utt([3, 4], [9], [1], "b")]
        for mode in ("bti", "tti", "nonstreaming"):
            results = decode_utterances(self.params, utts, DecodeConfig(mode=mode, max_text_tokens=4))
            self.assertEqual([result.utt_id for result in results], ["a", "b"])

    def test_unknown_mode(self):
        with self.assertRaises(ConfigError):
            decode(self.params, [0], DecodeConfig.model_construct(mode="ctc"))


if __name__ == '__main__':
    unittest.main()
