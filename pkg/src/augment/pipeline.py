"""
Композиция аугментаций для обучения
"""
import zlib

import numpy as np

from src.augment.perturbations import random_dedup, speed_perturb, time_mask, trigger_shift
from src.config.settings import AugmentConfig
from src.core.tokens import VocabSpec
from src.corpus.utterance import Utterance, validate_utterance


def utterance_rng(seed: int, epoch: int, utt_id: str) -> np.random.Generator:
    """Генератор высказывания, зависящий только от (seed, epoch, id)"""
    return np.random.default_rng([seed, epoch, zlib.crc32(utt_id.encode("utf-8"))])


class AugmentPipeline:
    """
    Аугментации в порядке: скорость, случайная дедупликация, сдвиг триггеров;
    маскирование применяется позже к входам раскладки
    """

    def __init__(self, config: AugmentConfig, vocab: VocabSpec):
        self.config = config
        self.vocab = vocab

    def apply(self, utt: Utterance, rng: np.random.Generator) -> Utterance:
        """
        Применение аугментаций уровня высказывания

        Args:
            utt: Исходное высказывание
            rng: Генератор высказывания

        Returns:
            Utterance: Аугментированное высказывание (инварианты проверены)
        """
        factors = self.config.speed_factors
        factor = factors[int(rng.integers(0, len(factors)))] if len(factors) > 1 else factors[0]
        utt = speed_perturb(utt, factor)
        utt = random_dedup(utt, rng, self.config.dedup_p)
        utt = trigger_shift(utt, rng, self.config.trigger_shift_p, self.config.trigger_shift_max)
        return validate_utterance(utt)

    def mask_inputs(self, inputs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return time_mask(inputs, self.vocab, rng, self.config.time_mask_p)
