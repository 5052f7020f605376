"""
Лексикон: шаблон речевых кластеров для каждого символа текста
"""
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.core.tokens import VocabSpec


class Lexicon(BaseModel):
    """Шаблоны из 2-4 различных кластеров для каждого символа"""
    model_config = ConfigDict(frozen=True)

    seed: int
    vocab: VocabSpec
    templates: Tuple[Tuple[int, ...], ...]  # Индекс - смещение символа относительно text_offset

    def template(self, text_id: int) -> Tuple[int, ...]:
        return self.templates[text_id - self.vocab.text_offset]


def gen_lexicon(seed: int, vocab: VocabSpec) -> Lexicon:
    """
    Генерация лексикона

    Разные символы могут делить кластеры, внутри одного шаблона кластеры не повторяются.

    Args:
        seed: Зерно генерации
        vocab: Раскладка словаря

    Returns:
        Lexicon: Детерминированный лексикон для (seed, n_text, n_speech)
    """
    rng = np.random.default_rng([seed, vocab.n_text, vocab.n_speech])
    templates = []
    for _ in range(vocab.n_text):
        length = min(int(rng.integers(2, 5)), vocab.n_speech)
        units = rng.choice(vocab.n_speech, size=length, replace=False)
        templates.append(tuple(int(unit) for unit in units))
    return Lexicon(seed=seed, vocab=vocab, templates=tuple(templates))
