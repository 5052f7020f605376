"""
Жадное потоковое декодирование TTI

Текстовые токены вставляются в тот же поток, что и речь: после каждого речевого
токена модель выдает текст, пока argmax остается текстовым токеном.
"""
from typing import List, Sequence

import numpy as np

from src.augment.perturbations import global_dedup, kept_positions
from src.config.settings import DecodeConfig
from src.core.exceptions import VocabError
from src.decoding.events import DecodeEvent, DecodeEventKind, DecodeResult
from src.layout.sequences import Modality
from src.model.params import ModelParams
from src.model.step_cache import StepCache, forward_step
from src.utils.logger import get_logger

logger = get_logger("decoding.tti")


def decode_tti(params: ModelParams, speech: Sequence[int], config: DecodeConfig) -> DecodeResult:
    """
    Декодирование высказывания в раскладке TTI

    Подряд выдается не более max_consecutive_text символов; при достижении предела
    пишется событие CapReached и читается следующий речевой токен. Символы не
    выдаются, если для оставшейся речи не хватит позиций.

    Args:
        params: Параметры модели
        speech: Речевые токены
        config: Настройки декодирования

    Returns:
        DecodeResult: Текст и события
    """
    vocab = params.config.vocab
    max_positions = params.config.max_positions
    for token in speech:
        if not vocab.is_speech(int(token)):
            raise VocabError(f"на вход декодера подан не речевой токен {token}")

    if config.dedup:
        tokens, remap = global_dedup(speech)
        originals = kept_positions(remap)
    else:
        tokens, originals = [int(token) for token in speech], list(range(len(speech)))

    cache = StepCache.empty(params)
    text: List[int] = []
    events: List[DecodeEvent] = []

    for index, (token, original) in enumerate(zip(tokens, originals)):
        consumed = original + 1
        logits = forward_step(params, cache, token, cache.n_stream, Modality.SPEECH_STREAM)
        remaining_speech = len(tokens) - index - 1
        emitted = 0
        while vocab.is_text(int(np.argmax(logits))):
            if emitted >= config.max_consecutive_text or cache.n_stream + remaining_speech >= max_positions:
                events.append(DecodeEvent(
                    kind=DecodeEventKind.CAP_REACHED,
                    stream_index=cache.n_stream - 1,
                    consumed_inputs=consumed,
                ))
                break
            symbol = int(np.argmax(logits))
            position = cache.n_stream
            logits = forward_step(params, cache, symbol, position, Modality.SPEECH_STREAM)
            text.append(symbol)
            events.append(DecodeEvent(
                kind=DecodeEventKind.TEXT_EMITTED,
                stream_index=position,
                consumed_inputs=consumed,
                token=symbol,
            ))
            emitted += 1

    logger.debug(f"TTI: {len(speech)} входов, {cache.n_stream} в потоке, {len(text)} символов")
    return DecodeResult(text=text, events=events)
