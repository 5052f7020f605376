"""
Непотоковое декодирование: текст выдается после прочтения всей речи
"""
from typing import List, Sequence

import numpy as np

from src.augment.perturbations import global_dedup
from src.config.settings import DecodeConfig
from src.core.exceptions import VocabError
from src.decoding.events import DecodeEvent, DecodeEventKind, DecodeResult
from src.layout.masks import MaskVariant, build_mask
from src.layout.sequences import nonstreaming_prefix_layout
from src.model.params import ModelParams
from src.model.transformer import forward


def decode_nonstreaming(params: ModelParams, speech: Sequence[int], config: DecodeConfig) -> DecodeResult:
    """
    Жадное декодирование с глобальной маской

    Очередной символ - argmax по текстовым токенам и BOUNDARY (признак конца);
    остановка на BOUNDARY, max_text_tokens или пределе позиций. Все события имеют
    consumed_inputs = T.
    """
    vocab = params.config.vocab
    for token in speech:
        if not vocab.is_speech(int(token)):
            raise VocabError(f"на вход декодера подан не речевой токен {token}")
    tokens = global_dedup(speech)[0] if config.dedup else [int(token) for token in speech]
    if not tokens:
        return DecodeResult()

    text_ids = vocab.text_ids()
    candidates = np.asarray(list(text_ids) + [vocab.boundary_id])
    text: List[int] = []
    events: List[DecodeEvent] = []
    while len(text) < config.max_text_tokens and len(tokens) + len(text) + 1 < params.config.max_positions:
        layout = nonstreaming_prefix_layout("decode", tokens, text, vocab)
        logits, _ = forward(params, layout, build_mask(layout, MaskVariant.GLOBAL))
        last = logits[-1]
        symbol = int(candidates[int(np.argmax(last[candidates]))])
        if symbol == vocab.boundary_id:
            break
        text.append(symbol)
        events.append(DecodeEvent(
            kind=DecodeEventKind.TEXT_EMITTED,
            stream_index=len(tokens) - 1,
            consumed_inputs=len(speech),
            token=symbol,
        ))
    return DecodeResult(text=text, events=events)
