"""
Выбор декодера по режиму и пакетное декодирование высказываний
"""
from typing import Callable, Dict, Iterable, List, Sequence

from src.config.settings import DecodeConfig
from src.core.exceptions import ConfigError
from src.corpus.utterance import Utterance
from src.decoding.bti import decode_bti
from src.decoding.events import DecodeResult
from src.decoding.nonstreaming import decode_nonstreaming
from src.decoding.tti import decode_tti
from src.model.params import ModelParams

Decoder = Callable[[ModelParams, Sequence[int], DecodeConfig], DecodeResult]

DECODERS: Dict[str, Decoder] = {
    "bti": decode_bti,
    "tti": decode_tti,
    "nonstreaming": decode_nonstreaming,
}


def decode(params: ModelParams, speech: Sequence[int], config: DecodeConfig) -> DecodeResult:
    try:
        decoder = DECODERS[config.mode]
    except KeyError:
        raise ConfigError(f"неизвестный режим декодирования: {config.mode}") from None
    return decoder(params, speech, config)


def decode_utterances(
    params: ModelParams,
    utterances: Iterable[Utterance],
    config: DecodeConfig
) -> List[DecodeResult]:
    """Декодирование набора высказываний в исходном порядке"""
    results = []
    for utt in utterances:
        result = decode(params, utt.speech, config)
        results.append(result.model_copy(update={"utt_id": utt.id}))
    return results
