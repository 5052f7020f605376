"""
Потоковое декодирование BTI с триггером по границе и правым контекстом Δ

Декодер принимает речевые токены по одному. После каждого токена модель
предсказывает следующий элемент потока; если это граница, она вставляется в поток,
а запрос очередного текстового слота выполняется после Δ следующих речевых токенов
(или сразу при Δ = 0, или в finalize, если поток закончился раньше).
"""
from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.augment.perturbations import global_dedup, kept_positions
from src.config.settings import DecodeConfig
from src.core.exceptions import DecoderStateError, VocabError
from src.decoding.events import DecodeEvent, DecodeEventKind, DecodeResult
from src.layout.sequences import Modality
from src.model.params import ModelParams
from src.model.step_cache import StepCache, forward_step
from src.train.loss import log_softmax
from src.utils.logger import get_logger

logger = get_logger("decoding.bti")


@dataclass
class _Hypothesis:
    tokens: List[int]
    score: float
    cache: StepCache


@dataclass(frozen=True)
class _PendingSlot:
    slot: int
    due_frames: int  # запрос выполняется, когда в потоке столько речевых токенов


def is_boundary_trigger(logits: np.ndarray, boundary_id: int, threshold: Optional[float]) -> bool:
    """Argmax по всему словарю или P(BOUNDARY) >= threshold"""
    if threshold is None:
        return int(np.argmax(logits)) == boundary_id
    probs = np.exp(log_softmax(logits.astype(np.float64)))
    return bool(probs[boundary_id] >= threshold)


class BtiDecoder:
    """
    Состояние потокового декодера

    Речевой кэш общий для всех гипотез лучевого поиска; у каждой гипотезы
    собственный текстовый кэш. Границы выбираются жадно.
    """

    def __init__(self, params: ModelParams, config: DecodeConfig):
        self.params = params
        self.config = config
        self.vocab = params.config.vocab

        self._root = StepCache.empty(params)
        self._hyps: List[_Hypothesis] = [_Hypothesis([], 0.0, self._root)]
        self._pending: Deque[_PendingSlot] = deque()
        self._log: List[Union[DecodeEvent, int]] = []
        self._emissions: List[Tuple[int, int]] = []
        self._n_slots = 0
        self._frames = 0
        self._consumed = 0
        self._last_token: Optional[int] = None
        self._finalized = False

    @property
    def consumed_inputs(self) -> int:
        return self._consumed

    @property
    def stream_length(self) -> int:
        return self._root.n_stream

    @property
    def events(self) -> List[DecodeEvent]:
        """События на текущий момент (токены текста по лучшей гипотезе)"""
        best = self._hyps[0]
        events: List[DecodeEvent] = []
        for item in self._log:
            if isinstance(item, DecodeEvent):
                events.append(item)
                continue
            stream_index, consumed = self._emissions[item]
            events.append(DecodeEvent(
                kind=DecodeEventKind.TEXT_EMITTED,
                stream_index=stream_index,
                consumed_inputs=consumed,
                token=best.tokens[item],
            ))
        return events

    def feed(self, token: int) -> List[DecodeEvent]:
        """
        Подача одного исходного речевого токена

        При включенной дедупликации повтор предыдущего токена только учитывается
        в consumed_inputs.

        Returns:
            List[DecodeEvent]: Все события на текущий момент

        Raises:
            DecoderStateError: Декодер уже завершен
            VocabError: Токен не речевой
        """
        self._check_open()
        token = int(token)
        if not self.vocab.is_speech(token):
            raise VocabError(f"на вход декодера подан не речевой токен {token}")
        self._consumed += 1
        if self.config.dedup and token == self._last_token:
            return self.events
        self._last_token = token
        self._push(token)
        return self.events

    def consume(self, token: int, consumed_inputs: int) -> None:
        """Подача уже дедуплицированного токена с явным числом прочитанных исходных"""
        self._check_open()
        if not self.vocab.is_speech(int(token)):
            raise VocabError(f"на вход декодера подан не речевой токен {token}")
        self._consumed = consumed_inputs
        self._last_token = int(token)
        self._push(int(token))

    def finalize(self, consumed_inputs: Optional[int] = None) -> DecodeResult:
        """
        Завершение потока: отложенные слоты видят весь поток

        Raises:
            DecoderStateError: Повторный вызов
        """
        self._check_open()
        if consumed_inputs is not None:
            self._consumed = consumed_inputs
        while self._pending:
            self._issue(self._pending.popleft(), self._root.n_stream - 1)
        self._finalized = True
        best = self._hyps[0]
        logger.debug(
            f"Декодирование завершено: {self._consumed} входов, {self._root.n_stream} в потоке, "
            f"{len(best.tokens)} символов"
        )
        return DecodeResult(text=list(best.tokens), events=self.events, score=best.score)

    def _check_open(self) -> None:
        if self._finalized:
            raise DecoderStateError("декодер уже завершен")

    def _push(self, token: int) -> None:
        logits = forward_step(self.params, self._root, token, self._root.n_stream, Modality.SPEECH_STREAM)
        self._frames += 1
        while self._pending and self._pending[0].due_frames <= self._frames:
            self._issue(self._pending.popleft(), self._root.n_stream - 1)
        if is_boundary_trigger(logits, self.vocab.boundary_id, self.config.boundary_threshold):
            self._trigger()

    def _trigger(self) -> None:
        index = self._root.n_stream
        forward_step(self.params, self._root, self.vocab.boundary_id, index, Modality.SPEECH_STREAM)
        self._log.append(DecodeEvent(
            kind=DecodeEventKind.BOUNDARY_TRIGGERED,
            stream_index=index,
            consumed_inputs=self._consumed,
        ))
        slot = _PendingSlot(self._n_slots, self._frames + self.config.delta)
        self._n_slots += 1
        if self.config.delta == 0:
            self._issue(slot, index)
        else:
            self._pending.append(slot)

    def _issue(self, slot: _PendingSlot, visible: int) -> None:
        """Запрос текстового слота: расширение гипотез по top-beam текстовым токенам"""
        text_ids = self.vocab.text_ids()
        beam = self.config.beam
        candidates = []
        for order, hyp in enumerate(self._hyps):
            previous = hyp.tokens[-1] if hyp.tokens else self.vocab.sos_text_id
            logits = forward_step(self.params, hyp.cache, previous, visible + 1, Modality.TEXT_SLOT, visible)
            text_logp = log_softmax(logits[text_ids.start:text_ids.stop].astype(np.float64))
            top = np.argsort(-text_logp, kind="stable")[:beam]
            for rank in top:
                candidates.append((hyp.score + float(text_logp[rank]), order, int(rank), hyp))

        candidates.sort(key=lambda item: (-item[0], item[1], item[2]))
        self._hyps = [
            _Hypothesis(hyp.tokens + [text_ids.start + rank], score, hyp.cache.fork_text())
            for score, _, rank, hyp in candidates[:beam]
        ]
        self._emissions.append((visible, self._consumed))
        self._log.append(slot.slot)


def decode_bti(params: ModelParams, speech: Sequence[int], config: DecodeConfig) -> DecodeResult:
    """
    Декодирование всего высказывания

    При dedup вход сначала сворачивается global_dedup, а задержки считаются в
    исходных кадрах через remap.

    Args:
        params: Параметры модели
        speech: Речевые токены
        config: Настройки декодирования

    Returns:
        DecodeResult: Текст и события
    """
    decoder = BtiDecoder(params, config)
    if config.dedup:
        tokens, remap = global_dedup(speech)
        originals = kept_positions(remap)
    else:
        tokens, originals = [int(token) for token in speech], list(range(len(speech)))
    for token, original in zip(tokens, originals):
        decoder.consume(token, original + 1)
    return decoder.finalize(consumed_inputs=len(speech))
