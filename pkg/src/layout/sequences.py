"""
Построение обучающих последовательностей TTI, BTI и непотоковой раскладки

Порядок позиций в раскладке BTI: сначала речевой поток (T речевых токенов и L границ),
затем L текстовых слотов. Позиционный индекс слота задается отдельно.
"""
import enum
from dataclasses import dataclass
from typing import List, Literal, Optional

import numpy as np

from src.config.settings import DeltaPolicySettings
from src.core.exceptions import LayoutError
from src.core.tokens import VocabSpec
from src.corpus.utterance import Utterance

# Цель отсутствует
NO_TARGET = -1

TextPositionMode = Literal["stream_point", "trailing"]


class LayoutKind(enum.Enum):
    """Тип раскладки"""
    BTI = "bti"
    TTI = "tti"
    NONSTREAMING = "nonstreaming"


class Modality(enum.IntEnum):
    """Поток, к которому относится позиция"""
    SPEECH_STREAM = 0
    TEXT_SLOT = 1


class LossKind(enum.IntEnum):
    """Тип потерь в позиции"""
    NONE = 0
    SPEECH_CE = 1
    BOUNDARY_CE = 2
    TEXT_CE = 3


@dataclass(frozen=True)
class DeltaPolicy:
    """Правый контекст: dynamic - длина следующего сегмента, fixed - n кадров"""
    mode: Literal["dynamic", "fixed"] = "dynamic"
    n: int = 0

    def __post_init__(self) -> None:
        if self.n < 0:
            raise LayoutError(f"фиксированный Δ должен быть неотрицательным: {self.n}")

    @classmethod
    def dynamic(cls) -> "DeltaPolicy":
        return cls("dynamic", 0)

    @classmethod
    def fixed(cls, n: int) -> "DeltaPolicy":
        return cls("fixed", n)

    @classmethod
    def from_settings(cls, settings: DeltaPolicySettings) -> "DeltaPolicy":
        return cls(settings.mode, settings.n)

    def deltas(self, utt: Utterance) -> List[int]:
        if self.mode == "fixed":
            return [self.n] * utt.n_text
        lengths = utt.segment_lengths()
        return lengths[1:] + [0]


@dataclass(frozen=True)
class LayoutSequence:
    """
    Обучающая последовательность

    text_bounds[k] - наибольший индекс речевого потока, видимый слоту k (r_k);
    trigger_index[k] - индекс границы слота k в потоке (t'_k).
    """
    kind: LayoutKind
    utt_id: str
    inputs: np.ndarray
    positions: np.ndarray
    modality: np.ndarray
    targets: np.ndarray
    loss_kind: np.ndarray
    text_bounds: np.ndarray
    trigger_index: np.ndarray
    stream_len: int

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def n_slots(self) -> int:
        return int(self.text_bounds.shape[0]) if self.kind != LayoutKind.TTI else 0

    def slot_position(self, k: int) -> int:
        """Номер позиции в раскладке для текстового слота k"""
        return self.stream_len + k

    def with_inputs(self, inputs: np.ndarray) -> "LayoutSequence":
        if inputs.shape != self.inputs.shape:
            raise LayoutError("новые входы должны совпадать по длине")
        return LayoutSequence(
            kind=self.kind,
            utt_id=self.utt_id,
            inputs=inputs,
            positions=self.positions,
            modality=self.modality,
            targets=self.targets,
            loss_kind=self.loss_kind,
            text_bounds=self.text_bounds,
            trigger_index=self.trigger_index,
            stream_len=self.stream_len,
        )


def boundary_path(utt: Utterance) -> np.ndarray:
    """
    Путь границ в потоке BTI

    Граница i стоит сразу после последнего кадра своего сегмента со сдвигом на
    уже вставленные границы: t'_i = t_{y_i} + i.

    Returns:
        np.ndarray: Булев вектор длины T + L с ровно L истинными элементами
    """
    path = np.zeros(utt.n_frames + utt.n_text, dtype=bool)
    for i, boundary in enumerate(utt.boundaries):
        path[boundary + i + 1] = True
    return path


def frame_stream_index(utt: Utterance) -> np.ndarray:
    """Индекс каждого речевого кадра в потоке BTI"""
    inserted_before = np.searchsorted(np.asarray(utt.boundaries), np.arange(utt.n_frames), side="left")
    return np.arange(utt.n_frames) + inserted_before


def visible_bounds(utt: Utterance, deltas: List[int]) -> np.ndarray:
    """
    Границы видимости r_k

    Δ считается в речевых кадрах: r_k - индекс в потоке кадра t_{y_k} + Δ_k, но не
    меньше t'_k; если кадр выходит за конец высказывания, виден весь поток.
    """
    stream_len = utt.n_frames + utt.n_text
    frame_index = frame_stream_index(utt)
    bounds = []
    for k, (boundary, delta) in enumerate(zip(utt.boundaries, deltas)):
        trigger = boundary + k + 1
        frame = boundary + delta
        if frame > utt.n_frames - 1:
            bounds.append(stream_len - 1)
        else:
            bounds.append(max(trigger, int(frame_index[frame])))
    return np.asarray(bounds, dtype=np.int64)


def _slot_positions(bounds: np.ndarray, stream_len: int, mode: TextPositionMode) -> np.ndarray:
    if mode == "stream_point":
        return bounds + 1
    return stream_len + np.arange(bounds.shape[0], dtype=np.int64)


def build_bti_layout(
    utt: Utterance,
    vocab: VocabSpec,
    policy: Optional[DeltaPolicy] = None,
    text_position_mode: TextPositionMode = "stream_point"
) -> LayoutSequence:
    """
    Раскладка BTI: речевой поток с границами и отдельный поток текстовых слотов

    Args:
        utt: Высказывание
        vocab: Раскладка словаря
        policy: Политика Δ (по умолчанию dynamic)
        text_position_mode: stream_point - позиция слота r_k + 1, trailing - T + L + k

    Returns:
        LayoutSequence: Раскладка
    """
    policy = policy or DeltaPolicy.dynamic()
    n_text = utt.n_text
    stream_len = utt.n_frames + n_text

    path = boundary_path(utt)
    stream = np.empty(stream_len, dtype=np.int64)
    stream[path] = vocab.boundary_id
    stream[~path] = np.asarray(utt.speech, dtype=np.int64)

    stream_targets = np.full(stream_len, NO_TARGET, dtype=np.int64)
    stream_targets[:-1] = stream[1:]
    stream_loss = np.full(stream_len, LossKind.NONE, dtype=np.int8)
    stream_loss[:-1] = np.where(path[1:], LossKind.BOUNDARY_CE, LossKind.SPEECH_CE)

    trigger = np.flatnonzero(path).astype(np.int64)
    bounds = visible_bounds(utt, policy.deltas(utt))

    text = np.asarray(utt.text, dtype=np.int64)
    slot_inputs = np.concatenate([[vocab.sos_text_id], text[:-1]]).astype(np.int64)

    return LayoutSequence(
        kind=LayoutKind.BTI,
        utt_id=utt.id,
        inputs=np.concatenate([stream, slot_inputs]),
        positions=np.concatenate([np.arange(stream_len, dtype=np.int64),
                                  _slot_positions(bounds, stream_len, text_position_mode)]),
        modality=np.concatenate([np.full(stream_len, Modality.SPEECH_STREAM, dtype=np.int8),
                                 np.full(n_text, Modality.TEXT_SLOT, dtype=np.int8)]),
        targets=np.concatenate([stream_targets, text]),
        loss_kind=np.concatenate([stream_loss, np.full(n_text, LossKind.TEXT_CE, dtype=np.int8)]),
        text_bounds=bounds,
        trigger_index=trigger,
        stream_len=stream_len,
    )


def build_tti_layout(utt: Utterance, vocab: VocabSpec, delta: int = 0) -> LayoutSequence:
    """
    Раскладка TTI: символ y_i вставляется после кадра min(t_{y_i} + Δ, T - 1)

    Все позиции относятся к одному чередующемуся потоку. text_bounds[k] хранит
    позицию, из которой предсказывается y_k.
    """
    if delta < 0:
        raise LayoutError(f"Δ должен быть неотрицательным: {delta}")
    insert_after = [min(boundary + delta, utt.n_frames - 1) for boundary in utt.boundaries]

    tokens: List[int] = []
    query_positions: List[int] = []
    next_text = 0
    for frame, token in enumerate(utt.speech):
        tokens.append(token)
        while next_text < utt.n_text and insert_after[next_text] == frame:
            query_positions.append(len(tokens) - 1)
            tokens.append(utt.text[next_text])
            next_text += 1

    inputs = np.asarray(tokens, dtype=np.int64)
    n = inputs.shape[0]
    targets = np.full(n, NO_TARGET, dtype=np.int64)
    targets[:-1] = inputs[1:]
    is_text = (targets >= vocab.text_offset) & (targets < vocab.boundary_id)
    loss_kind = np.where(is_text, LossKind.TEXT_CE, LossKind.SPEECH_CE).astype(np.int8)
    loss_kind[-1] = LossKind.NONE

    query = np.asarray(query_positions, dtype=np.int64)
    return LayoutSequence(
        kind=LayoutKind.TTI,
        utt_id=utt.id,
        inputs=inputs,
        positions=np.arange(n, dtype=np.int64),
        modality=np.full(n, Modality.SPEECH_STREAM, dtype=np.int8),
        targets=targets,
        loss_kind=loss_kind,
        text_bounds=query,
        trigger_index=query,
        stream_len=n,
    )


def nonstreaming_prefix_layout(
    utt_id: str,
    speech: List[int],
    prefix: List[int],
    vocab: VocabSpec
) -> LayoutSequence:
    """
    Непотоковая раскладка для речи и уже известного префикса текста

    Слоты: SOS и токены префикса; цели не заполнены.
    """
    n_frames = len(speech)
    n_slots = len(prefix) + 1
    bounds = np.full(n_slots, n_frames - 1, dtype=np.int64)
    n = n_frames + n_slots
    return LayoutSequence(
        kind=LayoutKind.NONSTREAMING,
        utt_id=utt_id,
        inputs=np.concatenate([np.asarray(speech, dtype=np.int64), [vocab.sos_text_id],
                               np.asarray(prefix, dtype=np.int64)]).astype(np.int64),
        positions=np.arange(n, dtype=np.int64),
        modality=np.concatenate([np.full(n_frames, Modality.SPEECH_STREAM, dtype=np.int8),
                                 np.full(n_slots, Modality.TEXT_SLOT, dtype=np.int8)]),
        targets=np.full(n, NO_TARGET, dtype=np.int64),
        loss_kind=np.full(n, LossKind.NONE, dtype=np.int8),
        text_bounds=bounds,
        trigger_index=bounds,
        stream_len=n_frames,
    )


def build_nonstreaming_layout(utt: Utterance, vocab: VocabSpec) -> LayoutSequence:
    """
    Непотоковая раскладка: вся речь, затем L + 1 текстовых слотов

    Последний слот предсказывает BOUNDARY как признак конца текста. Потери речевого
    потока отключены: при глобальной маске следующий речевой токен виден напрямую.
    """
    base = nonstreaming_prefix_layout(utt.id, list(utt.speech), list(utt.text), vocab)
    n_frames = utt.n_frames
    n_slots = utt.n_text + 1
    text = np.asarray(utt.text, dtype=np.int64)
    return LayoutSequence(
        kind=base.kind,
        utt_id=base.utt_id,
        inputs=base.inputs,
        positions=base.positions,
        modality=base.modality,
        targets=np.concatenate([np.full(n_frames, NO_TARGET, dtype=np.int64), text, [vocab.boundary_id]]),
        loss_kind=np.concatenate([np.full(n_frames, LossKind.NONE, dtype=np.int8),
                                  np.full(n_slots, LossKind.TEXT_CE, dtype=np.int8)]),
        text_bounds=base.text_bounds,
        trigger_index=base.trigger_index,
        stream_len=n_frames,
    )
