"""
Аугментации высказываний и входных последовательностей

Все функции чистые: случайность приходит только через явный numpy Generator.
Серии одинаковых кадров считаются внутри сегмента, поэтому каждая граница после
перестройки указывает на сохраненный кадр своего сегмента.
"""
import math
from typing import List, Sequence, Tuple

import numpy as np

from src.core.tokens import VocabSpec
from src.corpus.utterance import Utterance


def segment_runs(utt: Utterance) -> List[Tuple[int, int]]:
    """Максимальные серии одинаковых кадров [start, end), не пересекающие границы сегментов"""
    runs = []
    for seg_start, seg_end in utt.segments():
        start = seg_start
        for frame in range(seg_start + 1, seg_end + 1):
            if frame == seg_end or utt.speech[frame] != utt.speech[start]:
                runs.append((start, frame))
                start = frame
    return runs


def _round_half_away(value: float) -> int:
    return int(math.floor(value + 0.5))


def speed_perturb(utt: Utterance, factor: float) -> Utterance:
    """
    Возмущение скорости в области токенов

    Серия длины r становится серией длины max(1, round(r / factor)),
    границы пересчитываются по новым длинам сегментов.

    Args:
        utt: Высказывание
        factor: Коэффициент скорости (> 0)

    Returns:
        Utterance: Растянутое или сжатое высказывание
    """
    if factor <= 0:
        raise ValueError(f"коэффициент скорости должен быть положительным: {factor}")
    if factor == 1.0:
        return utt

    speech: List[int] = []
    boundaries: List[int] = []
    run_iter = iter(segment_runs(utt))
    for seg_start, seg_end in utt.segments():
        covered = seg_start
        while covered < seg_end:
            start, end = next(run_iter)
            length = max(1, _round_half_away((end - start) / factor))
            speech.extend([utt.speech[start]] * length)
            covered = end
        boundaries.append(len(speech) - 1)

    return utt.model_copy(update={"speech": tuple(speech), "boundaries": tuple(boundaries)})


def shift_boundaries(boundaries: Sequence[int], n_frames: int, deltas: Sequence[int]) -> Tuple[int, ...]:
    """
    Сдвиг границ с ограничением

    Граница i сдвигается на deltas[i] и зажимается между предыдущей новой границей + 1
    и следующей исходной границей - 1. Последняя граница всегда остается T - 1.
    """
    shifted: List[int] = []
    last = len(boundaries) - 1
    for i, boundary in enumerate(boundaries):
        if i == last:
            shifted.append(n_frames - 1)
            continue
        lower = shifted[-1] + 1 if shifted else 0
        upper = boundaries[i + 1] - 1
        shifted.append(min(max(boundary + deltas[i], lower), upper))
    return tuple(shifted)


def draw_trigger_shifts(rng: np.random.Generator, count: int, p: float, max_shift: int) -> List[int]:
    """Сдвиги для count границ: 0 с вероятностью 1 - p, иначе ±{1..max_shift}"""
    deltas = []
    for _ in range(count):
        if rng.random() < p:
            magnitude = int(rng.integers(1, max_shift + 1))
            deltas.append(magnitude if rng.random() < 0.5 else -magnitude)
        else:
            deltas.append(0)
    return deltas


def trigger_shift(utt: Utterance, rng: np.random.Generator, p: float, max_shift: int) -> Utterance:
    """
    Случайный сдвиг триггеров (границ)

    Args:
        utt: Высказывание
        rng: Генератор случайных чисел
        p: Вероятность сдвига каждой нефинальной границы
        max_shift: Максимальный сдвиг в кадрах

    Returns:
        Utterance: Высказывание со сдвинутыми границами, речь и текст не меняются
    """
    if p <= 0.0 or len(utt.boundaries) < 2:
        return utt
    deltas = draw_trigger_shifts(rng, len(utt.boundaries) - 1, p, max_shift) + [0]
    boundaries = shift_boundaries(utt.boundaries, utt.n_frames, deltas)
    return utt.model_copy(update={"boundaries": boundaries})


def time_mask(inputs: np.ndarray, vocab: VocabSpec, rng: np.random.Generator, p: float) -> np.ndarray:
    """
    Маскирование входных токенов

    Каждый вход, кроме BOUNDARY, заменяется на PAD с вероятностью p.
    Цели и маски внимания не затрагиваются.

    Args:
        inputs: Входные токены раскладки
        vocab: Раскладка словаря
        rng: Генератор случайных чисел
        p: Вероятность замены

    Returns:
        np.ndarray: Новый массив входов
    """
    inputs = np.asarray(inputs)
    if p <= 0.0:
        return inputs.copy()
    maskable = inputs != vocab.boundary_id
    hit = rng.random(inputs.shape[0]) < p
    return np.where(maskable & hit, vocab.pad_id, inputs)


def _remap_boundaries(boundaries: Sequence[int], keep: np.ndarray) -> Tuple[int, ...]:
    # new_index(t) = число сохраненных кадров с исходным индексом <= t, минус 1
    kept_prefix = np.cumsum(keep)
    return tuple(int(kept_prefix[t]) - 1 for t in boundaries)


def random_dedup(utt: Utterance, rng: np.random.Generator, p: float) -> Utterance:
    """
    Случайная дедупликация

    Каждая серия длины >= 2 с вероятностью p сворачивается в свой первый кадр.

    Args:
        utt: Высказывание
        rng: Генератор случайных чисел
        p: Вероятность свертки серии

    Returns:
        Utterance: Высказывание с пересчитанными границами
    """
    if p <= 0.0:
        return utt
    keep = np.ones(utt.n_frames, dtype=bool)
    for start, end in segment_runs(utt):
        if end - start >= 2 and rng.random() < p:
            keep[start + 1:end] = False
    if keep.all():
        return utt
    speech = tuple(token for token, kept in zip(utt.speech, keep) if kept)
    return utt.model_copy(update={
        "speech": speech,
        "boundaries": _remap_boundaries(utt.boundaries, keep),
    })


def global_dedup(speech: Sequence[int]) -> Tuple[List[int], List[int]]:
    """
    Глобальная дедупликация при декодировании

    Args:
        speech: Речевые токены

    Returns:
        Tuple[List[int], List[int]]: (токены без повторов, remap), где remap[i] -
        новый индекс исходного кадра i
    """
    tokens: List[int] = []
    remap: List[int] = []
    for token in speech:
        if not tokens or tokens[-1] != token:
            tokens.append(int(token))
        remap.append(len(tokens) - 1)
    return tokens, remap


def kept_positions(remap: Sequence[int]) -> List[int]:
    """Исходный индекс первого кадра для каждого нового индекса"""
    positions: List[int] = []
    for original, new in enumerate(remap):
        if new == len(positions):
            positions.append(original)
    return positions
