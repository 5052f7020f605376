"""
Метрики: CER, задержка выдачи, точность и полнота срабатывания границ
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.core.exceptions import MetricError
from src.corpus.utterance import Utterance
from src.decoding.events import DecodeEvent, DecodeEventKind


def edit_distance(reference: Sequence[int], hypothesis: Sequence[int]) -> int:
    """Расстояние Левенштейна с единичными ценами"""
    ref = list(reference)
    hyp = np.asarray(list(hypothesis))
    previous = np.arange(len(hyp) + 1)
    for i, token in enumerate(ref, start=1):
        current = np.empty_like(previous)
        current[0] = i
        substitution = previous[:-1] + (hyp != token)
        deletion = previous[1:] + 1
        best = np.minimum(substitution, deletion)
        for j in range(1, len(hyp) + 1):
            current[j] = min(best[j - 1], current[j - 1] + 1)
        previous = current
    return int(previous[-1])


def cer(reference: Sequence[int], hypothesis: Sequence[int]) -> float:
    """
    Доля ошибок по символам

    Raises:
        MetricError: Пустая эталонная строка
    """
    if len(reference) == 0:
        raise MetricError("CER не определен для пустой эталонной строки")
    return edit_distance(reference, hypothesis) / len(reference)


@dataclass(frozen=True)
class LatencyStats:
    """Задержки выдачи в кадрах (сопоставление по порядку выдачи)"""
    delays: List[int]
    interior: List[int]
    unmatched: int

    @property
    def mean(self) -> Optional[float]:
        return float(np.mean(self.delays)) if self.delays else None

    @property
    def p50(self) -> Optional[float]:
        return float(np.percentile(self.delays, 50)) if self.delays else None

    @property
    def p90(self) -> Optional[float]:
        return float(np.percentile(self.delays, 90)) if self.delays else None

    @property
    def interior_mean(self) -> Optional[float]:
        """Средняя задержка без последнего символа высказывания"""
        return float(np.mean(self.interior)) if self.interior else None


def latency_stats(events: Sequence[DecodeEvent], utt: Utterance) -> LatencyStats:
    """
    Задержка i-го выданного символа: consumed_inputs - (t_{y_i} + 1)

    Символы и эталон сопоставляются по порядку; разница в количестве
    возвращается как unmatched.
    """
    emitted = [event for event in events if event.kind == DecodeEventKind.TEXT_EMITTED]
    matched = min(len(emitted), utt.n_text)
    delays = [emitted[i].consumed_inputs - (utt.boundaries[i] + 1) for i in range(matched)]
    interior = delays[:min(matched, utt.n_text - 1)]
    return LatencyStats(delays=delays, interior=interior, unmatched=abs(len(emitted) - utt.n_text))


@dataclass(frozen=True)
class BoundaryCounts:
    """Счетчики сопоставления границ"""
    matched: int
    predicted: int
    reference: int

    def __add__(self, other: "BoundaryCounts") -> "BoundaryCounts":
        return BoundaryCounts(
            self.matched + other.matched,
            self.predicted + other.predicted,
            self.reference + other.reference,
        )

    @property
    def precision(self) -> float:
        return self.matched / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.matched / self.reference if self.reference else 0.0


def boundary_counts(events: Sequence[DecodeEvent], utt: Utterance, tolerance: int = 2) -> BoundaryCounts:
    """
    Взаимно-однозначное сопоставление сработавших границ с концами сегментов

    Кадр срабатывания - consumed_inputs - 1 (исходные кадры). Пары подбираются
    жадно слева направо; граница засчитывается, если |разница| <= tolerance.
    """
    predicted = [event.consumed_inputs - 1 for event in events
                 if event.kind == DecodeEventKind.BOUNDARY_TRIGGERED]
    reference = list(utt.boundaries)
    used = [False] * len(reference)
    matched = 0
    for frame in predicted:
        best = None
        for j, target in enumerate(reference):
            if used[j] or abs(frame - target) > tolerance:
                continue
            if best is None or abs(frame - target) < abs(frame - reference[best]):
                best = j
        if best is not None:
            used[best] = True
            matched += 1
    return BoundaryCounts(matched, len(predicted), len(reference))
