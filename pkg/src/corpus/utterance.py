"""
Высказывание: речевые токены, текст и точное выравнивание
"""
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict

from src.core.exceptions import UtteranceInvariantError


class Utterance(BaseModel):
    """
    Высказывание с выравниванием

    boundaries[i] - индекс ПОСЛЕДНЕГО речевого кадра сегмента i,
    последний элемент всегда равен T - 1.
    """
    model_config = ConfigDict(frozen=True)

    id: str
    speech: Tuple[int, ...]
    text: Tuple[int, ...]
    boundaries: Tuple[int, ...]

    @property
    def n_frames(self) -> int:
        return len(self.speech)

    @property
    def n_text(self) -> int:
        return len(self.text)

    def segments(self) -> List[Tuple[int, int]]:
        """Полуинтервалы [start, end) кадров каждого сегмента"""
        result = []
        start = 0
        for end in self.boundaries:
            result.append((start, end + 1))
            start = end + 1
        return result

    def segment_lengths(self) -> List[int]:
        return [end - start for start, end in self.segments()]


def validate_utterance(utt: Utterance) -> Utterance:
    """
    Проверка инвариантов высказывания

    Args:
        utt: Высказывание

    Returns:
        Utterance: То же высказывание

    Raises:
        UtteranceInvariantError: Если инвариант нарушен
    """
    n_text = len(utt.text)
    n_frames = len(utt.speech)
    if n_text < 1:
        raise UtteranceInvariantError(utt.id, "пустой текст")
    if n_frames < n_text:
        raise UtteranceInvariantError(utt.id, f"речевых кадров ({n_frames}) меньше, чем символов ({n_text})")
    if len(utt.boundaries) != n_text:
        raise UtteranceInvariantError(
            utt.id, f"число границ ({len(utt.boundaries)}) не равно длине текста ({n_text})"
        )
    previous = -1
    for boundary in utt.boundaries:
        if boundary <= previous:
            raise UtteranceInvariantError(utt.id, f"границы не возрастают строго: {list(utt.boundaries)}")
        if boundary >= n_frames:
            raise UtteranceInvariantError(utt.id, f"граница {boundary} вне [0, {n_frames})")
        previous = boundary
    if utt.boundaries[-1] != n_frames - 1:
        raise UtteranceInvariantError(
            utt.id, f"последняя граница {utt.boundaries[-1]} не равна T-1={n_frames - 1}"
        )
    return utt
