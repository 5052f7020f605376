"""
Функция потерь: KL со сглаженными метками на речевых позициях, CE на границах и тексте
"""
from dataclasses import dataclass
from typing import Dict

import numpy as np

from src.config.settings import LossWeights
from src.core.exceptions import LossError
from src.core.tokens import VocabSpec
from src.layout.sequences import LayoutSequence, LossKind


@dataclass(frozen=True)
class SmoothingSpec:
    """Сглаживание: масса epsilon распределяется по носителю [support_start, support_stop)"""
    epsilon: float
    support_start: int
    support_stop: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon < 1.0:
            raise LossError(f"epsilon вне [0, 1): {self.epsilon}")
        if self.support_size < 2:
            raise LossError("носитель сглаживания должен содержать не менее 2 элементов")

    @property
    def support_size(self) -> int:
        return self.support_stop - self.support_start

    @classmethod
    def for_speech(cls, vocab: VocabSpec, epsilon: float) -> "SmoothingSpec":
        return cls(epsilon, 0, vocab.n_speech)


@dataclass
class LossResult:
    """Итог: взвешенная сумма, средние по типам и градиент по логитам"""
    total: float
    breakdown: Dict[str, float]
    counts: Dict[str, int]
    grad: np.ndarray


def smoothed_target(target: int, spec: SmoothingSpec, total_vocab: int) -> np.ndarray:
    """
    Сглаженное целевое распределение

    1 - epsilon на цели, epsilon / (|support| - 1) на остальных элементах носителя.

    Raises:
        LossError: Цель вне носителя
    """
    if not spec.support_start <= target < spec.support_stop:
        raise LossError(f"цель {target} вне носителя [{spec.support_start}, {spec.support_stop})")
    dist = np.zeros(total_vocab, dtype=np.float64)
    dist[spec.support_start:spec.support_stop] = spec.epsilon / (spec.support_size - 1)
    dist[target] = 1.0 - spec.epsilon
    return dist


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def sequence_loss(
    logits: np.ndarray,
    layout: LayoutSequence,
    spec: SmoothingSpec,
    weights: LossWeights
) -> LossResult:
    """
    Потери по раскладке

    loss = λ_speech·mean(KL) + λ_boundary·mean(CE) + λ_text·mean(CE);
    позиции без цели не участвуют.

    Args:
        logits: Логиты (n, total_vocab)
        layout: Раскладка
        spec: Сглаживание речевых целей
        weights: Веса слагаемых

    Returns:
        LossResult: Потери, разбивка и градиент по логитам

    Raises:
        LossError: Раскладка без позиций с потерями или несовпадение форм
    """
    n, vocab_size = logits.shape
    if n != len(layout):
        raise LossError(f"логиты ({n}) не совпадают с раскладкой ({len(layout)})")
    if not np.any(layout.loss_kind != LossKind.NONE):
        raise LossError(f"раскладка '{layout.utt_id}' не содержит позиций с потерями")

    log_p = log_softmax(logits.astype(np.float64))
    probs = np.exp(log_p)
    grad = np.zeros((n, vocab_size), dtype=np.float64)
    breakdown = {"speech": 0.0, "boundary": 0.0, "text": 0.0}
    counts = {"speech": 0, "boundary": 0, "text": 0}

    speech_rows = np.flatnonzero(layout.loss_kind == LossKind.SPEECH_CE)
    if speech_rows.size:
        q = np.zeros((speech_rows.size, vocab_size), dtype=np.float64)
        q[:, spec.support_start:spec.support_stop] = spec.epsilon / (spec.support_size - 1)
        targets = layout.targets[speech_rows]
        if np.any((targets < spec.support_start) | (targets >= spec.support_stop)):
            raise LossError("речевая цель вне носителя сглаживания")
        q[np.arange(speech_rows.size), targets] = 1.0 - spec.epsilon
        q_log_q = np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0)), 0.0)
        kl = (q_log_q - q * log_p[speech_rows]).sum(axis=-1)
        breakdown["speech"] = float(kl.mean())
        counts["speech"] = int(speech_rows.size)
        grad[speech_rows] += weights.speech * (probs[speech_rows] - q) / speech_rows.size

    for name, kind, weight in (
        ("boundary", LossKind.BOUNDARY_CE, weights.boundary),
        ("text", LossKind.TEXT_CE, weights.text),
    ):
        rows = np.flatnonzero(layout.loss_kind == kind)
        if not rows.size:
            continue
        targets = layout.targets[rows]
        breakdown[name] = float(-log_p[rows, targets].mean())
        counts[name] = int(rows.size)
        one_hot = np.zeros((rows.size, vocab_size), dtype=np.float64)
        one_hot[np.arange(rows.size), targets] = 1.0
        grad[rows] += weight * (probs[rows] - one_hot) / rows.size

    total = (
        weights.speech * breakdown["speech"]
        + weights.boundary * breakdown["boundary"]
        + weights.text * breakdown["text"]
    )
    return LossResult(total=float(total), breakdown=breakdown, counts=counts, grad=grad)
