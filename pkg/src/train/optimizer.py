"""
Adam с коррекцией смещения и ограничением глобальной нормы градиента
"""
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from src.utils.logger import get_logger

logger = get_logger("train.optimizer")


@dataclass(frozen=True)
class AdamHyper:
    """Гиперпараметры оптимизатора"""
    learning_rate: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 1.0  # <= 0 - без ограничения


@dataclass
class AdamState:
    """Первый и второй моменты и номер шага"""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


@dataclass(frozen=True)
class StepReport:
    """Результат шага оптимизатора"""
    applied: bool
    grad_norm: float
    scale: float


def global_norm(grads: Dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    hyper: AdamHyper,
    learning_rate: Optional[float] = None
) -> StepReport:
    """
    Шаг Adam (параметры и состояние обновляются на месте)

    Args:
        params: Тензоры параметров
        grads: Градиенты той же формы
        state: Состояние оптимизатора
        hyper: Гиперпараметры
        learning_rate: Шаг обучения для текущего шага (по умолчанию из hyper)

    Returns:
        StepReport: Применен ли шаг, норма градиента и коэффициент ограничения
    """
    norm = global_norm(grads)
    if not np.isfinite(norm):
        logger.warning(f"Шаг {state.step + 1} пропущен: нечисловой градиент")
        return StepReport(applied=False, grad_norm=norm, scale=0.0)

    scale = 1.0
    if hyper.clip_norm > 0 and norm > hyper.clip_norm:
        scale = hyper.clip_norm / norm

    lr = hyper.learning_rate if learning_rate is None else learning_rate
    state.step += 1
    bias1 = 1.0 - hyper.beta1 ** state.step
    bias2 = 1.0 - hyper.beta2 ** state.step
    for name, value in params.items():
        grad = grads[name].astype(np.float64) * scale
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros(value.shape, dtype=np.float64)
            v = np.zeros(value.shape, dtype=np.float64)
        m = hyper.beta1 * m + (1.0 - hyper.beta1) * grad
        v = hyper.beta2 * v + (1.0 - hyper.beta2) * grad * grad
        state.m[name], state.v[name] = m, v
        update = lr * (m / bias1) / (np.sqrt(v / bias2) + hyper.eps)
        value -= update.astype(value.dtype)
    return StepReport(applied=True, grad_norm=norm, scale=scale)


def warmup_lr(step: int, base_lr: float, warmup_steps: int) -> float:
    """Линейный прогрев, затем постоянный шаг"""
    if warmup_steps <= 0:
        return base_lr
    return base_lr * min(1.0, (step + 1) / warmup_steps)
