"""
Маски внимания: глобальная, причинная и с правым контекстом
"""
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from src.core.exceptions import MaskVariantError
from src.layout.sequences import LayoutKind, LayoutSequence


class MaskVariant(enum.Enum):
    """Вариант маски"""
    GLOBAL = "global"
    CAUSAL = "causal"
    RIGHT_CHUNK = "right_chunk"


@dataclass(frozen=True)
class AttentionMask:
    """bits[i, j] истинно, если запрос i может смотреть на ключ j"""
    bits: np.ndarray

    @property
    def n(self) -> int:
        return int(self.bits.shape[0])


def build_mask(layout: LayoutSequence, variant: MaskVariant) -> AttentionMask:
    """
    Построение маски внимания для раскладки

    Строки речевого потока видят только речевой поток: свое прошлое (causal,
    right_chunk) или весь поток (global). Строка слота k видит поток до t'_k (causal),
    до r_k (right_chunk) или целиком (global), а также слоты 0..k.

    Args:
        layout: Раскладка
        variant: Вариант маски

    Returns:
        AttentionMask: Квадратная булева матрица

    Raises:
        MaskVariantError: right_chunk для раскладки TTI
    """
    n = len(layout)
    if layout.kind == LayoutKind.TTI:
        if variant == MaskVariant.RIGHT_CHUNK:
            raise MaskVariantError("для TTI правый контекст задается задержкой вставки, а не маской")
        if variant == MaskVariant.GLOBAL:
            return AttentionMask(np.ones((n, n), dtype=bool))
        return AttentionMask(np.tril(np.ones((n, n), dtype=bool)))

    stream_len = layout.stream_len
    n_slots = n - stream_len
    bits = np.zeros((n, n), dtype=bool)

    if variant == MaskVariant.GLOBAL:
        bits[:stream_len, :stream_len] = True
    else:
        bits[:stream_len, :stream_len] = np.tril(np.ones((stream_len, stream_len), dtype=bool))

    if n_slots:
        if variant == MaskVariant.GLOBAL:
            extent = np.full(n_slots, stream_len - 1)
        elif variant == MaskVariant.CAUSAL:
            extent = layout.trigger_index
        else:
            extent = layout.text_bounds
        columns = np.arange(stream_len)
        bits[stream_len:, :stream_len] = columns[None, :] <= extent[:, None]
        bits[stream_len:, stream_len:] = np.tril(np.ones((n_slots, n_slots), dtype=bool))

    return AttentionMask(bits)


def write_pbm(mask: AttentionMask, path: Union[str, Path]) -> None:
    """Запись маски в формате plain PBM (P1): 1 - черный пиксель (видимо)"""
    lines = ["P1", f"{mask.n} {mask.n}"]
    lines.extend(" ".join("1" if bit else "0" for bit in row) for row in mask.bits)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def write_csv(mask: AttentionMask, path: Union[str, Path]) -> None:
    """Запись маски как CSV из 0/1"""
    rows = (",".join("1" if bit else "0" for bit in row) for row in mask.bits)
    Path(path).write_text("\n".join(rows) + "\n", encoding="ascii")
