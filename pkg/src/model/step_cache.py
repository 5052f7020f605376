"""
Пошаговый вывод с кэшем ключей и значений, разделенным на речевой и текстовый потоки
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.exceptions import CacheError
from src.layout.sequences import Modality
from src.model.params import ModelParams
from src.model.transformer import embed, gelu, layer_norm, masked_softmax


class StreamCache:
    """Ключи и значения одного потока по всем слоям"""

    def __init__(self, n_layers: int, n_heads: int, d_head: int, dtype: np.dtype, capacity: int = 64):
        self.n_layers = n_layers
        self.length = 0
        self.last_position = -1
        self.keys = [np.zeros((n_heads, capacity, d_head), dtype=dtype) for _ in range(n_layers)]
        self.values = [np.zeros((n_heads, capacity, d_head), dtype=dtype) for _ in range(n_layers)]

    @property
    def capacity(self) -> int:
        return self.keys[0].shape[1]

    def _grow(self) -> None:
        for store in (self.keys, self.values):
            for layer, array in enumerate(store):
                grown = np.zeros((array.shape[0], array.shape[1] * 2, array.shape[2]), dtype=array.dtype)
                grown[:, :self.length] = array[:, :self.length]
                store[layer] = grown

    def write(self, layer: int, key: np.ndarray, value: np.ndarray) -> None:
        """Запись ключа/значения текущего шага в слой (до commit)"""
        if self.length >= self.capacity:
            self._grow()
        self.keys[layer][:, self.length] = key
        self.values[layer][:, self.length] = value

    def commit(self, position: int) -> None:
        self.length += 1
        self.last_position = position

    def fork(self) -> "StreamCache":
        """Независимая копия (для гипотез лучевого поиска)"""
        clone = StreamCache.__new__(StreamCache)
        clone.n_layers = self.n_layers
        clone.length = self.length
        clone.last_position = self.last_position
        capacity = max(self.length + 4, 4)
        clone.keys = [array[:, :capacity].copy() for array in self.keys]
        clone.values = [array[:, :capacity].copy() for array in self.values]
        return clone


@dataclass
class StepCache:
    """
    Кэш пошагового вывода

    Речевой поток и текстовые слоты хранятся раздельно и никогда не перемешиваются.
    Речевой кэш может разделяться несколькими гипотезами, текстовый принадлежит одной.
    """
    speech: StreamCache
    text: StreamCache

    @classmethod
    def empty(cls, params: ModelParams) -> "StepCache":
        config = params.config
        return cls(
            speech=StreamCache(config.n_layers, config.n_heads, config.d_head, config.dtype, capacity=128),
            text=StreamCache(config.n_layers, config.n_heads, config.d_head, config.dtype, capacity=16),
        )

    @property
    def n_stream(self) -> int:
        return self.speech.length

    @property
    def n_text(self) -> int:
        return self.text.length

    def fork_text(self) -> "StepCache":
        """Новая гипотеза: общий речевой кэш, собственная копия текстового"""
        return StepCache(speech=self.speech, text=self.text.fork())


def forward_step(
    params: ModelParams,
    cache: StepCache,
    token: int,
    position: int,
    modality: Modality,
    speech_visible: Optional[int] = None
) -> np.ndarray:
    """
    Один шаг вывода

    Шаг речевого потока смотрит на весь речевой кэш (включая себя) и не читает текстовый.
    Шаг текстового слота смотрит на элементы потока с индексами 0..speech_visible и на
    предыдущие слоты.

    Args:
        params: Параметры модели
        cache: Кэш (дополняется на месте)
        token: Входной токен
        position: Позиционный индекс
        modality: Поток
        speech_visible: Последний видимый индекс потока (только для текстовых слотов)

    Returns:
        np.ndarray: Логиты следующего токена (total_vocab,)

    Raises:
        CacheError: Регрессия позиции в потоке или speech_visible вне кэша
    """
    config = params.config
    is_text = modality == Modality.TEXT_SLOT
    own = cache.text if is_text else cache.speech

    if position < own.last_position:
        raise CacheError(f"регрессия позиции: {position} < {own.last_position}")
    if position >= config.max_positions:
        raise CacheError(f"позиция {position} вне max_positions={config.max_positions}")
    if is_text:
        if speech_visible is None or not 0 <= speech_visible < cache.n_stream:
            raise CacheError(
                f"speech_visible={speech_visible} вне речевого кэша длины {cache.n_stream}"
            )

    scale = float(1.0 / np.sqrt(config.d_head))
    heads, d_head = config.n_heads, config.d_head
    x = embed(params, np.asarray([token]), np.asarray([position]), np.asarray([int(modality)]))

    for index in range(config.n_layers):
        p = f"layers.{index}."
        h1, _, _ = layer_norm(x, params[p + "ln1_g"], params[p + "ln1_b"])
        q = (h1 @ params[p + "wq"] + params[p + "bq"]).reshape(heads, 1, d_head)
        k = (h1 @ params[p + "wk"] + params[p + "bk"]).reshape(heads, d_head)
        v = (h1 @ params[p + "wv"] + params[p + "bv"]).reshape(heads, d_head)
        own.write(index, k, v)

        if is_text:
            keys = np.concatenate([cache.speech.keys[index][:, :speech_visible + 1],
                                   cache.text.keys[index][:, :cache.text.length + 1]], axis=1)
            values = np.concatenate([cache.speech.values[index][:, :speech_visible + 1],
                                     cache.text.values[index][:, :cache.text.length + 1]], axis=1)
        else:
            keys = cache.speech.keys[index][:, :cache.speech.length + 1]
            values = cache.speech.values[index][:, :cache.speech.length + 1]

        scores = (q @ keys.transpose(0, 2, 1)) * scale
        weights = masked_softmax(scores, np.ones(scores.shape, dtype=bool))
        ctx = (weights @ values).transpose(1, 0, 2).reshape(1, heads * d_head)
        x = x + ctx @ params[p + "wo"] + params[p + "bo"]

        h2, _, _ = layer_norm(x, params[p + "ln2_g"], params[p + "ln2_b"])
        g, _ = gelu(h2 @ params[p + "w1"] + params[p + "b1"])
        x = x + g @ params[p + "w2"] + params[p + "b2"]

    own.commit(position)
    hf, _, _ = layer_norm(x, params["lnf_g"], params["lnf_b"])
    return (hf @ params["w_out"] + params["b_out"])[0]
