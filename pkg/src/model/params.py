"""
Конфигурация и параметры модели
"""
from dataclasses import dataclass
from typing import Dict, Iterator, List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.config.settings import ModelSettings
from src.core.tokens import VocabSpec


class ModelConfig(BaseModel):
    """Конфигурация декодерного трансформера"""
    model_config = ConfigDict(frozen=True)

    vocab: VocabSpec
    n_layers: int = 2
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    max_positions: int = 512
    dropout_p: float = 0.1
    precision: Literal["float32", "float64"] = "float32"

    @model_validator(mode="after")
    def _check(self) -> "ModelConfig":
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} не делится на n_heads={self.n_heads}")
        if min(self.n_layers, self.d_model, self.d_ff, self.max_positions) < 1:
            raise ValueError("размеры модели должны быть положительными")
        return self

    @classmethod
    def from_settings(cls, settings: ModelSettings, vocab: VocabSpec) -> "ModelConfig":
        return cls(vocab=vocab, **settings.model_dump())

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.precision)


def param_shapes(config: ModelConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Имена и формы параметров в фиксированном порядке"""
    d, f, v = config.d_model, config.d_ff, config.vocab.total_vocab
    shapes: List[Tuple[str, Tuple[int, ...]]] = [
        ("tok_emb", (v, d)),
        ("pos_emb", (config.max_positions, d)),
        ("mod_emb", (2, d)),
    ]
    for layer in range(config.n_layers):
        p = f"layers.{layer}."
        shapes += [
            (p + "ln1_g", (d,)), (p + "ln1_b", (d,)),
            (p + "wq", (d, d)), (p + "bq", (d,)),
            (p + "wk", (d, d)), (p + "bk", (d,)),
            (p + "wv", (d, d)), (p + "bv", (d,)),
            (p + "wo", (d, d)), (p + "bo", (d,)),
            (p + "ln2_g", (d,)), (p + "ln2_b", (d,)),
            (p + "w1", (d, f)), (p + "b1", (f,)),
            (p + "w2", (f, d)), (p + "b2", (d,)),
        ]
    shapes += [("lnf_g", (d,)), ("lnf_b", (d,)), ("w_out", (d, v)), ("b_out", (v,))]
    return shapes


@dataclass
class ModelParams:
    """Параметры модели θ; после загрузки не изменяются, кроме как в цикле обучения"""
    config: ModelConfig
    tensors: Dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def layer(self, index: int, name: str) -> np.ndarray:
        return self.tensors[f"layers.{index}.{name}"]

    def zeros_like(self) -> Dict[str, np.ndarray]:
        return {name: np.zeros_like(value) for name, value in self.tensors.items()}

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {name: value.copy() for name, value in self.tensors.items()})

    def astype(self, precision: Literal["float32", "float64"]) -> "ModelParams":
        config = self.config.model_copy(update={"precision": precision})
        return ModelParams(config, {name: value.astype(precision) for name, value in self.tensors.items()})


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """
    Инициализация параметров

    Веса из нормального распределения с масштабом 1/sqrt(d_model),
    коэффициенты нормализации 1, смещения 0.

    Args:
        config: Конфигурация модели
        seed: Зерно

    Returns:
        ModelParams: Детерминированные параметры
    """
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(config.d_model)
    tensors: Dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config):
        short = name.rsplit(".", 1)[-1]
        if short.endswith("_g"):
            value = np.ones(shape)
        elif short.endswith("_b") or short.startswith("b"):
            value = np.zeros(shape)
        else:
            value = rng.normal(0.0, scale, size=shape)
        tensors[name] = value.astype(config.dtype)
    return ModelParams(config, tensors)
