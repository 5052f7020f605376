from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict
from typing import Dict, List, Optional, Literal, Tuple, Type

from src.core.tokens import VocabSpec, build_vocab


class SettingsSection(BaseModel):
    """Секция конфигурации: неизвестные ключи запрещены"""
    model_config = ConfigDict(extra="forbid")


class LoggingSettings(SettingsSection):
    """Настройки логирования"""
    level: str = "INFO"
    file: str = "logs/streamasr.log"  # Относительно каталога запуска
    max_bytes: int = 10485760  # 10MB
    backup_count: int = 5


class VocabSettings(SettingsSection):
    """Размеры словаря"""
    n_speech: int = 64  # Число речевых кластеров
    n_text: int = 20    # Число символов текста

    def to_spec(self) -> VocabSpec:
        return build_vocab(self.n_speech, self.n_text)


class CorpusSettings(SettingsSection):
    """Настройки синтетического корпуса"""
    n_train: int = 2000
    n_test: int = 200
    len_range: Tuple[int, int] = (3, 12)
    seed: int = 7
    p_sub: float = 0.05

    @field_validator("n_train", "n_test")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("количество высказываний должно быть положительным")
        return value

    @field_validator("len_range")
    @classmethod
    def _check_len_range(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        low, high = value
        if not 1 <= low <= high <= 64:
            raise ValueError(f"len_range должен лежать в [1, 64]: {value}")
        return value

    @field_validator("p_sub")
    @classmethod
    def _check_p_sub(cls, value: float) -> float:
        if not 0.0 <= value < 0.5:
            raise ValueError(f"p_sub должен лежать в [0, 0.5): {value}")
        return value


class AugmentConfig(SettingsSection):
    """Настройки аугментации"""
    speed_factors: List[float] = Field(default_factory=lambda: [0.9, 1.0, 1.1])
    trigger_shift_p: float = 0.3
    trigger_shift_max: int = 4
    time_mask_p: float = 0.3
    dedup_p: float = 0.5

    @field_validator("speed_factors")
    @classmethod
    def _check_factors(cls, value: List[float]) -> List[float]:
        if not value or any(factor <= 0 for factor in value):
            raise ValueError("коэффициенты скорости должны быть положительными")
        return value

    @field_validator("trigger_shift_p", "time_mask_p", "dedup_p")
    @classmethod
    def _check_probability(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"вероятность вне [0, 1]: {value}")
        return value

    @field_validator("trigger_shift_max")
    @classmethod
    def _check_shift(cls, value: int) -> int:
        if value < 1:
            raise ValueError("trigger_shift_max должен быть не меньше 1")
        return value


class DeltaPolicySettings(SettingsSection):
    """Политика правого контекста: dynamic (длина следующего сегмента) или fixed"""
    mode: Literal["dynamic", "fixed"] = "dynamic"
    n: int = 0

    @field_validator("n")
    @classmethod
    def _check_n(cls, value: int) -> int:
        if value < 0:
            raise ValueError("фиксированный Δ должен быть неотрицательным")
        return value


class ModelSettings(SettingsSection):
    """Гиперпараметры модели"""
    n_layers: int = 2
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    max_positions: int = 512
    dropout_p: float = 0.1
    precision: Literal["float32", "float64"] = "float32"

    @model_validator(mode="after")
    def _check_heads(self) -> "ModelSettings":
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} не делится на n_heads={self.n_heads}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p вне [0, 1): {self.dropout_p}")
        return self


class SmoothingSettings(SettingsSection):
    """Сглаживание меток для речевых целей"""
    epsilon: float = 0.1

    @field_validator("epsilon")
    @classmethod
    def _check_epsilon(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"epsilon вне [0, 1): {value}")
        return value


class LossWeights(SettingsSection):
    """Веса слагаемых функции потерь"""
    speech: float = 1.0
    boundary: float = 1.0
    text: float = 1.0

    @model_validator(mode="after")
    def _non_negative(self) -> "LossWeights":
        if min(self.speech, self.boundary, self.text) < 0:
            raise ValueError("веса потерь должны быть неотрицательными")
        return self


class TrainConfig(SettingsSection):
    """Настройки обучения"""
    epochs: int = 10
    batch_size: int = 16
    learning_rate: float = 3e-3
    warmup_steps: int = 200
    clip_norm: float = 1.0
    loss_weights: LossWeights = Field(default_factory=LossWeights)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    delta_policy: DeltaPolicySettings = Field(default_factory=DeltaPolicySettings)
    smoothing: SmoothingSettings = Field(default_factory=SmoothingSettings)
    layout: Literal["tti", "bti", "nonstreaming"] = "bti"
    mask_variant: Literal["right_chunk", "causal"] = "right_chunk"
    text_position_mode: Literal["stream_point", "trailing"] = "stream_point"
    tti_delta: int = 0
    dev_size: Optional[int] = None  # None - весь тестовый набор
    seed: int = 0

    @field_validator("epochs", "batch_size")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("значение должно быть положительным")
        return value

    @field_validator("warmup_steps", "tti_delta")
    @classmethod
    def _non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("значение должно быть неотрицательным")
        return value


class DecodeConfig(SettingsSection):
    """Настройки декодирования"""
    mode: Literal["bti", "tti", "nonstreaming"] = "bti"
    delta: int = 0
    beam: int = 1  # 1 - жадный поиск
    dedup: bool = True
    max_consecutive_text: int = 8
    boundary_threshold: Optional[float] = None  # None - правило argmax
    max_text_tokens: int = 64

    @field_validator("beam", "max_consecutive_text", "max_text_tokens")
    @classmethod
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("значение должно быть не меньше 1")
        return value

    @field_validator("delta")
    @classmethod
    def _check_delta(cls, value: int) -> int:
        if value < 0:
            raise ValueError("Δ должен быть неотрицательным")
        return value

    @field_validator("boundary_threshold")
    @classmethod
    def _check_threshold(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0.0 < value <= 1.0:
            raise ValueError(f"порог границы вне (0, 1]: {value}")
        return value


class EvalSettings(SettingsSection):
    """Настройки оценки"""
    boundary_tolerance: int = 2


class AblationSettings(SettingsSection):
    """Настройки набора абляций"""
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])
    variants: List[str] = Field(default_factory=lambda: [
        "bti_full",
        "no_right_chunk",
        "no_speed_perturb",
        "no_trigger_shift",
        "no_time_mask",
        "no_random_dedup",
        "no_label_smoothing",
        "tti",
        "nonstreaming",
    ])
    p_sub: Optional[float] = 0.15  # None - использовать corpus.p_sub


class PathsSettings(SettingsSection):
    """Пути к артефактам"""
    out_dir: str = "runs/desk"
    corpus_dir: Optional[str] = None   # None - <out_dir>/corpus
    checkpoint: Optional[str] = None   # None - последний чекпоинт в <out_dir>/checkpoints
    registry: str = "registry.sqlite"  # Относительно out_dir


class Config(BaseSettings):
    """Основная конфигурация приложения"""
    model_config = SettingsConfigDict(extra="forbid")

    logging: LoggingSettings = Field(default_factory=LoggingSettings)
    vocab: VocabSettings = Field(default_factory=VocabSettings)
    corpus: CorpusSettings = Field(default_factory=CorpusSettings)
    model: ModelSettings = Field(default_factory=ModelSettings)
    train: TrainConfig = Field(default_factory=TrainConfig)
    decode: DecodeConfig = Field(default_factory=DecodeConfig)
    eval: EvalSettings = Field(default_factory=EvalSettings)
    ablation: AblationSettings = Field(default_factory=AblationSettings)
    paths: PathsSettings = Field(default_factory=PathsSettings)
    workers: int = 1

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # Только файл конфигурации и явные флаги, окружение не читается
        return (init_settings,)

    @field_validator("workers")
    @classmethod
    def _check_workers(cls, value: int) -> int:
        if value < 1:
            raise ValueError("workers должен быть не меньше 1")
        return value

    def resolved(self) -> Dict:
        """Полностью разрешенная конфигурация для манифеста запуска"""
        return self.model_dump(mode="json")
