"""
Чекпоинты модели: manifest.json (конфигурация и индекс тензоров) + плоский float32 .bin
"""
import json
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from src.core.exceptions import CheckpointError, MissingInputError
from src.model.params import ModelConfig, ModelParams, param_shapes
from src.utils.logger import get_logger

logger = get_logger("storage.checkpoint")

CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_DTYPE = np.dtype("<f4")


class TensorEntry(BaseModel):
    """Положение тензора в блобе (смещение в элементах)"""
    name: str
    shape: List[int]
    offset: int


class CheckpointManifest(BaseModel):
    """Манифест чекпоинта"""
    format_version: int
    model: ModelConfig
    tensors: List[TensorEntry]
    epoch: Optional[int] = None


def _paths(prefix: Union[str, Path]):
    prefix = Path(prefix)
    return prefix.with_suffix(".json"), prefix.with_suffix(".bin")


def save_checkpoint(params: ModelParams, prefix: Union[str, Path], epoch: Optional[int] = None) -> Path:
    """
    Сохранение параметров

    Тензоры пишутся в фиксированном порядке param_shapes как little-endian float32,
    поэтому повторное сохранение загруженного чекпоинта дает те же байты.

    Args:
        params: Параметры модели
        prefix: Путь без расширения
        epoch: Номер эпохи для манифеста

    Returns:
        Path: Путь к манифесту
    """
    manifest_path, blob_path = _paths(prefix)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)

    entries = []
    chunks = []
    offset = 0
    for name, shape in param_shapes(params.config):
        tensor = params[name]
        if tensor.shape != shape:
            raise CheckpointError(f"тензор {name}: форма {tensor.shape}, ожидалась {shape}")
        entries.append(TensorEntry(name=name, shape=list(shape), offset=offset))
        chunks.append(np.ascontiguousarray(tensor, dtype=CHECKPOINT_DTYPE).tobytes())
        offset += int(tensor.size)

    manifest = CheckpointManifest(
        format_version=CHECKPOINT_FORMAT_VERSION,
        model=params.config,
        tensors=entries,
        epoch=epoch,
    )
    blob_path.write_bytes(b"".join(chunks))
    manifest_path.write_text(
        json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    logger.debug(f"Чекпоинт сохранен: {manifest_path}")
    return manifest_path


def load_checkpoint(prefix: Union[str, Path]) -> ModelParams:
    """
    Загрузка параметров

    Raises:
        MissingInputError: Нет манифеста или блоба
        CheckpointError: Неизвестная версия формата, поврежденный манифест или блоб
    """
    manifest_path, blob_path = _paths(prefix)
    if not manifest_path.exists() or not blob_path.exists():
        raise MissingInputError(f"Чекпоинт не найден: {manifest_path}")

    try:
        manifest = CheckpointManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise CheckpointError(f"Поврежденный манифест чекпоинта {manifest_path}: {e}") from e
    if manifest.format_version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"Неподдерживаемая версия чекпоинта: {manifest.format_version} "
            f"(ожидалась {CHECKPOINT_FORMAT_VERSION})"
        )

    blob = np.frombuffer(blob_path.read_bytes(), dtype=CHECKPOINT_DTYPE)
    expected = dict(param_shapes(manifest.model))
    tensors: Dict[str, np.ndarray] = {}
    for entry in manifest.tensors:
        shape = tuple(entry.shape)
        if expected.get(entry.name) != shape:
            raise CheckpointError(f"тензор {entry.name} с формой {shape} не соответствует конфигурации")
        size = int(np.prod(shape))
        if entry.offset + size > blob.size:
            raise CheckpointError(f"блоб чекпоинта обрезан на тензоре {entry.name}")
        values = blob[entry.offset:entry.offset + size].reshape(shape)
        tensors[entry.name] = values.astype(manifest.model.dtype)
    missing = set(expected) - set(tensors)
    if missing:
        raise CheckpointError(f"в чекпоинте нет тензоров: {sorted(missing)}")
    return ModelParams(manifest.model, tensors)


def checkpoint_prefix(out_dir: Union[str, Path], epoch: int) -> Path:
    return Path(out_dir) / "checkpoints" / f"epoch_{epoch:03d}"


def latest_checkpoint(out_dir: Union[str, Path]) -> Path:
    """
    Последний чекпоинт каталога запуска

    Raises:
        MissingInputError: Чекпоинтов нет
    """
    manifests = [
        path for path in (Path(out_dir) / "checkpoints").glob("epoch_*.json")
        if path.stem[len("epoch_"):].isdigit()
    ]
    if not manifests:
        raise MissingInputError(f"В {out_dir} нет чекпоинтов")
    # номер эпохи, а не имя: epoch_1000 после epoch_999
    latest = max(manifests, key=lambda path: int(path.stem[len("epoch_"):]))
    return latest.with_suffix("")
