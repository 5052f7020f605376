import yaml
from pathlib import Path
from typing import Optional, Dict, Any, Union, Iterable

from pydantic import ValidationError

from src.core.exceptions import ConfigError, MissingInputError, UsageError
from .settings import Config


def load_yaml_config(file_path: Union[str, Path]) -> Dict[str, Any]:
    """
    Загрузка YAML конфигурации из файла

    Raises:
        MissingInputError: Если файл не существует
        ConfigError: Если файл не является корректным YAML-словарем
    """
    path = Path(file_path)
    if not path.is_file():
        raise MissingInputError(f"файл конфигурации не найден: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as file:
            data = yaml.safe_load(file) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"ошибка разбора {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: ожидался словарь верхнего уровня")
    return data


def _known_keys(model_cls: Any, path: list[str]) -> bool:
    """Проверка существования вложенного ключа в схеме конфигурации"""
    current = model_cls
    for key in path:
        fields = getattr(current, "model_fields", None)
        if fields is None or key not in fields:
            return False
        annotation = fields[key].annotation
        current = annotation
    return True


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """
    Применение переопределений вида --section.key=value

    Значения разбираются как YAML-скаляры, поэтому --train.epochs=3 дает int,
    а --augment.speed_factors=[1.0] дает список.

    Args:
        data: Исходная конфигурация (изменяется на месте)
        overrides: Флаги командной строки

    Returns:
        Dict[str, Any]: Конфигурация с примененными переопределениями

    Raises:
        UsageError: Флаг без значения или несуществующий ключ
        ConfigError: Значение флага не разбирается как YAML
    """
    for flag in overrides:
        if not flag.startswith("--") or "=" not in flag:
            raise UsageError(f"неизвестный флаг {flag} (ожидается --key=value)")
        key, raw_value = flag[2:].split("=", 1)
        path = key.replace("-", "_").split(".")
        if not _known_keys(Config, path):
            raise UsageError(f"неизвестный флаг --{key}")
        try:
            value = yaml.safe_load(raw_value)
        except yaml.YAMLError as e:
            raise ConfigError(f"некорректное значение флага --{key}: {e}") from e

        node = data
        for part in path[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
                node[part] = child
            node = child
        node[path[-1]] = value
    return data


def load_config(
    config_path: Optional[Union[str, Path]] = None,
    overrides: Optional[Iterable[str]] = None
) -> Config:
    """
    Загрузка конфигурации

    Args:
        config_path: Путь к файлу конфигурации (None - значения по умолчанию)
        overrides: Переопределения --key=value

    Returns:
        Config: Проверенная конфигурация
    """
    data = load_yaml_config(config_path) if config_path else {}
    apply_overrides(data, overrides or [])
    try:
        return Config.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"некорректная конфигурация: {location}: {first['msg']}") from e
