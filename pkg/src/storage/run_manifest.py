"""
Манифест запуска: разрешенная конфигурация, зерна и хэши артефактов
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Union

from src.config.settings import Config


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(config: Config) -> str:
    """Хэш разрешенной конфигурации без путей, логирования и числа процессов"""
    resolved = {key: value for key, value in config.resolved().items() if key not in ("paths", "logging", "workers")}
    payload = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_run_manifest(
    out_dir: Union[str, Path],
    command: str,
    config: Config,
    seeds: Dict[str, int],
    artifacts: Iterable[Union[str, Path]]
) -> Path:
    """
    Запись run_manifest.json в каталог запуска

    Args:
        out_dir: Каталог запуска
        command: Подкоманда
        config: Разрешенная конфигурация
        seeds: Использованные зерна
        artifacts: Пути к артефактам для хэширования

    Returns:
        Path: Путь к манифесту
    """
    out_dir = Path(out_dir)
    hashes: Dict[str, str] = {}
    for artifact in artifacts:
        artifact = Path(artifact)
        if artifact.is_file():
            key = str(artifact.relative_to(out_dir)) if artifact.is_relative_to(out_dir) else str(artifact)
            hashes[key] = sha256_file(artifact)

    manifest: Dict[str, Any] = {
        "command": command,
        "config": config.resolved(),
        "config_hash": config_hash(config),
        "seeds": seeds,
        "artifacts": dict(sorted(hashes.items())),
    }
    path = out_dir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
