import sys
from pathlib import Path
from typing import Optional, Union

from loguru import logger

from src.config.settings import LoggingSettings


def setup_logger(config: LoggingSettings, log_dir: Optional[Union[str, Path]] = None) -> None:
    """
    Настройка логирования с использованием loguru

    Args:
        config: Настройки логирования из конфигурации
        log_dir: Каталог запуска; относительный путь файла логов отсчитывается от него
    """
    log_file = Path(config.file)
    if log_dir is not None and not log_file.is_absolute():
        log_file = Path(log_dir) / log_file
    log_file.parent.mkdir(parents=True, exist_ok=True)

    # Удаляем стандартный обработчик
    logger.remove()
    logger.configure(extra={"name": "-"})

    # Добавляем обработчик для вывода в консоль
    logger.add(
        sys.stderr,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{extra[name]}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
        level=config.level,
        colorize=True
    )

    # Добавляем обработчик для записи в файл с ротацией
    logger.add(
        str(log_file),
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[name]}:{function}:{line} - {message}",
        level=config.level,
        rotation=config.max_bytes,
        retention=config.backup_count,
        compression="zip"
    )

    logger.bind(name="utils.logger").info(f"Логирование настроено. Уровень: {config.level}, файл: {log_file}")


def get_logger(name: str):
    """
    Получить логгер для конкретного модуля

    Args:
        name: Имя модуля

    Returns:
        Настроенный логгер
    """
    return logger.bind(name=name)
