"""
Иерархия исключений системы

Каждое исключение несет код завершения, который CLI возвращает наружу.
"""
from typing import Optional


class StreamAsrError(Exception):
    """Базовое исключение системы"""
    exit_code: int = 1


class UsageError(StreamAsrError):
    """Неизвестная подкоманда или флаг командной строки"""
    exit_code = 2


class ConfigError(StreamAsrError, ValueError):
    """Некорректная конфигурация"""
    exit_code = 3


class MissingInputError(StreamAsrError, FileNotFoundError):
    """Отсутствует входной файл или каталог"""
    exit_code = 4


class VocabError(StreamAsrError, ValueError):
    """Некорректный словарь или идентификатор токена"""
    exit_code = 5


class VocabMismatchError(VocabError):
    """Словарь не совпадает со словарем манифеста или чекпоинта"""


class CorpusFormatError(StreamAsrError, ValueError):
    """Ошибка разбора файла корпуса"""
    exit_code = 5

    def __init__(self, message: str, line_no: Optional[int] = None, path: Optional[str] = None):
        self.line_no = line_no
        self.path = path
        location = ""
        if path is not None:
            location = f"{path}"
        if line_no is not None:
            location = f"{location}:{line_no}" if location else f"строка {line_no}"
        super().__init__(f"{location}: {message}" if location else message)


class UtteranceInvariantError(StreamAsrError, ValueError):
    """Нарушен инвариант высказывания"""
    exit_code = 5

    def __init__(self, utt_id: str, message: str):
        self.utt_id = utt_id
        super().__init__(f"высказывание '{utt_id}': {message}")


class LayoutError(StreamAsrError, ValueError):
    """Некорректная раскладка последовательности"""
    exit_code = 6


class MaskVariantError(LayoutError):
    """Вариант маски не поддерживается данной раскладкой"""


class ShapeMismatchError(StreamAsrError, ValueError):
    """Несогласованные размерности"""
    exit_code = 6


class NonFiniteError(StreamAsrError, FloatingPointError):
    """Нечисловое значение активаций или градиентов"""
    exit_code = 6

    def __init__(self, message: str, layer: Optional[int] = None):
        self.layer = layer
        super().__init__(f"слой {layer}: {message}" if layer is not None else message)


class TapeReuseError(StreamAsrError, RuntimeError):
    """Повторное использование ленты обратного прохода"""
    exit_code = 6


class CacheError(StreamAsrError, ValueError):
    """Нарушена согласованность пошагового кэша"""
    exit_code = 6


class DecoderStateError(StreamAsrError, RuntimeError):
    """Недопустимая операция над состоянием декодера"""
    exit_code = 6


class LossError(StreamAsrError, ValueError):
    """Невозможно вычислить функцию потерь"""
    exit_code = 6


class CheckpointError(StreamAsrError, ValueError):
    """Поврежденный или несовместимый чекпоинт"""
    exit_code = 5


class MetricError(StreamAsrError, ValueError):
    """Метрика не определена (например, пустая эталонная строка)"""
    exit_code = 5
