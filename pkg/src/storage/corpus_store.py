"""
Хранение корпуса: JSON Lines по одному высказыванию в строке и манифест рядом
"""
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.core.exceptions import (
    CorpusFormatError,
    MissingInputError,
    VocabMismatchError,
)
from src.core.tokens import VocabSpec
from src.corpus.utterance import Utterance, validate_utterance
from src.utils.logger import get_logger

logger = get_logger("storage.corpus_store")

CORPUS_FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"


class CorpusManifest(BaseModel):
    """Манифест корпуса"""
    model_config = ConfigDict(frozen=True)

    format_version: int = CORPUS_FORMAT_VERSION
    vocab: VocabSpec
    lexicon_seed: int
    config: Dict[str, Any] = Field(default_factory=dict)
    splits: List[str] = Field(default_factory=lambda: ["train", "test"])


def split_path(corpus_dir: Union[str, Path], split: str) -> Path:
    return Path(corpus_dir) / f"{split}.jsonl"


def write_utterances(path: Union[str, Path], utterances: Sequence[Utterance]) -> None:
    """Запись высказываний: UTF-8, LF, одно высказывание в строке"""
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        for utt in utterances:
            file.write(utt.model_dump_json())
            file.write("\n")


def write_corpus(
    corpus_dir: Union[str, Path],
    manifest: CorpusManifest,
    splits: Dict[str, Sequence[Utterance]]
) -> None:
    """
    Запись корпуса

    Raises:
        MissingInputError: Каталог назначения недоступен для записи
    """
    directory = Path(corpus_dir)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for split, utterances in splits.items():
            write_utterances(split_path(directory, split), utterances)
        manifest = manifest.model_copy(update={"splits": list(splits)})
        (directory / MANIFEST_NAME).write_text(
            manifest.model_dump_json(indent=2) + "\n", encoding="utf-8"
        )
    except OSError as e:
        raise MissingInputError(f"невозможно записать корпус в {directory}: {e}") from e


def read_manifest(corpus_dir: Union[str, Path]) -> CorpusManifest:
    """
    Чтение манифеста корпуса

    Raises:
        MissingInputError: Манифест отсутствует
        CorpusFormatError: Манифест поврежден или версия формата не совпадает
    """
    path = Path(corpus_dir) / MANIFEST_NAME
    if not path.is_file():
        raise MissingInputError(f"манифест корпуса не найден: {path}")
    try:
        manifest = CorpusManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise CorpusFormatError(f"поврежденный манифест: {e.errors()[0]['msg']}", path=str(path)) from e
    if manifest.format_version != CORPUS_FORMAT_VERSION:
        raise CorpusFormatError(
            f"версия формата {manifest.format_version} не поддерживается "
            f"(ожидается {CORPUS_FORMAT_VERSION})",
            path=str(path)
        )
    return manifest


def _check_vocab(utt: Utterance, vocab: VocabSpec) -> None:
    for token in utt.speech:
        if not vocab.is_speech(token):
            raise VocabMismatchError(
                f"высказывание '{utt.id}': речевой токен {token} вне словаря манифеста"
            )
    for token in utt.text:
        if not vocab.is_text(token):
            raise VocabMismatchError(
                f"высказывание '{utt.id}': символ {token} вне словаря манифеста"
            )


def read_utterances(path: Union[str, Path], vocab: Optional[VocabSpec] = None) -> Iterator[Utterance]:
    """
    Потоковое чтение файла высказываний

    Args:
        path: Путь к файлу .jsonl
        vocab: Словарь для проверки диапазонов токенов

    Yields:
        Utterance: Проверенные высказывания

    Raises:
        CorpusFormatError: Некорректная строка (с номером строки)
        UtteranceInvariantError: Нарушен инвариант (с идентификатором высказывания)
        VocabMismatchError: Токен вне словаря манифеста
    """
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"файл корпуса не найден: {path}")
    with open(path, "r", encoding="utf-8") as file:
        for line_no, line in enumerate(file, 1):
            if not line.strip():
                continue
            try:
                utt = Utterance.model_validate_json(line)
            except ValidationError as e:
                error = e.errors()[0]
                raise CorpusFormatError(error["msg"], line_no=line_no, path=str(path)) from e
            validate_utterance(utt)
            if vocab is not None:
                _check_vocab(utt, vocab)
            yield utt


def load_corpus(
    corpus_dir: Union[str, Path],
    split: str,
    expected_vocab: Optional[VocabSpec] = None
) -> Iterator[Utterance]:
    """
    Загрузка части корпуса

    Args:
        corpus_dir: Каталог корпуса с манифестом
        split: Имя части ("train", "test")
        expected_vocab: Словарь модели; должен совпадать со словарем манифеста

    Returns:
        Iterator[Utterance]: Поток высказываний
    """
    manifest = read_manifest(corpus_dir)
    if expected_vocab is not None and expected_vocab != manifest.vocab:
        raise VocabMismatchError(
            f"словарь корпуса ({manifest.vocab.n_speech}, {manifest.vocab.n_text}) не совпадает "
            f"с ожидаемым ({expected_vocab.n_speech}, {expected_vocab.n_text})"
        )
    return read_utterances(split_path(corpus_dir, split), manifest.vocab)
