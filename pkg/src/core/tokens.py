"""
Единая раскладка словаря: речевые кластеры, символы текста и служебные токены
"""
import enum

from pydantic import BaseModel, ConfigDict, model_validator

from src.core.exceptions import VocabError


# Количество служебных токенов после диапазонов речи и текста
N_SPECIALS = 3


class TokenKind(enum.Enum):
    """Тип токена"""
    SPEECH = "speech"
    TEXT = "text"
    BOUNDARY = "boundary"
    PAD = "pad"
    SOS_TEXT = "sos_text"


class VocabSpec(BaseModel):
    """
    Раскладка словаря

    Речь занимает [0, n_speech), текст [n_speech, n_speech + n_text),
    далее BOUNDARY, PAD, SOS_TEXT.
    """
    model_config = ConfigDict(frozen=True)

    n_speech: int
    n_text: int

    @model_validator(mode="after")
    def _check_ranges(self) -> "VocabSpec":
        if self.n_speech < 2 or self.n_text < 2:
            raise ValueError(
                f"диапазоны словаря должны содержать не менее 2 элементов: "
                f"n_speech={self.n_speech}, n_text={self.n_text}"
            )
        return self

    @property
    def text_offset(self) -> int:
        return self.n_speech

    @property
    def boundary_id(self) -> int:
        return self.n_speech + self.n_text

    @property
    def pad_id(self) -> int:
        return self.boundary_id + 1

    @property
    def sos_text_id(self) -> int:
        return self.boundary_id + 2

    @property
    def total_vocab(self) -> int:
        return self.n_speech + self.n_text + N_SPECIALS

    def speech_ids(self) -> range:
        return range(0, self.n_speech)

    def text_ids(self) -> range:
        return range(self.n_speech, self.n_speech + self.n_text)

    def is_speech(self, token_id: int) -> bool:
        return 0 <= token_id < self.n_speech

    def is_text(self, token_id: int) -> bool:
        return self.n_speech <= token_id < self.boundary_id


def build_vocab(n_speech: int, n_text: int) -> VocabSpec:
    """
    Построение словаря

    Args:
        n_speech: Количество речевых кластеров
        n_text: Количество символов текста

    Returns:
        VocabSpec: Раскладка словаря

    Raises:
        VocabError: Если хотя бы один диапазон содержит меньше двух элементов
    """
    if n_speech < 2 or n_text < 2:
        raise VocabError(
            f"вырожденный словарь: n_speech={n_speech}, n_text={n_text} (нужно не менее 2)"
        )
    return VocabSpec(n_speech=n_speech, n_text=n_text)


def token_kind(vocab: VocabSpec, token_id: int) -> TokenKind:
    """
    Определение типа токена по идентификатору

    Args:
        vocab: Раскладка словаря
        token_id: Идентификатор токена

    Returns:
        TokenKind: Тип токена

    Raises:
        VocabError: Если идентификатор вне словаря
    """
    if token_id < 0 or token_id >= vocab.total_vocab:
        raise VocabError(f"идентификатор {token_id} вне словаря [0, {vocab.total_vocab})")
    if token_id < vocab.n_speech:
        return TokenKind.SPEECH
    if token_id < vocab.boundary_id:
        return TokenKind.TEXT
    if token_id == vocab.boundary_id:
        return TokenKind.BOUNDARY
    if token_id == vocab.pad_id:
        return TokenKind.PAD
    return TokenKind.SOS_TEXT
