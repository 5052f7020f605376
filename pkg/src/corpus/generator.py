"""
Генератор синтетического корпуса с точным выравниванием
"""
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from src.config.settings import CorpusSettings
from src.core.exceptions import VocabError
from src.core.tokens import VocabSpec
from src.corpus.lexicon import Lexicon, gen_lexicon
from src.corpus.utterance import Utterance
from src.storage.corpus_store import CorpusManifest, write_corpus
from src.utils.logger import get_logger

logger = get_logger("corpus.generator")

SeedLike = Union[int, Sequence[int]]


def synth_utterance(
    lexicon: Lexicon,
    seed: SeedLike,
    text: Sequence[int],
    p_sub: float,
    utt_id: str = "synth"
) -> Utterance:
    """
    Синтез высказывания по тексту

    Каждый кластер шаблона повторяется 1-3 раза, затем каждый кадр с вероятностью
    p_sub заменяется равномерно выбранным кластером. Длительности и шум берутся из
    независимых потоков, поэтому зашумленный и чистый варианты имеют одинаковые границы.

    Args:
        lexicon: Лексикон
        seed: Зерно высказывания
        text: Идентификаторы символов текста
        p_sub: Вероятность замены кадра

    Returns:
        Utterance: Высказывание с границами сегментов

    Raises:
        VocabError: Неизвестный идентификатор символа
        ValueError: Пустой текст или p_sub вне [0, 0.5)
    """
    if not text:
        raise ValueError("текст высказывания не может быть пустым")
    if not 0.0 <= p_sub < 0.5:
        raise ValueError(f"p_sub вне [0, 0.5): {p_sub}")

    vocab = lexicon.vocab
    duration_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
    duration_rng = np.random.default_rng(duration_seq)
    noise_rng = np.random.default_rng(noise_seq)

    speech: List[int] = []
    boundaries: List[int] = []
    for text_id in text:
        if not vocab.is_text(text_id):
            raise VocabError(f"неизвестный идентификатор символа {text_id}")
        for unit in lexicon.template(text_id):
            repeats = int(duration_rng.integers(1, 4))
            speech.extend([unit] * repeats)
        boundaries.append(len(speech) - 1)

    frames = np.asarray(speech, dtype=np.int64)
    substitute = noise_rng.random(len(frames)) < p_sub
    replacements = noise_rng.integers(0, vocab.n_speech, size=len(frames))
    frames = np.where(substitute, replacements, frames)

    return Utterance(
        id=utt_id,
        speech=tuple(int(x) for x in frames),
        text=tuple(int(y) for y in text),
        boundaries=tuple(boundaries),
    )


def _synth_one(lexicon: Lexicon, settings: CorpusSettings, index: int, utt_id: str) -> Utterance:
    """Высказывание с индексом index; случайность зависит только от (seed, index)"""
    rng = np.random.default_rng([settings.seed, index, 0])
    low, high = settings.len_range
    length = int(rng.integers(low, high + 1))
    text = [int(y) for y in rng.integers(0, lexicon.vocab.n_text, size=length) + lexicon.vocab.text_offset]
    return synth_utterance(lexicon, [settings.seed, index, 1], text, settings.p_sub, utt_id=utt_id)


def _synth_chunk(args: tuple) -> List[Utterance]:
    lexicon, settings, jobs = args
    return [_synth_one(lexicon, settings, index, utt_id) for index, utt_id in jobs]


def synth_split(
    lexicon: Lexicon,
    settings: CorpusSettings,
    prefix: str,
    start: int,
    count: int,
    workers: int = 1
) -> List[Utterance]:
    """
    Синтез части корпуса

    Параллельный и последовательный варианты дают одинаковый результат.
    """
    jobs = [(start + i, f"{prefix}-{i:05d}") for i in range(count)]
    if workers <= 1:
        return _synth_chunk((lexicon, settings, jobs))

    chunk = max(1, (len(jobs) + workers - 1) // workers)
    chunks = [(lexicon, settings, jobs[i:i + chunk]) for i in range(0, len(jobs), chunk)]
    utterances: List[Utterance] = []
    with ProcessPoolExecutor(max_workers=workers) as executor:
        for part in executor.map(_synth_chunk, chunks):
            utterances.extend(part)
    return utterances


def gen_corpus(
    settings: CorpusSettings,
    vocab: VocabSpec,
    dest: Union[str, Path],
    workers: int = 1
) -> CorpusManifest:
    """
    Генерация корпуса и запись на диск

    Args:
        settings: Настройки корпуса
        vocab: Раскладка словаря
        dest: Каталог назначения
        workers: Количество процессов

    Returns:
        CorpusManifest: Записанный манифест
    """
    lexicon = gen_lexicon(settings.seed, vocab)
    train = synth_split(lexicon, settings, "train", 0, settings.n_train, workers)
    test = synth_split(lexicon, settings, "test", settings.n_train, settings.n_test, workers)

    manifest = CorpusManifest(
        vocab=vocab,
        lexicon_seed=settings.seed,
        config=settings.model_dump(mode="json"),
    )
    write_corpus(dest, manifest, {"train": train, "test": test})
    logger.info(
        f"Корпус сгенерирован в {dest}: train={len(train)}, test={len(test)}, "
        f"p_sub={settings.p_sub}, словарь={vocab.total_vocab}"
    )
    return manifest
