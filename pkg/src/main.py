"""
Точка входа командной строки StreamASR: gen, train, decode, eval, ablate и masks dump

Запуск: python -m src.main <команда> [--config FILE] [--секция.ключ=значение ...]
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from src.analytics.ablation import ablation_suite
from src.analytics.evaluator import evaluate
from src.config.loader import load_config
from src.config.settings import Config
from src.core.exceptions import MissingInputError, StreamAsrError, UsageError
from src.corpus.generator import gen_corpus
from src.corpus.utterance import Utterance
from src.decoding.runner import decode_utterances
from src.layout.masks import MaskVariant, build_mask, write_csv, write_pbm
from src.layout.sequences import DeltaPolicy, build_bti_layout, build_nonstreaming_layout, build_tti_layout
from src.model.params import ModelConfig
from src.storage.checkpoint import latest_checkpoint, load_checkpoint
from src.storage.corpus_store import MANIFEST_NAME, load_corpus, split_path
from src.storage.database import Database
from src.storage.run_manifest import config_hash, write_run_manifest
from src.train.trainer import train
from src.utils.logger import setup_logger, get_logger

logger = get_logger("main")

LAYOUT_MASKS = {
    "bti": [MaskVariant.GLOBAL, MaskVariant.CAUSAL, MaskVariant.RIGHT_CHUNK],
    "tti": [MaskVariant.GLOBAL, MaskVariant.CAUSAL],
    "nonstreaming": [MaskVariant.GLOBAL],
}


class StreamAsrCli:
    """
    Выполнение подкоманд: gen, train, decode, eval, ablate, masks dump
    """

    def __init__(self, args: argparse.Namespace, config: Config):
        """
        Инициализация

        Args:
            args: Разобранные аргументы
            config: Разрешенная конфигурация
        """
        self.args = args
        self.config = config
        self.out_dir = Path(args.out_dir or config.paths.out_dir)
        self.artifacts: List[Path] = []

    @property
    def corpus_dir(self) -> Path:
        if self.args.corpus:
            return Path(self.args.corpus)
        if self.config.paths.corpus_dir:
            return Path(self.config.paths.corpus_dir)
        return self.out_dir / "corpus"

    @property
    def checkpoint(self) -> Path:
        if self.args.checkpoint:
            return Path(self.args.checkpoint)
        if self.config.paths.checkpoint:
            return Path(self.config.paths.checkpoint)
        return latest_checkpoint(self.out_dir)

    @property
    def seeds(self) -> Dict[str, int]:
        return {"corpus": self.config.corpus.seed, "train": self.config.train.seed}

    def _require_corpus(self) -> Path:
        corpus_dir = self.corpus_dir
        if not (corpus_dir / MANIFEST_NAME).exists():
            raise MissingInputError(f"Корпус не найден: {corpus_dir} (сначала выполните gen)")
        return corpus_dir

    def gen(self) -> None:
        """Генерация синтетического корпуса"""
        corpus_dir = self.corpus_dir
        manifest = gen_corpus(self.config.corpus, self.config.vocab.to_spec(), corpus_dir, workers=self.config.workers)
        self.artifacts += [corpus_dir / MANIFEST_NAME] + [split_path(corpus_dir, split) for split in manifest.splits]

    def train(self) -> None:
        """Обучение модели"""
        corpus_dir = self._require_corpus()
        model_config = ModelConfig.from_settings(self.config.model, self.config.vocab.to_spec())
        result = train(
            self.config.train,
            corpus_dir,
            model_config,
            self.config.train.seed,
            self.config.decode,
            self.out_dir,
            tolerance=self.config.eval.boundary_tolerance,
            workers=self.config.workers,
        )
        self.artifacts += [
            self.out_dir / "metrics.tsv",
            result.checkpoint.with_suffix(".json"),
            result.checkpoint.with_suffix(".bin"),
        ]

    def decode(self) -> None:
        """Декодирование тестовой части корпуса в hypotheses.jsonl"""
        corpus_dir = self._require_corpus()
        params = load_checkpoint(self.checkpoint)
        utterances = list(load_corpus(corpus_dir, "test", expected_vocab=params.config.vocab))
        results = decode_utterances(params, utterances, self.config.decode)

        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / "hypotheses.jsonl"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for result in results:
                f.write(json.dumps(result.model_dump(mode="json"), sort_keys=True, ensure_ascii=False) + "\n")
        logger.info(f"Гипотезы записаны: {path} ({len(results)} высказываний)")
        self.artifacts.append(path)

    def eval(self) -> None:
        """Оценка чекпоинта"""
        corpus_dir = self._require_corpus()
        evaluate(
            self.checkpoint,
            corpus_dir,
            self.config.decode,
            self.out_dir,
            tolerance=self.config.eval.boundary_tolerance,
            workers=self.config.workers,
        )
        self.artifacts += [self.out_dir / name for name in ("report.tsv", "utterances.tsv", "summary.txt")]

    def ablate(self) -> None:
        """Набор абляций"""
        corpus_dir = Path(self.args.corpus) if self.args.corpus else None
        ablation_suite(self.config, self.out_dir, corpus_dir)
        self.artifacts += [self.out_dir / "ablation.tsv", self.out_dir / "ablation.md"]

    def masks(self) -> None:
        """Выгрузка масок внимания одного высказывания"""
        if self.args.action != "dump":
            raise UsageError(f"неизвестное действие masks: {self.args.action}")
        utt = self._find_utterance(self.args.utt_id)
        vocab = self.config.vocab.to_spec()
        train_config = self.config.train
        if train_config.layout == "bti":
            layout = build_bti_layout(
                utt, vocab, DeltaPolicy.from_settings(train_config.delta_policy), train_config.text_position_mode
            )
        elif train_config.layout == "tti":
            layout = build_tti_layout(utt, vocab, train_config.tti_delta)
        else:
            layout = build_nonstreaming_layout(utt, vocab)

        self.out_dir.mkdir(parents=True, exist_ok=True)
        for variant in LAYOUT_MASKS[train_config.layout]:
            mask = build_mask(layout, variant)
            pbm = self.out_dir / f"mask_{variant.value}.pbm"
            csv = self.out_dir / f"mask_{variant.value}.csv"
            write_pbm(mask, pbm)
            write_csv(mask, csv)
            self.artifacts += [pbm, csv]
        logger.info(f"Маски {train_config.layout} для {utt.id} записаны в {self.out_dir}")

    def _find_utterance(self, utt_id: Optional[str]) -> Utterance:
        corpus_dir = self._require_corpus()
        for split in ("test", "train"):
            for utt in load_corpus(corpus_dir, split):
                if utt_id is None or utt.id == utt_id:
                    return utt
        raise MissingInputError(f"Высказывание {utt_id} не найдено в {corpus_dir}")

    def execute(self) -> None:
        commands: Dict[str, Callable[[], None]] = {
            "gen": self.gen,
            "train": self.train,
            "decode": self.decode,
            "eval": self.eval,
            "ablate": self.ablate,
            "masks": self.masks,
        }
        self.out_dir.mkdir(parents=True, exist_ok=True)
        registry = Database(str(self.out_dir / self.config.paths.registry))
        registry.create_tables()
        run_id = registry.start_run(self.args.command, config_hash(self.config), str(self.out_dir))
        try:
            commands[self.args.command]()
        except StreamAsrError as e:
            registry.finish_run(run_id, e.exit_code)
            raise
        else:
            write_run_manifest(self.out_dir, self.args.command, self.config, self.seeds, self.artifacts)
            registry.finish_run(run_id, 0)
        finally:
            registry.close()


def build_parser() -> argparse.ArgumentParser:
    """
    Парсер аргументов командной строки

    Остальные флаги вида --section.key=value передаются в конфигурацию.
    """
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="Путь к файлу конфигурации")
    common.add_argument("--out-dir", help="Каталог запуска")
    common.add_argument("--seed", type=int, help="Зерно обучения")
    common.add_argument("--workers", type=int, help="Число процессов")
    common.add_argument("--delta", type=int, help="Правый контекст Δ при декодировании")
    common.add_argument("--beam", type=int, help="Ширина луча")
    common.add_argument("--layout", choices=["tti", "bti", "nonstreaming"], help="Раскладка и режим декодирования")
    common.add_argument("--corpus", help="Каталог корпуса")
    common.add_argument("--checkpoint", help="Чекпоинт (путь без расширения)")

    parser = argparse.ArgumentParser(
        prog="python -m src.main",
        description="Потоковое распознавание речи на дискретных токенах",
        allow_abbrev=False,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("gen", parents=[common], help="Генерация синтетического корпуса", allow_abbrev=False)
    subparsers.add_parser("train", parents=[common], help="Обучение", allow_abbrev=False)
    subparsers.add_parser("decode", parents=[common], help="Декодирование тестовой части", allow_abbrev=False)
    subparsers.add_parser("eval", parents=[common], help="Оценка чекпоинта", allow_abbrev=False)
    subparsers.add_parser("ablate", parents=[common], help="Набор абляций", allow_abbrev=False)
    masks = subparsers.add_parser("masks", parents=[common], help="Маски внимания", allow_abbrev=False)
    masks.add_argument("action", choices=["dump"])
    masks.add_argument("--utt-id", help="ID высказывания (по умолчанию первое тестовое)")
    return parser


def _flag_overrides(args: argparse.Namespace) -> List[str]:
    """Перевод именованных флагов в переопределения конфигурации"""
    overrides = []
    if args.seed is not None:
        overrides.append(f"--train.seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"--workers={args.workers}")
    if args.delta is not None:
        overrides.append(f"--decode.delta={args.delta}")
        if args.command == "masks":
            overrides += ["--train.delta_policy.mode=fixed", f"--train.delta_policy.n={args.delta}"]
    if args.beam is not None:
        overrides.append(f"--decode.beam={args.beam}")
    if args.layout is not None:
        overrides += [f"--train.layout={args.layout}", f"--decode.mode={args.layout}"]
    return overrides


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Точка входа командной строки

    Args:
        argv: Аргументы без имени программы

    Returns:
        int: Код выхода (0 - успех)
    """
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(list(sys.argv[1:] if argv is None else argv))
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = load_config(args.config, extra + _flag_overrides(args))
        out_dir = Path(args.out_dir or config.paths.out_dir)
        setup_logger(config.logging, log_dir=out_dir)
        StreamAsrCli(args, config).execute()
    except StreamAsrError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Непредвиденная ошибка: {e}")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
