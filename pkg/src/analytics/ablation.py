"""
Набор абляций: полный BTI против вариантов без отдельных компонентов, плюс TTI и непотоковый
"""
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from src.analytics.evaluator import evaluate_params
from src.analytics.reports import ReportFormatter
from src.config.settings import Config
from src.core.exceptions import ConfigError
from src.corpus.generator import gen_corpus
from src.model.params import ModelConfig
from src.storage.corpus_store import load_corpus
from src.storage.database import Database
from src.storage.models import AblationRow
from src.storage.run_manifest import config_hash
from src.train.trainer import Trainer
from src.utils.logger import get_logger

logger = get_logger("analytics.ablation")

ABLATION_COLUMNS = ("variant", "cer", "latency_mean", "boundary_precision", "boundary_recall", "n_seeds")


def _update(config: Config, section: str, values: Dict) -> Config:
    current = getattr(config, section)
    return config.model_copy(update={section: current.model_copy(update=values)})


def _update_augment(config: Config, values: Dict) -> Config:
    augment = config.train.augment.model_copy(update=values)
    return _update(config, "train", {"augment": augment})


def _bti_full(config: Config) -> Config:
    config = _update(config, "train", {"layout": "bti", "mask_variant": "right_chunk"})
    return _update(config, "decode", {"mode": "bti"})


def _no_right_chunk(config: Config) -> Config:
    config = _bti_full(config)
    policy = config.train.delta_policy.model_copy(update={"mode": "fixed", "n": 0})
    config = _update(config, "train", {"delta_policy": policy, "mask_variant": "causal"})
    return _update(config, "decode", {"delta": 0})


def _no_label_smoothing(config: Config) -> Config:
    config = _bti_full(config)
    smoothing = config.train.smoothing.model_copy(update={"epsilon": 0.0})
    return _update(config, "train", {"smoothing": smoothing})


def _no_text_loss(config: Config) -> Config:
    config = _bti_full(config)
    weights = config.train.loss_weights.model_copy(update={"text": 0.0})
    return _update(config, "train", {"loss_weights": weights})


def _tti(config: Config) -> Config:
    config = _update(config, "train", {"layout": "tti"})
    return _update(config, "decode", {"mode": "tti"})


def _nonstreaming(config: Config) -> Config:
    config = _update(config, "train", {"layout": "nonstreaming"})
    return _update(config, "decode", {"mode": "nonstreaming"})


VARIANTS: Dict[str, Callable[[Config], Config]] = {
    "bti_full": _bti_full,
    "no_right_chunk": _no_right_chunk,
    "no_speed_perturb": lambda config: _update_augment(_bti_full(config), {"speed_factors": [1.0]}),
    "no_trigger_shift": lambda config: _update_augment(_bti_full(config), {"trigger_shift_p": 0.0}),
    "no_time_mask": lambda config: _update_augment(_bti_full(config), {"time_mask_p": 0.0}),
    "no_random_dedup": lambda config: _update_augment(_bti_full(config), {"dedup_p": 0.0}),
    "no_label_smoothing": _no_label_smoothing,
    "no_text_loss": _no_text_loss,
    "tti": _tti,
    "nonstreaming": _nonstreaming,
}


def variant_config(base: Config, variant: str, seed: int) -> Config:
    """
    Конфигурация варианта

    Raises:
        ConfigError: Неизвестный вариант
    """
    if variant not in VARIANTS:
        raise ConfigError(f"неизвестный вариант абляции: {variant}")
    config = VARIANTS[variant](base)
    return _update(config, "train", {"seed": seed})


def _median(values: List[Optional[float]]) -> Optional[float]:
    present = [value for value in values if value is not None]
    return float(np.median(present)) if present else None


class AblationSuite:
    """
    Запуск вариантов по всем зернам с медианой по зернам

    Готовые результаты (variant, seed, config_hash) берутся из реестра.
    """

    def __init__(self, config: Config, out_dir: Union[str, Path], corpus_dir: Optional[Union[str, Path]] = None):
        self.config = config
        self.out_dir = Path(out_dir)
        self.corpus_dir = Path(corpus_dir) if corpus_dir is not None else None
        self.registry = Database(str(self.out_dir / config.paths.registry))
        self.registry.create_tables()
        self.formatter = ReportFormatter()

    def prepare_corpus(self) -> Path:
        """Корпус абляций: переданный каталог или собственный с ablation.p_sub"""
        if self.corpus_dir is not None:
            return self.corpus_dir
        corpus_settings = self.config.corpus
        if self.config.ablation.p_sub is not None:
            corpus_settings = corpus_settings.model_copy(update={"p_sub": self.config.ablation.p_sub})
        corpus_dir = self.out_dir / "corpus"
        if not (corpus_dir / "manifest.json").exists():
            logger.info(f"Генерация корпуса абляций (p_sub={corpus_settings.p_sub})")
            gen_corpus(corpus_settings, self.config.vocab.to_spec(), corpus_dir, workers=self.config.workers)
        return corpus_dir

    def run_variant(self, variant: str, seed: int, corpus_dir: Path) -> AblationRow:
        config = variant_config(self.config, variant, seed)
        key = config_hash(config)
        cached = self.registry.get_ablation_row(variant, seed, key)
        if cached is not None:
            logger.info(f"Вариант {variant}, seed={seed}: результат взят из реестра")
            return cached

        vocab = config.vocab.to_spec()
        model_config = ModelConfig.from_settings(config.model, vocab)
        train_utts = list(load_corpus(corpus_dir, "train", expected_vocab=vocab))
        test_utts = list(load_corpus(corpus_dir, "test", expected_vocab=vocab))
        dev_utts = test_utts[:config.train.dev_size] if config.train.dev_size is not None else test_utts

        run_dir = self.out_dir / "runs" / variant / f"seed{seed}"
        trainer = Trainer(
            config.train, model_config, config.decode, run_dir,
            seed=seed, tolerance=config.eval.boundary_tolerance, workers=config.workers,
        )
        result = trainer.fit(train_utts, dev_utts)
        report = evaluate_params(
            result.params, test_utts, config.decode, config.eval.boundary_tolerance, config.workers
        )
        row = report.row()
        record = AblationRow(
            variant=variant,
            seed=seed,
            config_hash=key,
            cer=row["cer"],
            latency_mean=row["latency_mean"] if config.decode.mode != "nonstreaming" else None,
            boundary_precision=row["boundary_precision"],
            boundary_recall=row["boundary_recall"],
            checkpoint=str(result.checkpoint),
        )
        self.registry.save_ablation_row(record)
        logger.info(f"Вариант {variant}, seed={seed}: CER={row['cer']:.4f}")
        return record

    def run(self) -> List[Dict]:
        """
        Запуск всего набора

        Returns:
            List[Dict]: Строки таблицы (медиана по зернам) в порядке вариантов
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        corpus_dir = self.prepare_corpus()
        seeds = self.config.ablation.seeds
        rows = []
        for variant in self.config.ablation.variants:
            records = [self.run_variant(variant, seed, corpus_dir) for seed in seeds]
            rows.append({
                "variant": variant,
                "cer": _median([record.cer for record in records]),
                "latency_mean": _median([record.latency_mean for record in records]),
                "boundary_precision": _median([record.boundary_precision for record in records]),
                "boundary_recall": _median([record.boundary_recall for record in records]),
                "n_seeds": len(records),
            })

        (self.out_dir / "ablation.tsv").write_text(
            self.formatter.format_tsv(ABLATION_COLUMNS, rows), encoding="utf-8"
        )
        (self.out_dir / "ablation.md").write_text(
            self.formatter.format_ablation_markdown(rows, len(seeds)), encoding="utf-8"
        )
        return rows


def ablation_suite(config: Config, out_dir: Union[str, Path], corpus_dir: Optional[Union[str, Path]] = None) -> List[Dict]:
    """Набор абляций от базовой конфигурации"""
    suite = AblationSuite(config, out_dir, corpus_dir)
    try:
        return suite.run()
    finally:
        suite.registry.close()
