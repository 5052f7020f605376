"""
Цикл обучения: аугментации, раскладка и маска по конфигурации, Adam, чекпоинты по эпохам
"""
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.analytics.evaluator import evaluate_params
from src.analytics.reports import ReportFormatter
from src.augment.pipeline import AugmentPipeline, utterance_rng
from src.config.settings import DecodeConfig, TrainConfig
from src.core.exceptions import LayoutError
from src.core.tokens import VocabSpec
from src.corpus.utterance import Utterance
from src.layout.masks import AttentionMask, MaskVariant, build_mask
from src.layout.sequences import (
    DeltaPolicy, LayoutSequence, build_bti_layout, build_nonstreaming_layout, build_tti_layout
)
from src.model.params import ModelConfig, ModelParams, init_params
from src.model.transformer import backward, forward
from src.storage.checkpoint import checkpoint_prefix, save_checkpoint
from src.storage.corpus_store import load_corpus
from src.train.loss import LossResult, SmoothingSpec, sequence_loss
from src.train.optimizer import AdamHyper, AdamState, adam_step, warmup_lr
from src.utils.logger import get_logger

logger = get_logger("train.trainer")

METRICS_COLUMNS = ("epoch", "speech_loss", "boundary_loss", "text_loss", "dev_cer", "latency_mean")
LOSS_KINDS = ("speech", "boundary", "text")


def training_example(utt: Utterance, config: TrainConfig, vocab: VocabSpec) -> Tuple[LayoutSequence, AttentionMask]:
    """
    Раскладка и маска для высказывания по настройкам обучения

    bti - маска right_chunk или causal, tti - causal, nonstreaming - global.
    """
    if config.layout == "bti":
        layout = build_bti_layout(
            utt, vocab, DeltaPolicy.from_settings(config.delta_policy), config.text_position_mode
        )
        variant = MaskVariant.RIGHT_CHUNK if config.mask_variant == "right_chunk" else MaskVariant.CAUSAL
    elif config.layout == "tti":
        layout = build_tti_layout(utt, vocab, config.tti_delta)
        variant = MaskVariant.CAUSAL
    else:
        layout = build_nonstreaming_layout(utt, vocab)
        variant = MaskVariant.GLOBAL
    return layout, build_mask(layout, variant)


@dataclass
class EpochMetrics:
    """Метрики эпохи"""
    epoch: int
    speech_loss: float
    boundary_loss: float
    text_loss: float
    dev_cer: Optional[float] = None
    latency_mean: Optional[float] = None
    skipped_utts: int = 0
    skipped_steps: int = 0

    def row(self) -> Dict:
        return asdict(self)


@dataclass
class TrainResult:
    """Итог обучения"""
    params: ModelParams
    checkpoint: Path
    history: List[EpochMetrics] = field(default_factory=list)
    initial_loss: Optional[float] = None


class Trainer:
    """
    Обучение модели на корпусе

    Все случайные решения зависят только от seed: порядок эпохи - от (seed, epoch),
    аугментации и dropout высказывания - от (seed, epoch, id).
    """

    def __init__(
        self,
        config: TrainConfig,
        model_config: ModelConfig,
        decode_config: DecodeConfig,
        out_dir: Union[str, Path],
        seed: Optional[int] = None,
        tolerance: int = 2,
        workers: int = 1
    ):
        self.config = config
        self.model_config = model_config
        self.vocab = model_config.vocab
        self.seed = config.seed if seed is None else seed
        self.decode_config = decode_config.model_copy(update={"mode": config.layout})
        self.out_dir = Path(out_dir)
        self.tolerance = tolerance
        self.workers = workers

        self.params = init_params(model_config, self.seed)
        self.pipeline = AugmentPipeline(config.augment, self.vocab)
        self.smoothing = SmoothingSpec.for_speech(self.vocab, config.smoothing.epsilon)
        self.hyper = AdamHyper(learning_rate=config.learning_rate, clip_norm=config.clip_norm)
        self.state = AdamState()
        self.formatter = ReportFormatter()

    def utterance_step(self, utt: Utterance, epoch: int) -> Optional[Tuple[LossResult, Dict[str, np.ndarray]]]:
        """
        Потери и градиенты одного высказывания

        Returns:
            Optional[Tuple[LossResult, Dict[str, np.ndarray]]]: None, если раскладка не
            помещается в max_positions
        """
        rng = utterance_rng(self.seed, epoch, utt.id)
        augmented = self.pipeline.apply(utt, rng)
        try:
            layout, mask = training_example(augmented, self.config, self.vocab)
        except LayoutError as e:
            logger.warning(f"Высказывание {utt.id} пропущено: {e}")
            return None
        if int(layout.positions.max()) >= self.model_config.max_positions:
            logger.warning(
                f"Высказывание {utt.id} пропущено: {len(layout)} позиций > "
                f"max_positions={self.model_config.max_positions}"
            )
            return None

        layout = layout.with_inputs(self.pipeline.mask_inputs(layout.inputs, rng))
        logits, tape = forward(self.params, layout, mask, train_mode=True, rng=rng)
        loss = sequence_loss(logits, layout, self.smoothing, self.config.loss_weights)
        grads = backward(self.params, tape, loss.grad)
        return loss, grads

    def run_epoch(self, epoch: int, utterances: Sequence[Utterance]) -> Tuple[EpochMetrics, Optional[float]]:
        """
        Одна эпоха: накопление градиентов по batch_size высказываниям, затем шаг Adam

        Returns:
            Tuple[EpochMetrics, Optional[float]]: Метрики и средние потери первого пакета
            до первого шага
        """
        order = np.random.default_rng([self.seed, epoch]).permutation(len(utterances))
        sums = {kind: 0.0 for kind in LOSS_KINDS}
        counts = {kind: 0 for kind in LOSS_KINDS}
        skipped_utts = 0
        skipped_steps = 0
        first_batch_loss: Optional[float] = None

        batch_size = self.config.batch_size
        for start in range(0, len(order), batch_size):
            accumulated: Optional[Dict[str, np.ndarray]] = None
            batch_losses = []
            for index in order[start:start + batch_size]:
                outcome = self.utterance_step(utterances[int(index)], epoch)
                if outcome is None:
                    skipped_utts += 1
                    continue
                loss, grads = outcome
                batch_losses.append(loss.total)
                for kind in LOSS_KINDS:
                    if loss.counts[kind]:
                        sums[kind] += loss.breakdown[kind]
                        counts[kind] += 1
                if accumulated is None:
                    accumulated = {name: grad.astype(np.float64) for name, grad in grads.items()}
                else:
                    for name, grad in grads.items():
                        accumulated[name] += grad
            if accumulated is None:
                continue
            if first_batch_loss is None:
                first_batch_loss = float(np.mean(batch_losses))

            n = len(batch_losses)
            mean_grads = {name: grad / n for name, grad in accumulated.items()}
            lr = warmup_lr(self.state.step, self.config.learning_rate, self.config.warmup_steps)
            report = adam_step(self.params.tensors, mean_grads, self.state, self.hyper, lr)
            if not report.applied:
                skipped_steps += 1

        metrics = EpochMetrics(
            epoch=epoch,
            speech_loss=sums["speech"] / counts["speech"] if counts["speech"] else 0.0,
            boundary_loss=sums["boundary"] / counts["boundary"] if counts["boundary"] else 0.0,
            text_loss=sums["text"] / counts["text"] if counts["text"] else 0.0,
            skipped_utts=skipped_utts,
            skipped_steps=skipped_steps,
        )
        return metrics, first_batch_loss

    def fit(self, train_utts: Sequence[Utterance], dev_utts: Sequence[Utterance]) -> TrainResult:
        """
        Обучение на train_utts с оценкой на dev_utts после каждой эпохи

        Returns:
            TrainResult: Параметры, последний чекпоинт, история метрик
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        logger.info(
            f"Обучение: {len(train_utts)} высказываний, раскладка {self.config.layout}, "
            f"{self.config.epochs} эпох, seed={self.seed}"
        )
        history: List[EpochMetrics] = []
        initial_loss: Optional[float] = None
        checkpoint = checkpoint_prefix(self.out_dir, 0)

        for epoch in range(1, self.config.epochs + 1):
            metrics, first_loss = self.run_epoch(epoch, train_utts)
            if epoch == 1:
                initial_loss = first_loss
            if dev_utts:
                report = evaluate_params(self.params, dev_utts, self.decode_config, self.tolerance, self.workers)
                metrics.dev_cer = report.cer
                metrics.latency_mean = report.latency()
            if metrics.skipped_utts or metrics.skipped_steps:
                logger.warning(
                    f"Эпоха {epoch}: пропущено высказываний {metrics.skipped_utts}, "
                    f"шагов {metrics.skipped_steps}"
                )

            checkpoint = checkpoint_prefix(self.out_dir, epoch)
            save_checkpoint(self.params, checkpoint, epoch=epoch)
            history.append(metrics)
            self.write_metrics(history)
            logger.info(self.formatter.format_epoch(epoch, metrics.row()))

        return TrainResult(params=self.params, checkpoint=checkpoint, history=history, initial_loss=initial_loss)

    def write_metrics(self, history: Sequence[EpochMetrics]) -> Path:
        path = self.out_dir / "metrics.tsv"
        path.write_text(
            self.formatter.format_tsv(METRICS_COLUMNS, [metrics.row() for metrics in history]),
            encoding="utf-8",
        )
        return path


def train(
    config: TrainConfig,
    corpus_dir: Union[str, Path],
    model_config: ModelConfig,
    seed: int,
    decode_config: DecodeConfig,
    out_dir: Union[str, Path],
    tolerance: int = 2,
    workers: int = 1
) -> TrainResult:
    """
    Обучение на корпусе из каталога

    Для оценки по эпохам берутся первые dev_size высказываний тестовой части.

    Args:
        config: Настройки обучения
        corpus_dir: Каталог корпуса
        model_config: Конфигурация модели
        seed: Зерно инициализации и аугментаций
        decode_config: Настройки декодирования для оценки
        out_dir: Каталог запуска
        tolerance: Допуск сопоставления границ
        workers: Число процессов оценки

    Returns:
        TrainResult: Итог обучения
    """
    train_utts = list(load_corpus(corpus_dir, "train", expected_vocab=model_config.vocab))
    dev_utts = list(load_corpus(corpus_dir, "test", expected_vocab=model_config.vocab))
    if config.dev_size is not None:
        dev_utts = dev_utts[:config.dev_size]
    trainer = Trainer(config, model_config, decode_config, out_dir, seed=seed, tolerance=tolerance, workers=workers)
    return trainer.fit(train_utts, dev_utts)
