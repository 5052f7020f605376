"""
Оценка модели на корпусе: CER, задержки, точность и полнота границ
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.analytics.metrics import BoundaryCounts, boundary_counts, edit_distance, latency_stats
from src.analytics.reports import ReportFormatter
from src.config.settings import DecodeConfig
from src.corpus.utterance import Utterance
from src.decoding.events import DecodeResult
from src.decoding.runner import decode
from src.model.params import ModelParams
from src.storage.checkpoint import load_checkpoint
from src.storage.corpus_store import load_corpus
from src.utils.logger import get_logger

logger = get_logger("analytics.evaluator")

REPORT_COLUMNS = (
    "n_utts", "cer", "edits", "ref_len",
    "latency_mean", "latency_p50", "latency_p90", "latency_interior_mean", "unmatched",
    "boundary_precision", "boundary_recall",
)

UTTERANCE_COLUMNS = ("utt_id", "ref_len", "edits", "n_emitted", "unmatched", "latency_mean", "hypothesis")


@dataclass
class UtteranceScore:
    """Вклад одного высказывания в отчет"""
    utt_id: str
    ref_len: int
    edits: int
    hypothesis: List[int]
    delays: List[int]
    interior: List[int]
    unmatched: int
    boundaries: BoundaryCounts


@dataclass
class EvalReport:
    """Отчет оценки; агрегаты - суммы по высказываниям"""
    mode: str
    scores: List[UtteranceScore] = field(default_factory=list)

    @property
    def n_utts(self) -> int:
        return len(self.scores)

    @property
    def edits(self) -> int:
        return sum(score.edits for score in self.scores)

    @property
    def ref_len(self) -> int:
        return sum(score.ref_len for score in self.scores)

    @property
    def cer(self) -> float:
        return self.edits / self.ref_len if self.ref_len else 0.0

    @property
    def delays(self) -> List[int]:
        return [delay for score in self.scores for delay in score.delays]

    @property
    def interior(self) -> List[int]:
        return [delay for score in self.scores for delay in score.interior]

    @property
    def unmatched(self) -> int:
        return sum(score.unmatched for score in self.scores)

    @property
    def boundaries(self) -> BoundaryCounts:
        total = BoundaryCounts(0, 0, 0)
        for score in self.scores:
            total = total + score.boundaries
        return total

    def latency(self, quantile: Optional[float] = None) -> Optional[float]:
        delays = self.delays
        if not delays:
            return None
        if quantile is None:
            return float(np.mean(delays))
        return float(np.percentile(delays, quantile))

    def row(self) -> dict:
        interior = self.interior
        return {
            "n_utts": self.n_utts,
            "cer": self.cer,
            "edits": self.edits,
            "ref_len": self.ref_len,
            "latency_mean": self.latency(),
            "latency_p50": self.latency(50),
            "latency_p90": self.latency(90),
            "latency_interior_mean": float(np.mean(interior)) if interior else None,
            "unmatched": self.unmatched,
            "boundary_precision": self.boundaries.precision if self.mode != "nonstreaming" else None,
            "boundary_recall": self.boundaries.recall if self.mode != "nonstreaming" else None,
        }


def score_utterance(utt: Utterance, result: DecodeResult, tolerance: int) -> UtteranceScore:
    latency = latency_stats(result.events, utt)
    return UtteranceScore(
        utt_id=utt.id,
        ref_len=utt.n_text,
        edits=edit_distance(utt.text, result.text),
        hypothesis=list(result.text),
        delays=latency.delays,
        interior=latency.interior,
        unmatched=latency.unmatched,
        boundaries=boundary_counts(result.events, utt, tolerance),
    )


def _score_chunk(args: Tuple[ModelParams, List[Utterance], DecodeConfig, int]) -> List[UtteranceScore]:
    params, utterances, config, tolerance = args
    return [score_utterance(utt, decode(params, utt.speech, config), tolerance) for utt in utterances]


def evaluate_params(
    params: ModelParams,
    utterances: Sequence[Utterance],
    config: DecodeConfig,
    tolerance: int = 2,
    workers: int = 1
) -> EvalReport:
    """
    Декодирование и оценка набора высказываний

    При workers > 1 высказывания делятся на непрерывные куски; порядок в отчете
    совпадает с исходным, поэтому результат не зависит от числа процессов.
    """
    utterances = list(utterances)
    if workers <= 1 or len(utterances) < 2:
        scores = _score_chunk((params, utterances, config, tolerance))
    else:
        bounds = np.linspace(0, len(utterances), workers + 1).astype(int)
        chunks = [(params, utterances[a:b], config, tolerance) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scores = [score for part in pool.map(_score_chunk, chunks) for score in part]
    return EvalReport(mode=config.mode, scores=scores)


def write_report(report: EvalReport, out_dir: Union[str, Path]) -> List[Path]:
    """Запись report.tsv, utterances.tsv и summary.txt"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formatter = ReportFormatter()

    report_path = out_dir / "report.tsv"
    report_path.write_text(formatter.format_tsv(REPORT_COLUMNS, [report.row()]), encoding="utf-8")

    rows = []
    for score in report.scores:
        rows.append({
            "utt_id": score.utt_id,
            "ref_len": score.ref_len,
            "edits": score.edits,
            "n_emitted": len(score.hypothesis),
            "unmatched": score.unmatched,
            "latency_mean": float(np.mean(score.delays)) if score.delays else None,
            "hypothesis": " ".join(str(token) for token in score.hypothesis),
        })
    utterances_path = out_dir / "utterances.tsv"
    utterances_path.write_text(formatter.format_tsv(UTTERANCE_COLUMNS, rows), encoding="utf-8")

    summary_path = out_dir / "summary.txt"
    summary_path.write_text(formatter.format_eval_summary(report.mode, report.row()) + "\n", encoding="utf-8")
    return [report_path, utterances_path, summary_path]


def evaluate(
    checkpoint: Union[str, Path],
    corpus_dir: Union[str, Path],
    config: DecodeConfig,
    out_dir: Union[str, Path],
    tolerance: int = 2,
    split: str = "test",
    workers: int = 1
) -> EvalReport:
    """
    Оценка чекпоинта на разбиении корпуса

    Args:
        checkpoint: Путь к чекпоинту без расширения
        corpus_dir: Каталог корпуса
        config: Настройки декодирования
        out_dir: Каталог для отчетов
        tolerance: Допуск сопоставления границ в кадрах
        split: Разбиение корпуса
        workers: Число процессов

    Returns:
        EvalReport: Отчет

    Raises:
        VocabMismatchError: Словари чекпоинта и корпуса не совпадают
    """
    params = load_checkpoint(checkpoint)
    utterances = list(load_corpus(corpus_dir, split, expected_vocab=params.config.vocab))
    logger.info(f"Оценка {checkpoint} на {split} ({len(utterances)} высказываний, режим {config.mode})")
    report = evaluate_params(params, utterances, config, tolerance, workers)
    write_report(report, out_dir)
    logger.info(f"CER={report.cer:.4f}, задержка={report.latency()}")
    return report
