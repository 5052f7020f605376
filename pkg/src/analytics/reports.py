"""
Модуль для форматирования отчетов оценки и абляций
"""

from typing import Any, Dict, Iterable, List, Sequence


class ReportFormatter:
    """
    Класс для форматирования отчетов
    """

    MODE_NAMES_RU = {
        'bti': 'BTI (границы + отдельный текст)',
        'tti': 'TTI (текст в речевом потоке)',
        'nonstreaming': 'Непотоковый (глобальная маска)',
    }

    @staticmethod
    def format_value(value: Any) -> str:
        """
        Форматирование значения ячейки

        Args:
            value: Значение

        Returns:
            str: Строка для TSV/markdown (NA для отсутствующих)
        """
        if value is None:
            return "NA"
        if isinstance(value, bool):
            return "1" if value else "0"
        if isinstance(value, float):
            return f"{value:.6f}"
        return str(value)

    def format_tsv(self, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
        """
        Форматирование TSV с фиксированным порядком колонок

        Args:
            columns: Колонки
            rows: Строки

        Returns:
            str: TSV с заголовком и переводом строки в конце
        """
        lines = ["\t".join(columns)]
        for row in rows:
            lines.append("\t".join(self.format_value(row.get(column)) for column in columns))
        return "\n".join(lines) + "\n"

    def format_eval_summary(self, mode: str, row: Dict[str, Any]) -> str:
        """
        Форматирование итогов оценки

        Args:
            mode: Режим декодирования
            row: Строка отчета

        Returns:
            str: Отформатированный отчет
        """
        if not row.get('n_utts'):
            return "📊 Нет данных для отображения"

        report_lines = []
        report_lines.append(f"📊 ОЦЕНКА: {self.MODE_NAMES_RU.get(mode, mode)}\n")

        report_lines.append("🎯 ТОЧНОСТЬ:")
        report_lines.append(f"├─ Высказываний: {row['n_utts']}")
        report_lines.append(f"├─ Ошибок: {row['edits']} из {row['ref_len']} символов")
        report_lines.append(f"└─ CER: {row['cer'] * 100:.2f}%")

        if row.get('latency_mean') is not None:
            report_lines.append("\n⏱ ЗАДЕРЖКА (кадры):")
            report_lines.append(f"├─ Средняя: {row['latency_mean']:.2f}")
            report_lines.append(f"├─ p50: {row['latency_p50']:.1f}")
            report_lines.append(f"├─ p90: {row['latency_p90']:.1f}")
            report_lines.append(f"└─ Без сопоставления: {row['unmatched']}")

        if row.get('boundary_precision') is not None:
            report_lines.append("\n🔔 ГРАНИЦЫ:")
            report_lines.append(f"├─ Точность: {row['boundary_precision'] * 100:.1f}%")
            report_lines.append(f"└─ Полнота: {row['boundary_recall'] * 100:.1f}%")

        return '\n'.join(report_lines)

    def format_ablation_markdown(self, rows: List[Dict[str, Any]], n_seeds: int) -> str:
        """
        Форматирование таблицы абляций

        Args:
            rows: Строки (variant, cer, latency_mean, boundary_precision, boundary_recall)
            n_seeds: Число зерен, по которым взята медиана

        Returns:
            str: Markdown-таблица
        """
        lines = [
            "| Вариант | CER, % | Задержка, кадры | Точность границ | Полнота границ |",
            "|---|---:|---:|---:|---:|",
        ]
        for row in rows:
            latency = row.get('latency_mean')
            precision = row.get('boundary_precision')
            recall = row.get('boundary_recall')
            lines.append(
                f"| {row['variant']} "
                f"| {row['cer'] * 100:.2f} "
                f"| {'-' if latency is None else f'{latency:.2f}'} "
                f"| {'-' if precision is None else f'{precision * 100:.1f}'} "
                f"| {'-' if recall is None else f'{recall * 100:.1f}'} |"
            )
        lines.append("")
        lines.append(f"Медиана по {n_seeds} зернам.")
        return '\n'.join(lines) + "\n"

    def format_epoch(self, epoch: int, row: Dict[str, Any]) -> str:
        """
        Форматирование строки лога эпохи

        Args:
            epoch: Номер эпохи
            row: Метрики эпохи

        Returns:
            str: Однострочный итог
        """
        dev_cer = row.get('dev_cer')
        dev = "NA" if dev_cer is None else f"{dev_cer * 100:.2f}%"
        return (
            f"📈 Эпоха {epoch}: "
            f"speech={row['speech_loss']:.4f}, "
            f"boundary={row['boundary_loss']:.4f}, "
            f"text={row['text_loss']:.4f}, "
            f"dev CER={dev}"
        )
