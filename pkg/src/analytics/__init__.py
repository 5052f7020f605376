"""
Модуль метрик, оценки и абляций
"""

from src.analytics.metrics import cer, edit_distance, latency_stats
from src.analytics.reports import ReportFormatter

__all__ = [
    'cer',
    'edit_distance',
    'latency_stats',
    'ReportFormatter'
]
