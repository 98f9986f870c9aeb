# src/monitoring/__init__.py
"""Throughput benchmarking."""

from .performance_monitor import BenchReport, PerformanceMonitor, hardware_info

__all__ = [
    'BenchReport',
    'PerformanceMonitor',
    'hardware_info',
]
