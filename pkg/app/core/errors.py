"""
Hirarki exception untuk perfect-sim
"""
from typing import Any, Optional


class PerfectSimError(Exception):
    """
    Base class semua error perfect-sim
    """


class ParameterError(PerfectSimError, ValueError):
    """
    Parameter atau konfigurasi tidak valid
    """


class CouplingError(PerfectSimError):
    """
    Prekondisi geometri coupling dilanggar
    """


class UnresolvedTraceError(PerfectSimError):
    """
    Trace belum coalesce sehingga estimator atau string tidak terdefinisi
    """

    def __init__(self, message: str, trace: Optional[Any] = None):
        super().__init__(message)
        self.trace = trace


class StatisticsError(PerfectSimError):
    """
    Input statistik kosong atau degenerate
    """
