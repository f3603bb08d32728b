"""
SkIn - Utilities
Memory monitoring and structured run logging.
"""

from .memory import MemoryMonitor
from .logging import LogEntry, RunLogger, setup_logging

__all__ = ["MemoryMonitor", "LogEntry", "RunLogger", "setup_logging"]
