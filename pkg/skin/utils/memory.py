"""
SkIn - Memory Monitoring
Tracks process and system RAM for run logs and benchmark points.
"""

import psutil
from typing import Dict, List


class MemoryMonitor:
    """
    Monitors resident memory of this process and system RAM usage.

    Used for:
    - Tagging run events with the current footprint
    - Recording resident memory next to each benchmark point
    - Warning when a sweep is about to exhaust the machine
    """

    def __init__(self, max_ram_percent: float = 85.0):
        """
        Initialize memory monitor.

        Args:
            max_ram_percent: System RAM usage above which warnings are reported.
        """
        self.max_ram_percent = max_ram_percent
        self._process = psutil.Process()

    def get_rss_mb(self) -> float:
        """Resident set size of this process in MB."""
        return self._process.memory_info().rss / (1024 ** 2)

    def get_ram_info(self) -> Dict[str, float]:
        """Get current system RAM usage information."""
        mem = psutil.virtual_memory()
        return {
            "total_gb": mem.total / (1024 ** 3),
            "used_gb": mem.used / (1024 ** 3),
            "available_gb": mem.available / (1024 ** 3),
            "percent": mem.percent
        }

    def warnings(self) -> List[str]:
        ram = self.get_ram_info()
        if ram["percent"] > self.max_ram_percent:
            return [f"RAM usage ({ram['percent']:.1f}%) exceeds threshold ({self.max_ram_percent}%)"]
        return []

    def get_memory_mb(self) -> int:
        """Get current process RSS in whole MB (for logging)."""
        return int(self.get_rss_mb())
