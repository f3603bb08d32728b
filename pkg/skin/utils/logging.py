"""
SkIn - Run Logging
Structured JSONL event log for one command invocation.
"""

import json
import logging
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Any, Optional, List
from dataclasses import dataclass, asdict, field

from .memory import MemoryMonitor


@dataclass
class LogEntry:
    """A single event of the run."""
    timestamp: str
    run_id: str
    stage: str
    event: str
    memory_mb: int
    payload: Dict[str, Any] = field(default_factory=dict)


class RunLogger:
    """
    Appends run events to `<out>/events.jsonl`.

    The file is append-only (one JSON object per line) so an interrupted
    and resumed run keeps a single history. Timestamps and memory make it
    the one output that differs between reruns.
    """

    def __init__(
        self,
        out_dir: Path,
        command: str,
        run_id: Optional[str] = None,
        monitor: Optional[MemoryMonitor] = None,
    ):
        """
        Initialize run logger.

        Args:
            out_dir: Output directory of the command.
            command: Subcommand name (synth, train, eval, bench, inspect).
            run_id: Identifier shared by all events; random when omitted.
            monitor: Memory monitor used to tag events.
        """
        self.out_dir = Path(out_dir)
        self.command = command
        self.run_id = run_id or uuid.uuid4().hex[:12]
        self.monitor = monitor or MemoryMonitor()
        self.log_file = self.out_dir / "events.jsonl"
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._entries: List[LogEntry] = []

    def log(self, stage: str, event: str, **payload: Any) -> LogEntry:
        """
        Record one event.

        Args:
            stage: Pipeline stage (synth, stage1, stage2, stage3, eval, bench, ...).
            event: Short event name (start, epoch, done, sample, ...).
            **payload: JSON-serializable details.
        """
        entry = LogEntry(
            timestamp=datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            run_id=self.run_id,
            stage=stage,
            event=event,
            memory_mb=self.monitor.get_memory_mb(),
            payload=payload,
        )
        self._entries.append(entry)
        with open(self.log_file, 'a', encoding='utf-8') as f:
            f.write(json.dumps(asdict(entry), ensure_ascii=False, default=str) + '\n')
        return entry

    def get_entries(self, stage: Optional[str] = None) -> List[LogEntry]:
        if stage:
            return [e for e in self._entries if e.stage == stage]
        return self._entries.copy()

    @classmethod
    def load_events(cls, log_file: Path) -> List[Dict[str, Any]]:
        """Read an events file back as a list of dicts."""
        entries = []
        with open(log_file, 'r', encoding='utf-8') as f:
            for line in f:
                if line.strip():
                    entries.append(json.loads(line))
        return entries


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Configure the root logger once for a CLI process."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        force=True,
    )
