"""Run event log and memory monitor."""

from skin.utils import MemoryMonitor, RunLogger


class FixedMonitor(MemoryMonitor):
    def get_rss_mb(self) -> float:
        return 123.9


def test_events_append_as_jsonl(tmp_path):
    events = RunLogger(tmp_path / "run", "train", run_id="abc", monitor=FixedMonitor())
    events.log("stage1", "start", docs=17)
    events.log("stage1", "epoch", epoch=1, mean_loss=0.5)
    events.log("stage3", "done")

    rows = RunLogger.load_events(events.log_file)
    assert [(r["stage"], r["event"]) for r in rows] == [
        ("stage1", "start"), ("stage1", "epoch"), ("stage3", "done"),
    ]
    assert all(r["run_id"] == "abc" and r["memory_mb"] == 123 for r in rows)
    assert rows[1]["payload"] == {"epoch": 1, "mean_loss": 0.5}
    assert rows[0]["timestamp"].endswith("Z")
    assert [e.event for e in events.get_entries("stage1")] == ["start", "epoch"]
    assert len(events.get_entries()) == 3


def test_second_logger_appends(tmp_path):
    RunLogger(tmp_path, "train").log("stage1", "start")
    second = RunLogger(tmp_path, "train")
    second.log("stage1", "start")
    rows = RunLogger.load_events(second.log_file)
    assert len(rows) == 2
    assert rows[0]["run_id"] != rows[1]["run_id"]


def test_memory_warning_threshold():
    assert MemoryMonitor(max_ram_percent=100.0).warnings() == []
    warnings = MemoryMonitor(max_ram_percent=-1.0).warnings()
    assert len(warnings) == 1 and "exceeds threshold" in warnings[0]
    assert MemoryMonitor().get_memory_mb() > 0
