"""
Logging setup and run metrics for solver runs
"""

import os
import time
import logging
from typing import Dict, Any, Optional

import psutil

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(log_dir: Optional[str] = None, level: int = logging.INFO) -> None:
    """Install file + console handlers. Safe to call more than once."""
    if log_dir is None:
        log_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'logs')
    os.makedirs(log_dir, exist_ok=True)
    log_file = os.path.join(log_dir, 'qpot.log')

    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler()
        ],
        force=True,
    )


class RunMetrics:
    """Collect wall/cpu time, memory and solver counters for one run"""

    def __init__(self):
        self.process = psutil.Process(os.getpid())
        self.stage_times: Dict[str, float] = {}
        self.counters: Dict[str, int] = {}
        self.peak_rss_mb = 0.0
        self._started = time.perf_counter()
        self._cpu_started = self._cpu_seconds()
        self._stage_start: Dict[str, float] = {}

    def _cpu_seconds(self) -> float:
        t = self.process.cpu_times()
        return t.user + t.system

    def _sample_memory(self):
        rss = self.process.memory_info().rss / 1024 / 1024
        self.peak_rss_mb = max(self.peak_rss_mb, rss)

    def start_stage(self, name: str):
        self._stage_start[name] = time.perf_counter()

    def end_stage(self, name: str) -> float:
        started = self._stage_start.pop(name, None)
        if started is None:
            return 0.0
        elapsed = time.perf_counter() - started
        self.stage_times[name] = self.stage_times.get(name, 0.0) + elapsed
        self._sample_memory()
        logger.info(f"Stage '{name}' finished in {elapsed:.3f}s")
        return elapsed

    def record_counters(self, counters: Dict[str, int]):
        for key, value in counters.items():
            self.counters[key] = self.counters.get(key, 0) + int(value)

    def timings(self) -> Dict[str, Any]:
        self._sample_memory()
        return {
            "wall_seconds": round(time.perf_counter() - self._started, 6),
            "cpu_seconds": round(self._cpu_seconds() - self._cpu_started, 6),
            "peak_rss_mb": round(self.peak_rss_mb, 2),
            "stages": {k: round(v, 6) for k, v in self.stage_times.items()},
        }

    def stats(self) -> Dict[str, int]:
        return dict(self.counters)


def get_system_health() -> Dict[str, Any]:
    """Host resource snapshot recorded in the run manifest"""
    try:
        memory = psutil.virtual_memory()
        return {
            "cpu_count": psutil.cpu_count(),
            "memory_total_mb": round(memory.total / 1024 / 1024, 1),
            "memory_percent": memory.percent,
        }
    except Exception as e:
        logger.warning(f"Could not read system health: {e}")
        return {}
