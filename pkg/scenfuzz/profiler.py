"""
Rollout Performance Profiler
Times campaign phases and tracks resident memory with psutil
"""

import logging
import time
from collections import defaultdict
from contextlib import contextmanager
from typing import Any, Dict, List

import psutil


class RolloutProfiler:
    """Performance profiler for campaign phases"""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.metrics: Dict[str, List[Dict[str, float]]] = defaultdict(list)
        self.process = psutil.Process()
        self.logger = logging.getLogger("scenfuzz.profiler")

    def _rss_mb(self) -> float:
        return self.process.memory_info().rss / 1024 / 1024

    @contextmanager
    def profile_operation(self, operation_name: str):
        """Context manager for profiling one phase"""
        if not self.enabled:
            yield self
            return
        start_time = time.perf_counter()
        start_memory = self._rss_mb()
        try:
            yield self
        finally:
            self.record(operation_name, time.perf_counter() - start_time, self._rss_mb() - start_memory)

    def record(self, operation_name: str, duration: float, memory_delta: float = 0.0) -> None:
        """Add a measurement taken elsewhere, e.g. in a rollout worker"""
        if not self.enabled:
            return
        self.metrics[operation_name].append({"duration": duration, "memory_delta": memory_delta})
        self.logger.debug(f"{operation_name}: {duration:.3f}s, Memory: {memory_delta:+.1f}MB")

    def get_performance_report(self) -> Dict[str, Any]:
        """Per-phase statistics plus recommendations"""
        report: Dict[str, Any] = {"summary": {}, "operations": {}, "recommendations": []}
        total_time = 0.0
        total_operations = 0

        for operation, measurements in self.metrics.items():
            if not measurements:
                continue
            durations = [m["duration"] for m in measurements]
            memory_deltas = [m["memory_delta"] for m in measurements]
            op_stats = {
                "count": len(measurements),
                "total_time": sum(durations),
                "avg_time": sum(durations) / len(durations),
                "min_time": min(durations),
                "max_time": max(durations),
                "max_memory_delta": max(memory_deltas),
            }
            report["operations"][operation] = op_stats
            total_time += op_stats["total_time"]
            total_operations += op_stats["count"]

            if operation == "rollout" and op_stats["avg_time"] > 5:
                report["recommendations"].append(
                    f"Rollouts are slow (avg: {op_stats['avg_time']:.1f}s). Consider a larger dt or more workers."
                )
            if operation == "append" and op_stats["avg_time"] > 0.5:
                report["recommendations"].append(
                    "Appending rows is slow; the campaign directory may be on a slow or remote disk."
                )

        report["summary"] = {
            "total_time": total_time,
            "total_operations": total_operations,
            "avg_operation_time": total_time / total_operations if total_operations > 0 else 0,
            "peak_rss_mb": self._rss_mb(),
        }
        return report
