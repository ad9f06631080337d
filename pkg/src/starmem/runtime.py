"""Two-role runtime: one frame-handler writer, any number of anytime readers.

The writer builds a complete new memory version per frame and publishes it by
swapping a single reference; readers snapshot whatever version is currently
published. Published versions are never mutated, so a snapshot is always
internally consistent without blocking the writer.
"""

from __future__ import annotations

import logging
import statistics
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .features import FeatureMap, MemoryConfig
from .memory import (
    EmptyMemoryError,
    MemorySnapshot,
    StarMemory,
    snapshot,
    token_count,
    write_frame,
)

log = logging.getLogger("starmem")


class StreamOrderError(ValueError):
    """Source emitted non-increasing timestamps."""


@dataclass
class StreamSource:
    """A finite or unbounded timed sequence of feature maps.

    labels is an optional evaluation-only side channel mapping frame_index to
    a ground-truth event id.
    """

    frames: Iterable[FeatureMap]
    fps: float
    labels: np.ndarray | None = None

    def __iter__(self) -> Iterator[FeatureMap]:
        return iter(self.frames)


@dataclass
class RuntimeMetrics:
    write_latencies_s: list[float] = field(default_factory=list)
    snapshot_latencies_s: list[float] = field(default_factory=list)
    tokens_per_epoch: list[int] = field(default_factory=list)
    epochs_completed: int = 0
    nonconvergence_count: int = 0

    def median_write_latency_s(self) -> float:
        if not self.write_latencies_s:
            return 0.0
        return statistics.median(self.write_latencies_s)


class MemoryHandle:
    """Shared handle around the single published memory version.

    write() must only be called from one writer; latest()/read_snapshot()
    are safe from any thread and never block the writer.
    """

    def __init__(self, config: MemoryConfig):
        self._lock = threading.Lock()
        self._current = StarMemory.new(config)

    def latest(self) -> StarMemory:
        return self._current

    def write(self, e: FeatureMap) -> StarMemory:
        new = write_frame(self._current, e)
        with self._lock:
            self._current = new
        return new


def query_snapshot(handle: MemoryHandle) -> MemorySnapshot:
    """Consistent snapshot of the latest published epoch."""
    mem = handle.latest()
    if mem.epoch == 0:
        raise EmptyMemoryError("no frames written yet")
    return snapshot(mem)


def run_frame_handler(
    source: StreamSource,
    handle: MemoryHandle,
    realtime: bool = False,
    metrics: RuntimeMetrics | None = None,
) -> RuntimeMetrics:
    """Write every source frame in order, optionally pacing by timestamps.

    Real-time mode sleeps so each frame lands no earlier than its timestamp
    offset from the first frame; fast mode ignores pacing entirely.
    """
    m = metrics if metrics is not None else RuntimeMetrics()
    start = time.perf_counter()
    first_ts = None
    last_ts = None
    for frame in source:
        if last_ts is not None and frame.timestamp_s <= last_ts:
            raise StreamOrderError(
                f"timestamp {frame.timestamp_s} not after {last_ts}"
            )
        last_ts = frame.timestamp_s
        if realtime:
            if first_ts is None:
                first_ts = frame.timestamp_s
            due = start + (frame.timestamp_s - first_ts)
            delay = due - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
        t0 = time.perf_counter()
        mem = handle.write(frame)
        m.write_latencies_s.append(time.perf_counter() - t0)
        m.tokens_per_epoch.append(token_count(mem))
        m.epochs_completed = mem.epoch
        if not mem.temporal.converged:
            m.nonconvergence_count += 1
    log.debug(
        "frame handler done: %d epochs, median write %.3f ms",
        m.epochs_completed, 1e3 * m.median_write_latency_s(),
    )
    return m
