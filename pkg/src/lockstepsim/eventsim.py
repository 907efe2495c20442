"""Deterministic discrete-event core.

Simulated clocks, latency jitter models and a host-to-device kernel
submission model. Events are totally ordered by (time, insertion
sequence); handlers may schedule at or after the current time, never
before. One queue is one experiment; nothing here is shared between
experiments.

Time is integer nanoseconds since simulation start.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError, SimulationError
from .rng import Rng

SimTime = int

_NS_PER_S = 10**9
_PPM = 10**6


@dataclass(frozen=True)
class ClockDomain:
    """A clock with nominal frequency and a fixed drift in parts per million."""

    id: str
    freq_hz: int
    drift_ppm: int = 0

    def __post_init__(self):
        if self.freq_hz <= 0:
            raise ConfigError(f"clock {self.id!r}: freq_hz must be positive")
        if _PPM + self.drift_ppm <= 0:
            raise ConfigError(f"clock {self.id!r}: effective frequency must stay positive")


def cycles_to_time(cycles: int, clock: ClockDomain) -> int:
    """Duration in ns of `cycles` on `clock`, rounded to nearest (ties away
    from zero). Exact integer arithmetic: no float in the path."""
    if cycles < 0:
        raise SimulationError("negative cycle count")
    num = cycles * _NS_PER_S * _PPM
    den = clock.freq_hz * (_PPM + clock.drift_ppm)
    return (2 * num + den) // (2 * den)


@dataclass(frozen=True)
class JitterModel:
    """Parametric turnaround overhead: a base cost, an optional second mode
    and a geometric-tailed spike process for outliers."""

    base_overhead_ns: int = 0
    spike_prob: float = 0.0
    spike_scale_ns: int = 1
    mode2_offset_ns: int = 0
    mode2_prob: float = 0.0

    def __post_init__(self):
        if self.base_overhead_ns < 0:
            raise ConfigError("base_overhead_ns must be non-negative")
        if not (0.0 <= self.spike_prob <= 1.0):
            raise ConfigError("spike_prob must be within [0, 1]")
        if self.spike_scale_ns < 1:
            raise ConfigError("spike_scale_ns must be positive")
        if self.mode2_offset_ns < 0:
            raise ConfigError("mode2_offset_ns must be non-negative")
        if not (0.0 <= self.mode2_prob <= 1.0):
            raise ConfigError("mode2_prob must be within [0, 1]")


ZERO_JITTER = JitterModel()


def _sample_geometric(mean_ns: int, rng: Rng) -> int:
    """Geometric variate on {1, 2, ...} with the given mean, by inversion."""
    if mean_ns <= 1:
        return 1
    p = 1.0 / mean_ns
    u = rng.uniform()
    k = math.ceil(math.log1p(-u) / math.log1p(-p))
    return max(1, k)


def sample_turnaround_overhead(model: JitterModel, rng: Rng) -> int:
    """One overhead sample. Draw order is fixed (mode, then spike) so a
    stream replays identically regardless of which branches fire."""
    total = model.base_overhead_ns
    if rng.uniform() < model.mode2_prob:
        total += model.mode2_offset_ns
    if rng.uniform() < model.spike_prob:
        total += _sample_geometric(model.spike_scale_ns, rng)
    return total


@dataclass
class Event:
    time_ns: int
    seq: int
    kind: str
    payload: dict
    handler: object = None


class EventQueue:
    """Single-threaded event queue with a strict (time, seq) total order."""

    def __init__(self):
        self.now: int = 0
        self._seq = 0
        self._heap = []
        self.on_process = None  # optional callback(Event) after each event

    def next_seq(self) -> int:
        s = self._seq
        self._seq += 1
        return s

    def schedule(self, time_ns: int, kind: str, payload=None, handler=None) -> Event:
        if time_ns < self.now:
            raise SimulationError(
                f"event {kind!r} scheduled at {time_ns} ns, before current time {self.now} ns"
            )
        ev = Event(int(time_ns), self.next_seq(), kind, dict(payload or {}), handler)
        heapq.heappush(self._heap, (ev.time_ns, ev.seq, ev))
        return ev

    def _process_next(self) -> Event:
        _, _, ev = heapq.heappop(self._heap)
        self.now = ev.time_ns
        if ev.handler is not None:
            ev.handler(ev)
        if self.on_process is not None:
            self.on_process(ev)
        return ev

    def run_until(self, t: int) -> list:
        """Process every event with time <= t in (time, seq) order, then
        advance the clock to t. Returns the processed events."""
        if t < self.now:
            raise SimulationError(f"run_until({t}) would move time backwards from {self.now}")
        processed = []
        while self._heap and self._heap[0][0] <= t:
            processed.append(self._process_next())
        self.now = t
        return processed

    def run_all(self) -> list:
        """Process until the queue drains; the clock stays at the last event."""
        processed = []
        while self._heap:
            processed.append(self._process_next())
        return processed

    def __len__(self) -> int:
        return len(self._heap)


def write_event_log(events, fp) -> None:
    """Export processed events as JSON Lines."""
    for ev in events:
        rec = {"time_ns": ev.time_ns, "seq": ev.seq, "kind": ev.kind}
        for key in ("replica_id", "frame_id"):
            if key in ev.payload:
                rec[key] = ev.payload[key]
        fp.write(json.dumps(rec, separators=(",", ":")) + "\n")


@dataclass
class Host:
    """The feeder in front of a device; one jitter sample per submission."""

    jitter: JitterModel
    rng: Rng


@dataclass
class Device:
    """A compute device. In-order submissions queue FIFO behind free_at;
    out-of-order submissions start on arrival (parallel elements)."""

    id: int
    clock: ClockDomain
    free_at: int = 0


@dataclass
class KernelTask:
    cycles: int
    extra_delay_ns: int = 0
    tag: dict = field(default_factory=dict)


def submit_kernel(queue: EventQueue, host: Host, device: Device, task: KernelTask,
                  in_order: bool = True, handler=None) -> Event:
    """Submit one kernel at the current time; returns the completion event.

    The submission consumes one host jitter sample before the task reaches
    the device. With in_order the device starts the task only after all
    previously submitted tasks complete; otherwise it starts on arrival and
    completion order follows per-task durations.
    """
    if device is None:
        raise ConfigError("submit_kernel: unknown device")
    overhead = sample_turnaround_overhead(host.jitter, host.rng)
    arrival = queue.now + overhead
    start = max(arrival, device.free_at) if in_order else arrival
    completion = start + cycles_to_time(task.cycles, device.clock) + task.extra_delay_ns
    if in_order:
        device.free_at = completion
    payload = dict(task.tag)
    payload.update({"arrival_ns": arrival, "start_ns": start, "cycles": task.cycles})
    return queue.schedule(completion, "kernel_complete", payload, handler)
