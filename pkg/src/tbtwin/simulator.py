"""Monte Carlo time-tag generation and the binary time-tag file format.

A stream is a numpy structured array with fields ``channel`` (u1) and
``timestamp`` (little-endian u8, picoseconds since run start), sorted by
timestamp with SYNC first among equal timestamps.

File layout (all little-endian)::

    magic    4 bytes  b"TBE1"
    version  u16      1
    count    u64      number of records
    reserved 2 bytes  zero
    records  count * 9 bytes: channel u8, timestamp u64
"""
from __future__ import annotations

import os
import struct
from dataclasses import asdict, dataclass
from enum import IntEnum

import numpy as np

from .analyzer import ALL_OUTCOMES, AnalyzerPhase, joint_distribution
from .errors import ConfigInvalid, TimeTagFormatError
from .source import SourceParams, emitted_density_matrix


class Channel(IntEnum):
    SYNC = 0
    XX1 = 1
    XX2 = 2
    X1 = 3
    X2 = 4


RECORD_DTYPE = np.dtype([("channel", "u1"), ("timestamp", "<u8")])
MAGIC = b"TBE1"
VERSION = 1
HEADER = struct.Struct("<4sHQ2s")
assert HEADER.size == 16 and RECORD_DTYPE.itemsize == 9

PS = 1e12


def xx_channel(port: int) -> Channel:
    return Channel.XX1 if port == 1 else Channel.XX2


def x_channel(port: int) -> Channel:
    return Channel.X1 if port == 1 else Channel.X2


@dataclass(frozen=True)
class RunConfig:
    """Per-run acquisition settings.

    ``rep_period``, ``jitter_sigma``, ``pair_prob``, ``det_efficiency``,
    ``dark_rate`` and ``channel_delay`` are not known for the reference
    experiment; the defaults are plausible desk values.
    """

    n_pulses: int = 1_000_000
    rep_period: float = 12.5e-9
    pair_prob: float = 0.5
    det_efficiency: float = 0.8
    jitter_sigma: float = 50e-12
    dark_rate: float = 100.0
    window: float = 1.28e-9
    seed: int = 0
    # fixed cable/electronics delay added to every detector channel
    channel_delay: float = 2e-9

    def __post_init__(self):
        if self.n_pulses < 0:
            raise ConfigInvalid("n_pulses must be non-negative")
        for name in ("pair_prob", "det_efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigInvalid(f"{name}={v} not in [0, 1]")
        if self.rep_period <= 0 or self.window <= 0:
            raise ConfigInvalid("rep_period and window must be positive")
        if self.jitter_sigma < 0 or self.dark_rate < 0 or self.channel_delay < 0:
            raise ConfigInvalid("jitter_sigma, dark_rate and channel_delay must be >= 0")

    def check_against(self, bin_delay: float) -> None:
        if not self.rep_period > 2 * bin_delay + self.window:
            raise ConfigInvalid(
                f"rep_period {self.rep_period} must exceed 2*bin_delay + window "
                f"= {2 * bin_delay + self.window}"
            )

    def to_dict(self) -> dict:
        return asdict(self)


def sample_cascade_times(tau_xx: float, tau_x: float, rng: np.random.Generator, size=None):
    """Emission times of the biexciton photon and the following exciton photon."""
    if tau_xx <= 0 or tau_x <= 0:
        raise ValueError("lifetimes must be positive")
    t_xx = rng.exponential(tau_xx, size)
    t_x = t_xx + rng.exponential(tau_x, size)
    return t_xx, t_x


def outcome_probabilities(source: SourceParams, phases: AnalyzerPhase) -> np.ndarray:
    dist = joint_distribution(emitted_density_matrix(source), phases)
    p = np.clip(np.array([dist[k] for k in ALL_OUTCOMES]), 0.0, None)
    return p / p.sum()


def simulate_run(source: SourceParams, phases: AnalyzerPhase, run: RunConfig) -> np.ndarray:
    """Generate one sorted time-tag stream for a fixed analyzer setting."""
    run.check_against(source.pump.bin_delay)
    rng = np.random.default_rng(run.seed)
    n = run.n_pulses
    period_ps = int(round(run.rep_period * PS))
    sync_t = np.arange(n, dtype=np.int64) * period_ps

    pulse = np.flatnonzero(rng.random(n) < run.pair_prob)
    m = pulse.size
    probs = outcome_probabilities(source, phases)
    which = rng.choice(len(ALL_OUTCOMES), size=m, p=probs)
    table = np.array(ALL_OUTCOMES, dtype=np.int64)
    port_xx, slot_xx, port_x, slot_x = table[which].T

    t_xx, t_x = sample_cascade_times(source.tau_xx, source.tau_x, rng, m)
    jit_xx = rng.normal(0.0, run.jitter_sigma, m) if run.jitter_sigma > 0 else 0.0
    jit_x = rng.normal(0.0, run.jitter_sigma, m) if run.jitter_sigma > 0 else 0.0
    keep_xx = rng.random(m) < run.det_efficiency
    keep_x = rng.random(m) < run.det_efficiency

    delay = source.pump.bin_delay
    base = sync_t[pulse] + run.channel_delay * PS
    ts_xx = np.rint(base + (slot_xx * delay + t_xx + jit_xx) * PS).astype(np.int64)
    ts_x = np.rint(base + (slot_x * delay + t_x + jit_x) * PS).astype(np.int64)
    ch_xx = np.where(port_xx == 1, Channel.XX1, Channel.XX2)
    ch_x = np.where(port_x == 1, Channel.X1, Channel.X2)

    parts_t = [sync_t, ts_xx[keep_xx], ts_x[keep_x]]
    parts_c = [
        np.full(n, Channel.SYNC, dtype=np.uint8),
        ch_xx[keep_xx].astype(np.uint8),
        ch_x[keep_x].astype(np.uint8),
    ]
    span_ps = n * period_ps
    for ch in (Channel.XX1, Channel.XX2, Channel.X1, Channel.X2):
        k = rng.poisson(run.dark_rate * n * run.rep_period) if n else 0
        parts_t.append(rng.integers(0, max(span_ps, 1), size=k, dtype=np.int64))
        parts_c.append(np.full(k, ch, dtype=np.uint8))

    t = np.concatenate(parts_t)
    c = np.concatenate(parts_c)
    np.clip(t, 0, None, out=t)
    order = np.lexsort((c, t))
    out = np.empty(t.size, dtype=RECORD_DTYPE)
    out["timestamp"] = t[order]
    out["channel"] = c[order]
    return out


def write_timetags(path: str | os.PathLike, stream: np.ndarray) -> None:
    stream = np.asarray(stream, dtype=RECORD_DTYPE)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, stream.size, b"\x00\x00"))
        fh.write(stream.tobytes())


def read_timetags(path: str | os.PathLike, mmap: bool = True) -> np.ndarray:
    """Load a time-tag file; by default the records are memory-mapped."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
    if len(head) != HEADER.size:
        raise TimeTagFormatError(f"{path}: truncated header")
    magic, version, count, _ = HEADER.unpack(head)
    if magic != MAGIC:
        raise TimeTagFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise TimeTagFormatError(f"{path}: unsupported version {version}")
    expected = HEADER.size + count * RECORD_DTYPE.itemsize
    size = os.path.getsize(path)
    if size != expected:
        raise TimeTagFormatError(f"{path}: {size} bytes on disk, header implies {expected}")
    if count == 0:
        return np.empty(0, dtype=RECORD_DTYPE)
    if mmap:
        return np.memmap(path, dtype=RECORD_DTYPE, mode="r", offset=HEADER.size, shape=(count,))
    return np.fromfile(path, dtype=RECORD_DTYPE, offset=HEADER.size, count=count)
