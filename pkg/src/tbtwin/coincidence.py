"""Reduction of time-tag streams: arrival histograms and triple coincidences.

All time arithmetic inside the kernels is done on integer picoseconds. Each
kernel is a single pass over a sorted stream and keeps only the current
SYNC time, the per-cycle candidate events and the output accumulators.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numba
import numpy as np

from .analyzer import (
    ALL_OUTCOMES,
    PORTS,
    X_BASIS_SETTING,
    Y_BASIS_SETTING,
    AnalyzerPhase,
    OutcomeKey,
)
from .errors import EmptyCells, NoSyncSeen
from .simulator import PS, Channel

DEFAULT_BIN_WIDTH = 16e-12
N_CHANNELS = 5
DETECTOR_CHANNELS = (Channel.XX1, Channel.XX2, Channel.X1, Channel.X2)


def _ps(seconds: float) -> int:
    return int(round(seconds * PS))


@numba.njit(cache=True, nogil=True)
def _histogram_kernel(channels, timestamps, lo_ps, bin_ps, nbins):
    counts = np.zeros((5, nbins), dtype=np.int64)
    dropped = np.zeros(5, dtype=np.int64)
    no_sync = np.zeros(5, dtype=np.int64)
    last_sync = np.int64(-1)
    for i in range(channels.shape[0]):
        ch = channels[i]
        t = np.int64(timestamps[i])
        if ch == 0:
            last_sync = t
            continue
        if last_sync < 0:
            no_sync[ch] += 1
            continue
        rel = t - last_sync - lo_ps
        if rel < 0:
            dropped[ch] += 1
            continue
        b = rel // bin_ps
        if b < nbins:
            counts[ch, b] += 1
        else:
            dropped[ch] += 1
    return counts, dropped, no_sync


@numba.njit(cache=True, nogil=True)
def _classify(rel, delay_ps, half_ps):
    # nearest slot centre, accepted only inside the window
    if rel < -half_ps:
        return -1
    k = (rel + delay_ps // 2) // delay_ps
    if k < 0 or k > 2:
        return -1
    d = rel - k * delay_ps
    if d < 0:
        d = -d
    if d <= half_ps:
        return k
    return -1


@numba.njit(cache=True, nogil=True)
def _triples_kernel(channels, timestamps, offsets_ps, delay_ps, half_ps):
    # cells[port_xx-1, slot_xx, port_x-1, slot_x]
    cells = np.zeros((2, 3, 2, 3), dtype=np.int64)
    # audit: syncs, accepted xx, accepted x, rejected, no_sync, extra_xx, extra_x, paired
    audit = np.zeros(8, dtype=np.int64)
    last_sync = np.int64(-1)
    xx_port = -1
    xx_slot = -1
    x_port = -1
    x_slot = -1
    for i in range(channels.shape[0]):
        ch = channels[i]
        t = np.int64(timestamps[i])
        if ch == 0:
            if xx_port >= 0 and x_port >= 0:
                cells[xx_port, xx_slot, x_port, x_slot] += 1
                audit[7] += 1
            xx_port = -1
            x_port = -1
            last_sync = t
            audit[0] += 1
            continue
        if last_sync < 0:
            audit[4] += 1
            continue
        s = _classify(t - last_sync - offsets_ps[ch], delay_ps, half_ps)
        if s < 0:
            audit[3] += 1
            continue
        if ch <= 2:
            audit[1] += 1
            if xx_port < 0:
                xx_port = ch - 1
                xx_slot = s
            else:
                audit[5] += 1
        else:
            audit[2] += 1
            if x_port < 0:
                x_port = ch - 3
                x_slot = s
            else:
                audit[6] += 1
    if xx_port >= 0 and x_port >= 0:
        cells[xx_port, xx_slot, x_port, x_slot] += 1
        audit[7] += 1
    return cells, audit


AUDIT_FIELDS = (
    "syncs",
    "accepted_xx",
    "accepted_x",
    "rejected",
    "no_sync",
    "extra_xx",
    "extra_x",
    "paired_cycles",
)


def _columns(stream):
    return np.asarray(stream["channel"]), np.asarray(stream["timestamp"])


@dataclass
class ArrivalHistogram:
    channel: Channel
    bin_width: float
    start: float
    counts: np.ndarray
    dropped: int = 0
    no_sync: int = 0

    @property
    def bin_centers(self) -> np.ndarray:
        return self.start + (np.arange(self.counts.size) + 0.5) * self.bin_width

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t_center_s,count\n")
        for t, c in zip(self.bin_centers, self.counts):
            buf.write(f"{t:.6e},{int(c)}\n")
        return buf.getvalue()


def build_histograms(
    stream,
    channels=DETECTOR_CHANNELS,
    bin_width: float = DEFAULT_BIN_WIDTH,
    range: tuple[float, float] = (0.0, 12.5e-9),
    strict: bool = False,
) -> dict[Channel, ArrivalHistogram]:
    """SYNC-relative arrival histograms for several channels in one pass."""
    lo, hi = range
    bin_ps = max(_ps(bin_width), 1)
    nbins = int(np.ceil((_ps(hi) - _ps(lo)) / bin_ps))
    ch, ts = _columns(stream)
    counts, dropped, no_sync = _histogram_kernel(ch, ts, _ps(lo), bin_ps, nbins)
    if strict and no_sync.any():
        raise NoSyncSeen(f"{int(no_sync.sum())} events precede the first SYNC")
    return {
        Channel(c): ArrivalHistogram(
            Channel(c), bin_ps / PS, lo, counts[c].copy(), int(dropped[c]), int(no_sync[c])
        )
        for c in channels
    }


def build_histogram(stream, channel, bin_width=DEFAULT_BIN_WIDTH, range=(0.0, 12.5e-9), strict=False):
    return build_histograms(stream, (Channel(channel),), bin_width, range, strict)[Channel(channel)]


def classify_slot(t_rel: float, delay: float, window: float, offset: float = 0.0):
    """Slot index 0, 1 or 2 for a SYNC-relative time, or None if rejected."""
    if not window < delay:
        raise ValueError("window must be shorter than the bin delay")
    s = _classify(_ps(t_rel) - _ps(offset), _ps(delay), _ps(window) // 2)
    return None if s < 0 else int(s)


def calibrate_offsets(
    hists: dict[Channel, ArrivalHistogram], delay: float, smooth: int = 5
) -> dict[Channel, float]:
    """Per-channel time of the first arrival peak.

    The three peaks have identical shapes, so the mode of the first one is
    found as the argmax of the comb sum h(t) + h(t + delay) + h(t + 2 delay)
    after a short boxcar smoothing.
    """
    out = {}
    for ch, h in hists.items():
        step = int(round(delay / h.bin_width))
        c = h.counts.astype(float)
        if smooth > 1:
            c = np.convolve(c, np.ones(smooth) / smooth, mode="same")
        n = c.size - 2 * step
        if n <= 0 or h.counts.sum() == 0:
            out[ch] = 0.0
            continue
        comb = c[:n] + c[step : step + n] + c[2 * step : 2 * step + n]
        out[ch] = h.start + (int(np.argmax(comb)) + 0.5) * h.bin_width
    return out


@dataclass
class CoincidenceTable:
    """Triple-coincidence counts per (port_xx, slot_xx, port_x, slot_x) cell."""

    cells: np.ndarray = field(default_factory=lambda: np.zeros((2, 3, 2, 3), dtype=np.int64))
    exposure: int = 0
    phase: AnalyzerPhase = field(default_factory=AnalyzerPhase)
    audit: dict = field(default_factory=dict)

    def __getitem__(self, key) -> int:
        k = OutcomeKey(*key)
        return int(self.cells[k.port_xx - 1, k.slot_xx, k.port_x - 1, k.slot_x])

    @property
    def counts(self) -> dict[OutcomeKey, int]:
        return {k: self[k] for k in ALL_OUTCOMES}

    @property
    def total(self) -> int:
        return int(self.cells.sum())

    def __add__(self, other: "CoincidenceTable") -> "CoincidenceTable":
        audit = {k: self.audit.get(k, 0) + other.audit.get(k, 0) for k in set(self.audit) | set(other.audit)}
        return CoincidenceTable(self.cells + other.cells, self.exposure + other.exposure, self.phase, audit)

    def slot_sum_histogram(self, port_xx: int | None = None, port_x: int | None = None) -> np.ndarray:
        """Counts grouped by slot_xx + slot_x (0..4): the five-peak structure."""
        sel = self.cells
        if port_xx is not None:
            sel = sel[port_xx - 1 : port_xx]
        if port_x is not None:
            sel = sel[:, :, port_x - 1 : port_x]
        per_slot = sel.sum(axis=(0, 2))
        out = np.zeros(5, dtype=np.int64)
        for a in range(3):
            for b in range(3):
                out[a + b] += per_slot[a, b]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(
            f"# exposure={self.exposure} phi_xx={self.phase.phi_xx!r} phi_x={self.phase.phi_x!r}\n"
        )
        buf.write("port_xx,slot_xx,port_x,slot_x,count\n")
        for k in ALL_OUTCOMES:
            buf.write(f"{k.port_xx},{k.slot_xx},{k.port_x},{k.slot_x},{self[k]}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CoincidenceTable":
        meta = {}
        t = cls()
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for item in line[1:].split():
                    key, _, val = item.partition("=")
                    meta[key] = val
                continue
            if line.startswith("port_xx"):
                continue
            pa, sa, pb, sb, n = (int(v) for v in line.split(","))
            t.cells[pa - 1, sa, pb - 1, sb] = n
        t.exposure = int(meta.get("exposure", 0))
        t.phase = AnalyzerPhase(float(meta.get("phi_xx", 0.0)), float(meta.get("phi_x", 0.0)))
        return t


def extract_triples(
    stream,
    delay: float,
    window: float,
    offsets: dict,
    phase: AnalyzerPhase | None = None,
) -> CoincidenceTable:
    """Classify SYNC-XX-X triple coincidences into (port, slot) cells.

    When an arm sees more than one accepted event in a cycle the earliest one
    is used; equal timestamps resolve to the lower channel number.
    """
    if not window < delay:
        raise ValueError("window must be shorter than the bin delay")
    off = np.zeros(N_CHANNELS, dtype=np.int64)
    for ch, v in offsets.items():
        off[int(ch)] = _ps(v)
    ch, ts = _columns(stream)
    cells, audit = _triples_kernel(ch, ts, off, _ps(delay), _ps(window) // 2)
    audit_d = dict(zip(AUDIT_FIELDS, (int(v) for v in audit)))
    return CoincidenceTable(cells, audit_d["syncs"], phase or AnalyzerPhase(), audit_d)


def _contrast(a: float, b: float) -> tuple[float, float]:
    tot = a + b
    if tot <= 0:
        raise EmptyCells("no counts in the required cells")
    v = (a - b) / tot
    sigma = 2.0 * np.sqrt(a * b / tot**3)
    return v, float(sigma)


def _same_phase(p: AnalyzerPhase, q: AnalyzerPhase) -> bool:
    return bool(
        np.isclose(np.cos(p.phi_xx - q.phi_xx), 1.0) and np.isclose(np.cos(p.phi_x - q.phi_x), 1.0)
    )


def visibility_from_counts(
    tables, basis: str, port_pair: tuple[int, int] | None = None
) -> tuple[float, float]:
    """Measured visibility and its Poisson standard error.

    ``time`` compares same-bin with cross-bin side-peak coincidences over all
    given tables. ``X`` and ``Y`` use the middle-middle cells of the (0, 0)
    and (pi/2, pi/2) runs respectively: port-correlated against
    port-anticorrelated counts, i.e. the fringe at phase sums s and s + pi.
    ``port_pair`` restricts the time basis to one pair of outputs.
    """
    tables = list(tables)
    if basis == "time":
        pairs = [port_pair] if port_pair else [(a, b) for a in PORTS for b in PORTS]
        same = cross = 0
        for t in tables:
            for a, b in pairs:
                same += t[a, 0, b, 0] + t[a, 2, b, 2]
                cross += t[a, 0, b, 2] + t[a, 2, b, 0]
        return _contrast(same, cross)
    if basis in ("X", "Y"):
        target = X_BASIS_SETTING if basis == "X" else Y_BASIS_SETTING
        chosen = [t for t in tables if _same_phase(t.phase, target)]
        if not chosen:
            raise EmptyCells(f"no table at the {basis}-basis setting {target.label}")
        cells = {(a, b): sum(t[a, 1, b, 1] for t in chosen) for a in PORTS for b in PORTS}
        same = cells[1, 1] + cells[2, 2]
        opp = cells[1, 2] + cells[2, 1]
        v, sigma = _contrast(same, opp)
        return abs(v), sigma
    raise ValueError(f"unknown basis {basis!r}")


def group_contrast(table_a: CoincidenceTable, table_b: CoincidenceTable, counts_a: float, counts_b: float):
    """Exposure-normalized contrast (max - min)/(max + min) between two runs."""
    ra = counts_a / table_a.exposure
    rb = counts_b / table_b.exposure
    hi, lo = max(ra, rb), min(ra, rb)
    v = (hi - lo) / (hi + lo)
    # relative Poisson errors of each rate
    ea = ra / np.sqrt(max(counts_a, 1))
    eb = rb / np.sqrt(max(counts_b, 1))
    dv_da = 2 * rb / (ra + rb) ** 2
    dv_db = 2 * ra / (ra + rb) ** 2
    return v, float(np.hypot(dv_da * ea, dv_db * eb))
