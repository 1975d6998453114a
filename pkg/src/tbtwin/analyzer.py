"""Unbalanced analyzing interferometers as three-slot, two-port POVMs.

Each analyzer output port shows three arrival peaks ("slots"):

* slot 0: early photon through the short arm, projector |0><0| / 4
* slot 1: early-long or late-short, the interfering peak, (1/2)|chi><chi|
  with |chi> = (|0> + s e^{i phi}|1>)/sqrt(2)
* slot 2: late photon through the long arm, projector |1><1| / 4

Port 1 carries ``s = +1`` and port 2 ``s = -1``. With this convention the
middle-middle rate of ports (a, b) is ``1 + s_a s_b V cos(sum - phi_P)``, which
is the Franson rate ``1 - i j V cos(...)`` with the labels of one arm's ports
exchanged.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .qstate import DensityMatrix, KET0, KET1, kron

PORTS = (1, 2)
SLOTS = (0, 1, 2)
TWO_PI = 2 * np.pi


def port_sign(port: int) -> int:
    if port == 1:
        return 1
    if port == 2:
        return -1
    raise ValueError(f"port must be 1 or 2, got {port}")


@dataclass(frozen=True)
class AnalyzerPhase:
    phi_xx: float = 0.0
    phi_x: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phi_xx", float(np.mod(self.phi_xx, TWO_PI)))
        object.__setattr__(self, "phi_x", float(np.mod(self.phi_x, TWO_PI)))

    @property
    def phase_sum(self) -> float:
        return float(np.mod(self.phi_xx + self.phi_x, TWO_PI))

    @property
    def label(self) -> str:
        """Phase setting in whole degrees, e.g. ``90_0``."""
        return f"{round(np.degrees(self.phi_xx)) % 360}_{round(np.degrees(self.phi_x)) % 360}"

    @classmethod
    def from_degrees(cls, phi_xx: float, phi_x: float) -> "AnalyzerPhase":
        return cls(np.radians(phi_xx), np.radians(phi_x))

    def to_dict(self) -> dict:
        return {"phi_xx": self.phi_xx, "phi_x": self.phi_x}


DEFAULT_PHASE_SETTINGS = (
    AnalyzerPhase(0.0, 0.0),
    AnalyzerPhase(np.pi / 2, 0.0),
    AnalyzerPhase(0.0, np.pi / 2),
    AnalyzerPhase(np.pi / 2, np.pi / 2),
)


class OutcomeKey(NamedTuple):
    port_xx: int
    slot_xx: int
    port_x: int
    slot_x: int


ALL_OUTCOMES = tuple(
    OutcomeKey(pa, sa, pb, sb) for pa in PORTS for sa in SLOTS for pb in PORTS for sb in SLOTS
)


def slot_weight(slot: int) -> float:
    """Trace weight carried by a slot POVM element."""
    return 0.5 if slot == 1 else 0.25


def middle_ket(port: int, phi: float) -> np.ndarray:
    return (KET0 + port_sign(port) * np.exp(1j * phi) * KET1) / np.sqrt(2)


def slot_ket(port: int, slot: int, phi: float) -> np.ndarray:
    """Pure state the (port, slot) element projects onto."""
    if slot == 0:
        return KET0.copy()
    if slot == 2:
        return KET1.copy()
    if slot == 1:
        return middle_ket(port, phi)
    raise ValueError(f"slot must be 0, 1 or 2, got {slot}")


def povm_element(port: int, slot: int, phi: float) -> np.ndarray:
    ket = slot_ket(port, slot, phi)
    return slot_weight(slot) * np.outer(ket, ket.conj())


def joint_distribution(rho: DensityMatrix, phases: AnalyzerPhase) -> dict[OutcomeKey, float]:
    """Probability of every (port, slot) x (port, slot) outcome."""
    m = np.asarray(rho, dtype=complex)
    arm_xx = {(p, s): povm_element(p, s, phases.phi_xx) for p in PORTS for s in SLOTS}
    arm_x = {(p, s): povm_element(p, s, phases.phi_x) for p in PORTS for s in SLOTS}
    out = {}
    for k in ALL_OUTCOMES:
        e = kron(arm_xx[k.port_xx, k.slot_xx], arm_x[k.port_x, k.slot_x])
        out[k] = float(np.trace(m @ e).real)
    return out


def distribution_to_csv(dist: dict[OutcomeKey, float]) -> str:
    buf = io.StringIO()
    buf.write("port_xx,slot_xx,port_x,slot_x,probability\n")
    for k in ALL_OUTCOMES:
        buf.write(f"{k.port_xx},{k.slot_xx},{k.port_x},{k.slot_x},{dist.get(k, 0.0)!r}\n")
    return buf.getvalue()


def franson_rate(i: int, j: int, phase_sum: float, V: float) -> float:
    if abs(V) > 1:
        raise ValueError(f"|V| must be <= 1, got {V}")
    return 1.0 - i * j * V * np.cos(phase_sum)


def middle_rate(rho: DensityMatrix, port_xx: int, port_x: int, phases: AnalyzerPhase) -> float:
    """Middle-middle rate of one port pair, normalized so its phase average is 1
    for a trace-one state with balanced amplitudes."""
    a = povm_element(port_xx, 1, phases.phi_xx)
    b = povm_element(port_x, 1, phases.phi_x)
    return float(np.trace(np.asarray(rho) @ kron(a, b)).real) * 16.0


def correlation_visibility(cells: dict[tuple[int, int], float]) -> float:
    """Contrast between port-correlated and port-anticorrelated counts.

    ``cells`` maps (port_xx, port_x) to a count or probability. Swapping the
    port of one arm is a pi shift of that arm's phase, so this is the fringe
    contrast between the setting's phase sum and the sum plus pi.
    """
    same = cells[1, 1] + cells[2, 2]
    opposite = cells[1, 2] + cells[2, 1]
    total = same + opposite
    if total <= 0:
        return 0.0
    return abs(same - opposite) / total


def time_visibility(side_cells: dict[tuple[int, int], float]) -> float:
    """Contrast between same-bin and cross-bin side-peak coincidences.

    ``side_cells`` maps (slot_xx, slot_x) with slots in {0, 2} to counts.
    """
    same = side_cells[0, 0] + side_cells[2, 2]
    cross = side_cells[0, 2] + side_cells[2, 0]
    total = same + cross
    return (same - cross) / total if total > 0 else 0.0


X_BASIS_SETTING = AnalyzerPhase(0.0, 0.0)
Y_BASIS_SETTING = AnalyzerPhase(np.pi / 2, np.pi / 2)


def predicted_visibilities(rho: DensityMatrix) -> tuple[float, float, float]:
    """Visibilities in the 0/1, +X/-X and +Y/-Y bases from the exact model.

    The energy-basis values are read off the joint distribution at the
    (0, 0) and (pi/2, pi/2) analyzer settings.
    """
    dx = joint_distribution(rho, X_BASIS_SETTING)
    dy = joint_distribution(rho, Y_BASIS_SETTING)
    side = {
        (sa, sb): sum(dx[OutcomeKey(pa, sa, pb, sb)] for pa in PORTS for pb in PORTS)
        for sa in (0, 2)
        for sb in (0, 2)
    }
    mid_x = {(pa, pb): dx[OutcomeKey(pa, 1, pb, 1)] for pa in PORTS for pb in PORTS}
    mid_y = {(pa, pb): dy[OutcomeKey(pa, 1, pb, 1)] for pa in PORTS for pb in PORTS}
    return time_visibility(side), correlation_visibility(mid_x), correlation_visibility(mid_y)
