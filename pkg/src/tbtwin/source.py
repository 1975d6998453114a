"""Biexciton-exciton cascade source driven by a pair of pump pulses."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigInvalid, OutOfRange
from .qstate import DensityMatrix, validate_density_matrix

FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))

# Measured reference state: 0.44 early-early/late-late populations
# and 0.25 outer coherence.
REFERENCE_POPULATION = 0.44
REFERENCE_COHERENCE = 0.25


@dataclass(frozen=True)
class PumpConfig:
    """Pump interferometer output: two Gaussian pulses ``bin_delay`` apart.

    ``two_photon_gain`` converts a pulse area into the two-photon flop angle
    (``gain * theta**2``).
    """

    theta1: float = 0.6
    theta2: float = 0.6
    pulse_fwhm: float = 4e-12
    bin_delay: float = 3.2e-9
    pump_phase: float = 0.0
    two_photon_gain: float = 1.0

    def __post_init__(self):
        if self.pulse_fwhm <= 0 or self.bin_delay <= 0:
            raise ConfigInvalid("pulse_fwhm and bin_delay must be positive")
        if not self.bin_delay > 10 * self.pulse_fwhm:
            raise ConfigInvalid(
                f"bin_delay {self.bin_delay} must exceed 10x pulse_fwhm {self.pulse_fwhm}"
            )
        if self.two_photon_gain <= 0:
            raise ConfigInvalid("two_photon_gain must be positive")
        object.__setattr__(self, "pump_phase", float(np.mod(self.pump_phase, 2 * np.pi)))


@dataclass(frozen=True)
class SourceParams:
    pump: PumpConfig = field(default_factory=PumpConfig)
    coherence_factor: float = REFERENCE_COHERENCE / REFERENCE_POPULATION
    double_fraction: float = 1.0 - 2.0 * REFERENCE_POPULATION
    amplitude_imbalance: float = 1.0
    tau_xx: float = 405e-12
    tau_x: float = 771e-12
    coh_xx: float = 211e-12
    coh_x: float = 178e-12

    def __post_init__(self):
        if isinstance(self.pump, dict):
            object.__setattr__(self, "pump", PumpConfig(**self.pump))
        if not 0.0 <= self.coherence_factor <= 1.0:
            raise ConfigInvalid(f"coherence_factor {self.coherence_factor} not in [0, 1]")
        if not 0.0 <= self.double_fraction < 1.0:
            raise ConfigInvalid(f"double_fraction {self.double_fraction} not in [0, 1)")
        if self.amplitude_imbalance < 0:
            raise ConfigInvalid("amplitude_imbalance must be non-negative")
        for name in ("tau_xx", "tau_x", "coh_xx", "coh_x"):
            if getattr(self, name) <= 0:
                raise ConfigInvalid(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SourceParams":
        d = dict(d)
        if "pump" in d:
            d["pump"] = PumpConfig(**d["pump"])
        return cls(**d)


def _envelope(t, fwhm):
    sigma = fwhm * FWHM_TO_SIGMA
    return np.exp(-0.5 * (np.asarray(t, dtype=float) / sigma) ** 2)


def pump_field(t, cfg: PumpConfig):
    """Rotating-frame Rabi envelope of the two-pulse pump.

    The carrier is dropped and the relative carrier phase of the delayed pulse
    is carried as ``cfg.pump_phase``.
    """
    return cfg.theta1 * _envelope(t, cfg.pulse_fwhm) + np.exp(
        1j * cfg.pump_phase
    ) * cfg.theta2 * _envelope(np.asarray(t) - cfg.bin_delay, cfg.pulse_fwhm)


def excitation_probabilities(cfg: PumpConfig) -> tuple[float, float, float]:
    """Per-pulse biexciton preparation probabilities (early, late, both)."""
    p_early = float(np.sin(0.5 * cfg.two_photon_gain * cfg.theta1**2) ** 2)
    p_late = float(np.sin(0.5 * cfg.two_photon_gain * cfg.theta2**2) ** 2)
    return p_early, p_late, p_early * p_late


def double_excitation_ratio(cfg: PumpConfig) -> float:
    """Cross-pulse pair coincidences relative to same-pulse pair coincidences."""
    pe, pl, both = excitation_probabilities(cfg)
    single = pe * (1 - pl) + pl * (1 - pe)
    if single == 0:
        return 0.0
    return 2 * both / single


def ideal_state(pump_phase: float) -> np.ndarray:
    """(|00> + exp(i*pump_phase)|11>)/sqrt(2)."""
    return np.array([1, 0, 0, np.exp(1j * pump_phase)], dtype=complex) / np.sqrt(2)


def emitted_density_matrix(p: SourceParams) -> DensityMatrix:
    """Two-photon state after dephasing and double excitation.

    The coherent pair state has its |00><11| coherence scaled by
    ``coherence_factor``; a fraction ``double_fraction`` is replaced by an
    equal mixture of the cross-pulse terms |01> and |10>.
    """
    r = p.amplitude_imbalance
    amp = np.array([1.0, 0, 0, r * np.exp(1j * p.pump.pump_phase)], dtype=complex)
    amp /= np.sqrt(1 + r * r)
    rho = np.outer(amp, amp.conj())
    rho[0, 3] *= p.coherence_factor
    rho[3, 0] *= p.coherence_factor
    beta = p.double_fraction
    rho *= 1 - beta
    rho[1, 1] += beta / 2
    rho[2, 2] += beta / 2
    return validate_density_matrix(rho)


def calibrate_to_populations(target_pop: float, target_coh: float) -> tuple[float, float]:
    """Invert the source model: return ``(coherence_factor, double_fraction)``."""
    if not (0 < target_coh <= target_pop <= 0.5):
        raise OutOfRange(
            f"need 0 < coherence <= population <= 0.5, got ({target_pop}, {target_coh})"
        )
    return target_coh / target_pop, 1.0 - 2.0 * target_pop
