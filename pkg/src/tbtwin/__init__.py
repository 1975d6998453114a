"""Digital twin of a quantum-dot time-bin entanglement experiment."""

from .analyzer import AnalyzerPhase, joint_distribution, povm_element, predicted_visibilities
from .qstate import DensityMatrix, concurrence, fidelity_to_pure, tangle, validate_density_matrix
from .source import PumpConfig, SourceParams, calibrate_to_populations, emitted_density_matrix
from .simulator import RunConfig, simulate_run

__version__ = "0.1.0"
