"""Density-matrix reconstruction from the four analyzer settings."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .analyzer import DEFAULT_PHASE_SETTINGS, port_sign, slot_ket, slot_weight
from .coincidence import CoincidenceTable, visibility_from_counts
from .errors import EmptyProjection, MissingRun, SingularSystem
from .qstate import (
    PAULIS,
    DensityMatrix,
    concurrence,
    fidelity_to_pure,
    hermitian_eigensystem,
    kron,
    projector,
    validate_density_matrix,
)
from .source import ideal_state

DEFAULT_PORT_PAIR = (1, 2)

# Per-arm measurement choices: (slot, analyzer phase required or None)
_ARM_CHOICES = (
    ("0", 0, None),
    ("1", 2, None),
    ("X", 1, 0.0),
    ("Y", 1, np.pi / 2),
)

# Hermitian operator basis sigma_a (x) sigma_b / 2
_GBASIS = tuple(kron(a, b) / 2 for a in PAULIS for b in PAULIS)


def _arm_label(name: str, port: int) -> str:
    if name in ("0", "1"):
        return name
    return ("+" if port_sign(port) > 0 else "-") + name


@dataclass(frozen=True)
class Projection:
    label_xx: str
    label_x: str
    ket_xx: np.ndarray
    ket_x: np.ndarray
    count: float
    weight: float
    exposure: int

    @property
    def rate(self) -> float:
        return self.count / (self.weight * self.exposure)

    @property
    def projector(self) -> np.ndarray:
        return projector(kron(self.ket_xx, self.ket_x))


@dataclass(frozen=True)
class ProjectionCounts:
    entries: tuple[Projection, ...]
    port_pair: tuple[int, int] = DEFAULT_PORT_PAIR

    def __post_init__(self):
        if len(self.entries) != 16:
            raise ValueError(f"need 16 projections, got {len(self.entries)}")

    def __getitem__(self, labels: tuple[str, str]) -> Projection:
        for e in self.entries:
            if (e.label_xx, e.label_x) == labels:
                return e
        raise KeyError(labels)

    @property
    def counts(self) -> np.ndarray:
        return np.array([e.count for e in self.entries], dtype=float)

    def with_counts(self, counts) -> "ProjectionCounts":
        return replace(
            self, entries=tuple(replace(e, count=float(c)) for e, c in zip(self.entries, counts))
        )

    def scaled_exposure(self, factor: float) -> "ProjectionCounts":
        return replace(
            self, entries=tuple(replace(e, exposure=e.exposure * factor) for e in self.entries)
        )


def _phase_matches(required, actual: float) -> bool:
    return required is None or bool(np.isclose(np.cos(actual - required), 1.0))


def assemble_projections(
    tables: list[CoincidenceTable], port_pair: tuple[int, int] = DEFAULT_PORT_PAIR
) -> ProjectionCounts:
    """Collect the 16 joint projections from the four phase-setting runs.

    Side-peak (time-basis) projections take counts from every run; middle-peak
    projections only from runs where that arm had the matching phase. Each
    entry's exposure is the summed SYNC count of the runs it drew from.
    """
    for setting in DEFAULT_PHASE_SETTINGS:
        if not any(
            _phase_matches(setting.phi_xx, t.phase.phi_xx) and _phase_matches(setting.phi_x, t.phase.phi_x)
            for t in tables
        ):
            raise MissingRun(f"no table for phase setting {setting.label}")
    pa, pb = port_pair
    entries = []
    for name_a, slot_a, phi_a in _ARM_CHOICES:
        for name_b, slot_b, phi_b in _ARM_CHOICES:
            used = [
                t
                for t in tables
                if _phase_matches(phi_a, t.phase.phi_xx) and _phase_matches(phi_b, t.phase.phi_x)
            ]
            entries.append(
                Projection(
                    _arm_label(name_a, pa),
                    _arm_label(name_b, pb),
                    slot_ket(pa, slot_a, phi_a or 0.0),
                    slot_ket(pb, slot_b, phi_b or 0.0),
                    float(sum(t[pa, slot_a, pb, slot_b] for t in used)),
                    slot_weight(slot_a) * slot_weight(slot_b),
                    int(sum(t.exposure for t in used)),
                )
            )
    if sum(e.count for e in entries) <= 0:
        raise EmptyProjection(f"no coincidences for port pair {port_pair}")
    return ProjectionCounts(tuple(entries), tuple(port_pair))


def exact_projections(rho, port_pair=DEFAULT_PORT_PAIR, exposure: int = 1) -> ProjectionCounts:
    """Noise-free projection "counts" Tr[rho Pi] * weight * exposure."""
    m = np.asarray(rho, dtype=complex)
    pa, pb = port_pair
    entries = []
    for name_a, slot_a, phi_a in _ARM_CHOICES:
        for name_b, slot_b, phi_b in _ARM_CHOICES:
            ka = slot_ket(pa, slot_a, phi_a or 0.0)
            kb = slot_ket(pb, slot_b, phi_b or 0.0)
            w = slot_weight(slot_a) * slot_weight(slot_b)
            prob = float(np.trace(m @ projector(kron(ka, kb))).real)
            entries.append(
                Projection(_arm_label(name_a, pa), _arm_label(name_b, pb), ka, kb, prob * w * exposure, w, exposure)
            )
    return ProjectionCounts(tuple(entries), tuple(port_pair))


def _design_matrix(p: ProjectionCounts) -> np.ndarray:
    return np.array(
        [[np.trace(e.projector @ g).real for g in _GBASIS] for e in p.entries]
    )


def linear_inversion(p: ProjectionCounts) -> np.ndarray:
    """Solve the 16 rate equations for rho in the Pauli-product basis.

    The result is Hermitian with unit trace but not necessarily positive.
    """
    if any(e.exposure <= 0 for e in p.entries):
        raise SingularSystem("every projection needs a positive exposure")
    a = _design_matrix(p)
    if np.linalg.cond(a) > 1e12:
        raise SingularSystem("projection set is not informationally complete")
    rates = np.array([e.rate for e in p.entries])
    coeffs = np.linalg.solve(a, rates)
    rho = sum(c * g for c, g in zip(coeffs, _GBASIS))
    tr = np.trace(rho).real
    if tr <= 0:
        raise SingularSystem(f"reconstructed trace {tr} is not positive")
    return rho / tr


def project_to_physical(rho_raw: np.ndarray) -> DensityMatrix:
    """Closest physical state by eigenvalue truncation.

    Negative eigenvalues are zeroed starting from the smallest; their total is
    spread evenly over the eigenvalues that remain positive (the fast
    maximum-likelihood projection of Smolin, Gambetta and Smith).
    """
    m = np.asarray(rho_raw, dtype=complex)
    m = 0.5 * (m + m.conj().T)
    tr = np.trace(m).real
    if not tr > 0:
        raise SingularSystem(f"cannot normalize a matrix with trace {tr!r}")
    m = m / tr
    lam, vec = hermitian_eigensystem(m)
    lam = lam.copy()
    n = lam.size
    acc = 0.0
    i = n - 1
    while i >= 0 and lam[i] + acc / (i + 1) < 0:
        acc += lam[i]
        lam[i] = 0.0
        i -= 1
    if i >= 0:
        lam[: i + 1] += acc / (i + 1)
    out = (vec * lam) @ vec.conj().T
    out = 0.5 * (out + out.conj().T)
    out /= np.trace(out).real
    return validate_density_matrix(out)


def reconstruct(p: ProjectionCounts) -> DensityMatrix:
    return project_to_physical(linear_inversion(p))


def state_metrics(rho: DensityMatrix, target_phase: float = 0.0) -> dict[str, float]:
    c = concurrence(rho)
    return {
        "fidelity": fidelity_to_pure(rho, ideal_state(target_phase)),
        "concurrence": c,
        "tangle": c * c,
    }


def monte_carlo_errors(
    p: ProjectionCounts, n_runs: int = 100, seed: int = 0, target_phase: float = 0.0
) -> dict[str, float]:
    """Standard deviations of the metrics under Poisson resampling of counts."""
    if n_runs < 2:
        raise ValueError("n_runs must be at least 2")
    rng = np.random.default_rng(seed)
    base = p.counts
    samples = []
    for _ in range(n_runs):
        q = p.with_counts(rng.poisson(base))
        samples.append(state_metrics(reconstruct(q), target_phase))
    return {
        f"sigma_{k}": float(np.std([s[k] for s in samples], ddof=1))
        for k in ("fidelity", "concurrence", "tangle")
    }


@dataclass
class TomographyResult:
    rho: DensityMatrix
    fidelity: float
    concurrence: float
    tangle: float
    sigma_fidelity: float | None = None
    sigma_concurrence: float | None = None
    sigma_tangle: float | None = None
    visibilities: dict = field(default_factory=dict)
    port_pair: tuple[int, int] = DEFAULT_PORT_PAIR
    mc_runs: int = 0

    def to_json_dict(self) -> dict:
        return {
            "density_matrix": self.rho.to_json_dict(),
            "metrics": {
                "fidelity": self.fidelity,
                "concurrence": self.concurrence,
                "tangle": self.tangle,
                "sigma_fidelity": self.sigma_fidelity,
                "sigma_concurrence": self.sigma_concurrence,
                "sigma_tangle": self.sigma_tangle,
                "mc_runs": self.mc_runs,
            },
            "visibilities": {k: {"V": v, "sigma": s} for k, (v, s) in self.visibilities.items()},
            "port_pair": list(self.port_pair),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json_dict(cls, d: dict) -> "TomographyResult":
        m = d["metrics"]
        return cls(
            rho=DensityMatrix.from_json_dict(d["density_matrix"]),
            fidelity=m["fidelity"],
            concurrence=m["concurrence"],
            tangle=m["tangle"],
            sigma_fidelity=m.get("sigma_fidelity"),
            sigma_concurrence=m.get("sigma_concurrence"),
            sigma_tangle=m.get("sigma_tangle"),
            visibilities={k: (v["V"], v["sigma"]) for k, v in d.get("visibilities", {}).items()},
            port_pair=tuple(d.get("port_pair", DEFAULT_PORT_PAIR)),
            mc_runs=m.get("mc_runs", 0),
        )

    def matrix_csv(self) -> str:
        """Real and imaginary parts per element, ready for a 3D bar chart."""
        labels = ("00", "01", "10", "11")
        m = self.rho.matrix
        buf = io.StringIO()
        buf.write("row,col,re,im\n")
        for i, r in enumerate(labels):
            for j, c in enumerate(labels):
                buf.write(f"{r},{c},{m[i, j].real!r},{m[i, j].imag!r}\n")
        return buf.getvalue()


def full_report(
    tables: list[CoincidenceTable],
    port_pair: tuple[int, int] = DEFAULT_PORT_PAIR,
    mc_runs: int = 100,
    seed: int = 0,
    target_phase: float = 0.0,
) -> TomographyResult:
    p = assemble_projections(tables, port_pair)
    rho = reconstruct(p)
    metrics = state_metrics(rho, target_phase)
    sigmas = monte_carlo_errors(p, mc_runs, seed, target_phase) if mc_runs >= 2 else {}
    vis = {}
    for basis in ("time", "X", "Y"):
        vis[basis] = visibility_from_counts(tables, basis)
    return TomographyResult(
        rho=rho,
        visibilities=vis,
        port_pair=tuple(port_pair),
        mc_runs=mc_runs if sigmas else 0,
        **metrics,
        **sigmas,
    )

