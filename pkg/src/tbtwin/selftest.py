"""Fast analytic oracle checks, runnable from the CLI without pytest."""
from __future__ import annotations

import numpy as np

from . import analyzer, qstate, source, tomography


def _checks():
    rng = np.random.default_rng(12345)

    def kron_identity():
        return np.abs(qstate.kron(qstate.SZ, qstate.SZ) - np.diag([1, -1, -1, 1])).max() < 1e-15

    def eigen_round_trip():
        worst = 0.0
        for _ in range(200):
            a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            h = a + a.conj().T
            w, v = qstate.hermitian_eigensystem(h)
            worst = max(worst, np.abs((v * w) @ v.conj().T - h).max())
        return worst < 1e-9

    def concurrence_x_state():
        m = qstate.x_state([0.44, 0.06, 0.06, 0.44], 0.25)
        return abs(qstate.concurrence(qstate.validate_density_matrix(m)) - 0.38) < 1e-12

    def calibrated_fidelity():
        g, beta = source.calibrate_to_populations(0.44, 0.25)
        rho = source.emitted_density_matrix(source.SourceParams(coherence_factor=g, double_fraction=beta))
        return abs(qstate.fidelity_to_pure(rho, source.ideal_state(0.0)) - 0.69) < 1e-12

    def povm_completeness():
        phi = rng.uniform(0, 2 * np.pi)
        total = sum(analyzer.povm_element(p, s, phi) for p in analyzer.PORTS for s in analyzer.SLOTS)
        return np.abs(total - np.eye(2)).max() < 1e-12

    def franson_fringe():
        rho = source.emitted_density_matrix(source.SourceParams())
        v = 2 * abs(rho.matrix[0, 3])
        worst = 0.0
        for phi in np.linspace(0, 2 * np.pi, 16, endpoint=False):
            ph = analyzer.AnalyzerPhase(phi, 0.0)
            for a in analyzer.PORTS:
                for b in analyzer.PORTS:
                    got = analyzer.middle_rate(rho, a, b, ph)
                    want = analyzer.franson_rate(analyzer.port_sign(a), -analyzer.port_sign(b), phi, v)
                    worst = max(worst, abs(got - want))
        return worst < 1e-9

    def tomography_round_trip():
        worst = 0.0
        for _ in range(100):
            a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            rho = a @ a.conj().T
            rho /= np.trace(rho).real
            got = tomography.reconstruct(tomography.exact_projections(rho))
            worst = max(worst, np.abs(got.matrix - rho).max())
        return worst < 1e-9

    return [
        ("kron sz x sz", kron_identity),
        ("eigensystem round trip", eigen_round_trip),
        ("X-state concurrence 0.38", concurrence_x_state),
        ("calibrated fidelity 0.69", calibrated_fidelity),
        ("POVM completeness", povm_completeness),
        ("Franson fringe from POVM", franson_fringe),
        ("tomography round trip", tomography_round_trip),
    ]


def run_selftest(emit=print) -> bool:
    ok = True
    for name, fn in _checks():
        passed = bool(fn())
        ok &= passed
        emit(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
