import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density_matrix, random_hermitian
from tbtwin.errors import (
    HermiticityViolation,
    NotHermitian,
    PositivityViolation,
    TraceViolation,
    UnnormalizedTarget,
)
from tbtwin.qstate import (
    I2,
    KET0,
    KET1,
    PHI_PLUS,
    SY,
    SZ,
    DensityMatrix,
    concurrence,
    fidelity_to_pure,
    hermitian_eigensystem,
    kron,
    projector,
    tangle,
    validate_density_matrix,
    x_state,
    x_state_concurrence,
)

BELL = projector(PHI_PLUS)
MIXED = np.eye(4) / 4
MEASURED_X_STATE = x_state([0.44, 0.06, 0.06, 0.44], 0.25)


def reference_concurrence(rho):
    # textbook spin-flip route with a general (non-Hermitian) eigensolver
    yy = np.kron(SY, SY)
    r = rho @ yy @ rho.conj() @ yy
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(r).real)[::-1], 0, None))
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def random_x_state(rng):
    p = rng.dirichlet(np.ones(4))
    c03 = np.sqrt(p[0] * p[3]) * rng.uniform() * np.exp(1j * rng.uniform(0, 2 * np.pi))
    c12 = np.sqrt(p[1] * p[2]) * rng.uniform() * np.exp(1j * rng.uniform(0, 2 * np.pi))
    return x_state(p, c03, c12)


class TestKron:
    def test_identity(self):
        assert np.array_equal(kron(I2, I2), np.eye(4))

    def test_sz_sz(self):
        assert np.array_equal(kron(SZ, SZ), np.diag([1, -1, -1, 1]).astype(complex))

    def test_basis_projector(self):
        got = kron(projector(KET0), projector(KET1))
        assert np.array_equal(got, np.diag([0, 1, 0, 0]).astype(complex))

    def test_matches_numpy_and_vectors(self, rng):
        a = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
        b = rng.normal(size=(3, 2))
        assert np.allclose(kron(a, b), np.kron(a, b), atol=0)
        assert kron(KET0, KET1).shape == (4, 1)

    def test_associative(self, rng):
        for _ in range(200):
            a, b, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
            assert np.abs(kron(kron(a, b), c) - kron(a, kron(b, c))).max() < 1e-12


class TestEigensystem:
    def test_diagonal(self):
        w, _ = hermitian_eigensystem(np.diag([3.0, 1.0, 2.0, 0.0]))
        assert np.allclose(w, [3, 2, 1, 0], atol=1e-15)

    def test_rank_one_projector(self):
        w, v = hermitian_eigensystem(BELL)
        assert np.allclose(w, [1, 0, 0, 0], atol=1e-15)
        assert abs(abs(np.vdot(v[:, 0], PHI_PLUS)) - 1) < 1e-12

    def test_round_trip_1000_random(self, rng):
        worst = 0.0
        for _ in range(1000):
            h = random_hermitian(rng)
            w, v = hermitian_eigensystem(h)
            worst = max(worst, np.abs((v * w) @ v.conj().T - h).max())
            assert np.abs(v.conj().T @ v - np.eye(4)).max() < 1e-9
            assert np.abs(h @ v - v * w).max() < 1e-9
        assert worst < 1e-9

    def test_agrees_with_lapack(self, rng):
        for n in (2, 4):
            h = random_hermitian(rng, n)
            w, _ = hermitian_eigensystem(h)
            assert np.allclose(w, np.linalg.eigvalsh(h)[::-1], atol=1e-12)

    def test_descending(self, rng):
        w, _ = hermitian_eigensystem(random_hermitian(rng))
        assert np.all(np.diff(w) <= 0)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitian):
            hermitian_eigensystem(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_rejects_wrong_dimension(self):
        with pytest.raises(NotHermitian):
            hermitian_eigensystem(np.eye(3))


class TestFidelity:
    def test_self_fidelity(self):
        assert fidelity_to_pure(validate_density_matrix(BELL), PHI_PLUS) == pytest.approx(1.0, abs=1e-12)

    def test_maximally_mixed(self):
        assert fidelity_to_pure(validate_density_matrix(MIXED), PHI_PLUS) == pytest.approx(0.25, abs=1e-12)

    def test_measured_x_state(self):
        # (0.44 + 0.44)/2 + 0.25
        expected = (0.44 + 0.44) / 2 + 0.25
        assert fidelity_to_pure(validate_density_matrix(MEASURED_X_STATE), PHI_PLUS) == pytest.approx(
            expected, abs=1e-12
        )
        assert expected == pytest.approx(0.69, abs=1e-12)

    def test_unnormalized_target(self):
        with pytest.raises(UnnormalizedTarget):
            fidelity_to_pure(validate_density_matrix(MIXED), np.array([1, 0, 0, 1], dtype=complex))

    def test_linear_in_rho(self, rng):
        for _ in range(100):
            r1, r2 = random_density_matrix(rng), random_density_matrix(rng)
            a = rng.uniform()
            psi = rng.normal(size=4) + 1j * rng.normal(size=4)
            psi /= np.linalg.norm(psi)
            mix = validate_density_matrix(a * r1 + (1 - a) * r2)
            f1 = fidelity_to_pure(validate_density_matrix(r1), psi)
            f2 = fidelity_to_pure(validate_density_matrix(r2), psi)
            assert fidelity_to_pure(mix, psi) == pytest.approx(a * f1 + (1 - a) * f2, abs=1e-12)


class TestConcurrence:
    def test_bell(self):
        assert concurrence(validate_density_matrix(BELL)) == pytest.approx(1.0, abs=1e-12)

    def test_mixed(self):
        assert concurrence(validate_density_matrix(MIXED)) == pytest.approx(0.0, abs=1e-12)

    def test_measured_x_state(self):
        closed = 2 * max(0, 0.25 - np.sqrt(0.06 * 0.06))
        assert closed == pytest.approx(0.38, abs=1e-15)
        assert concurrence(validate_density_matrix(MEASURED_X_STATE)) == pytest.approx(closed, abs=1e-12)

    def test_product_state(self):
        rho = projector(kron(KET0 + KET1, KET0).ravel() / np.sqrt(2))
        assert concurrence(validate_density_matrix(rho)) == pytest.approx(0.0, abs=1e-12)

    def test_random_x_states_match_closed_form(self, rng):
        for _ in range(500):
            m = random_x_state(rng)
            got = concurrence(validate_density_matrix(m))
            assert got == pytest.approx(x_state_concurrence(m), abs=1e-12)

    def test_random_states_match_reference(self, rng):
        for rank in (1, 2, 4):
            for _ in range(100):
                rho = random_density_matrix(rng, rank)
                assert concurrence(validate_density_matrix(rho)) == pytest.approx(
                    reference_concurrence(rho), abs=1e-7
                )


class TestTangle:
    def test_values(self):
        assert tangle(validate_density_matrix(BELL)) == pytest.approx(1.0, abs=1e-12)
        assert tangle(validate_density_matrix(MIXED)) == pytest.approx(0.0, abs=1e-12)
        assert 0.41**2 == pytest.approx(0.1681, abs=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3, 4]))
    def test_ordering(self, seed, rank):
        rho = validate_density_matrix(random_density_matrix(np.random.default_rng(seed), rank))
        c = concurrence(rho)
        t = tangle(rho)
        assert t == c * c
        assert 0 <= t <= c <= 1


class TestValidate:
    def test_mixed_is_valid(self):
        assert isinstance(validate_density_matrix(MIXED), DensityMatrix)

    def test_positivity(self):
        with pytest.raises(PositivityViolation):
            validate_density_matrix(np.diag([0.5, 0.6, 0, -0.1]))

    def test_trace(self):
        with pytest.raises(TraceViolation):
            validate_density_matrix(np.diag([0.5, 0.6, 0, 0]))

    def test_hermiticity(self):
        m = MIXED.astype(complex)
        m[0, 1] = 0.1
        with pytest.raises(HermiticityViolation):
            validate_density_matrix(m)

    def test_non_finite(self):
        m = MIXED.astype(complex)
        m[1, 1] = np.nan
        with pytest.raises(HermiticityViolation):
            validate_density_matrix(m)

    def test_immutable(self):
        rho = validate_density_matrix(MIXED)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1

    def test_json_round_trip(self, rng):
        rho = validate_density_matrix(random_density_matrix(rng))
        d = json.loads(rho.to_json())
        assert d["dim"] == 4 and len(d["re"]) == 4 and len(d["im"][0]) == 4
        back = DensityMatrix.from_json(rho.to_json())
        assert np.array_equal(back.matrix, rho.matrix)
