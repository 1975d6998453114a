"""Two-qubit linear algebra and entanglement measures.

Matrices are plain ``numpy`` complex arrays. The two-qubit basis order is
fixed throughout the package as

    |00>, |01>, |10>, |11>  ==  |e_XX e_X>, |e_XX l_X>, |l_XX e_X>, |l_XX l_X>

with the biexciton photon as the first qubit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    HermiticityViolation,
    NotHermitian,
    PositivityViolation,
    TraceViolation,
    UnnormalizedTarget,
)

STATE_TOL = 1e-10
HERMITIAN_INPUT_TOL = 1e-8

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, SX, SY, SZ)

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)

_YY = np.kron(SY, SY)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices (or column vectors)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    ra, ca = a.shape
    rb, cb = b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(ra * rb, ca * cb)


def projector(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex).reshape(-1)
    return np.outer(ket, ket.conj())


def _jacobi_hermitian(m: np.ndarray, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    # cyclic complex Jacobi; every rotation zeroes one off-diagonal pair exactly
    a = np.array(m, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.abs(a).max(), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(np.triu(a, 1)) ** 2))
        if off <= 1e-17 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = a[p, q]
                mag = abs(b)
                if mag <= 1e-300:
                    continue
                phase = b / mag
                theta = 0.5 * np.arctan2(2.0 * mag, (a[q, q] - a[p, p]).real)
                c, s = np.cos(theta), np.sin(theta)
                g = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ g
    w = a.diagonal().real.copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def hermitian_eigensystem(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a 2x2 or 4x4 Hermitian matrix.

    Returns
    -------
    eigenvalues : ndarray
        Real eigenvalues in descending order.
    eigenvectors : ndarray
        Orthonormal eigenvectors as columns, ordered like ``eigenvalues``.

    Raises
    ------
    NotHermitian
        If ``m`` is not square of dimension 2 or 4, or deviates from its
        conjugate transpose by more than 1e-8.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 4):
        raise NotHermitian(f"expected a 2x2 or 4x4 matrix, got shape {m.shape}")
    dev = np.abs(m - m.conj().T).max()
    if dev > HERMITIAN_INPUT_TOL:
        raise NotHermitian(f"matrix deviates from its adjoint by {dev:.3g}")
    return _jacobi_hermitian(0.5 * (m + m.conj().T))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated 4x4 two-qubit density matrix.

    Build through :func:`validate_density_matrix`; the constructor does not
    check anything.
    """

    matrix: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    @property
    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def to_json_dict(self) -> dict:
        m = self.matrix
        return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "DensityMatrix":
        m = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        if m.shape != (d["dim"], d["dim"]):
            raise ValueError(f"dim {d['dim']} does not match matrix shape {m.shape}")
        return validate_density_matrix(m)

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        return cls.from_json_dict(json.loads(text))


def validate_density_matrix(m: np.ndarray) -> DensityMatrix:
    """Check Hermiticity, unit trace and positivity, in that order."""
    m = np.array(m, dtype=complex)
    if m.shape != (4, 4):
        raise HermiticityViolation(f"density matrix must be 4x4, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise HermiticityViolation("density matrix has non-finite entries")
    dev = np.abs(m - m.conj().T).max()
    if dev > STATE_TOL:
        raise HermiticityViolation(f"not Hermitian (max deviation {dev:.3g})")
    tr = np.trace(m).real
    if abs(tr - 1.0) > STATE_TOL:
        raise TraceViolation(f"trace is {tr!r}, expected 1")
    evals, _ = _jacobi_hermitian(0.5 * (m + m.conj().T))
    if evals[-1] < -STATE_TOL:
        raise PositivityViolation(f"negative eigenvalue {evals[-1]:.3g}")
    m.setflags(write=False)
    return DensityMatrix(m)


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def fidelity_to_pure(rho: DensityMatrix, psi: np.ndarray) -> float:
    """Overlap <psi|rho|psi> with a normalized pure target, clamped to [0, 1]."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > STATE_TOL:
        raise UnnormalizedTarget(f"target has squared norm {norm!r}")
    f = np.vdot(psi, _as_matrix(rho) @ psi).real
    return float(min(1.0, max(0.0, f)))


def wootters_lambdas(rho: DensityMatrix) -> np.ndarray:
    """Descending square roots of the eigenvalues of rho * spin-flipped rho.

    Computed as the singular values of the complex symmetric matrix
    ``W^T (Y x Y) W`` where the columns of ``W`` are the subnormalized
    eigenvectors of rho. Singular values come from the Hermitian dilation
    [[0, T], [T^H, 0]], which avoids square roots of round-off.
    """
    m = _as_matrix(rho)
    p, v = hermitian_eigensystem(m)
    w = v * np.sqrt(np.clip(p, 0.0, None))[None, :]
    tau = w.T @ _YY @ w
    dil = np.zeros((8, 8), dtype=complex)
    dil[:4, 4:] = tau
    dil[4:, :4] = tau.conj().T
    sv, _ = _jacobi_hermitian(dil)
    return np.clip(sv[:4], 0.0, None)


def concurrence(rho: DensityMatrix) -> float:
    lam = wootters_lambdas(rho)
    return float(min(1.0, max(0.0, lam[0] - lam[1] - lam[2] - lam[3])))


def tangle(rho: DensityMatrix) -> float:
    c = concurrence(rho)
    return c * c


def x_state(populations, outer_coherence: complex = 0.0, inner_coherence: complex = 0.0) -> np.ndarray:
    """Build an X-shaped 4x4 matrix from populations and the two coherences.

    ``outer_coherence`` is the |00><11| element, ``inner_coherence`` the
    |01><10| element.
    """
    m = np.diag(np.asarray(populations, dtype=complex))
    m[0, 3] = outer_coherence
    m[3, 0] = np.conj(outer_coherence)
    m[1, 2] = inner_coherence
    m[2, 1] = np.conj(inner_coherence)
    return m


def x_state_concurrence(m: np.ndarray) -> float:
    """Closed-form concurrence of an X state."""
    m = _as_matrix(m)
    p = m.diagonal().real
    return 2.0 * max(
        0.0,
        abs(m[0, 3]) - np.sqrt(p[1] * p[2]),
        abs(m[1, 2]) - np.sqrt(p[0] * p[3]),
    )
