"""Dense complex linear algebra for dynamical maps of small quantum systems.

Conventions used throughout the package:

* Density matrices are vectorized **row-major**: a qubit state becomes
  ``(rho_00, rho_01, rho_10, rho_11)``.
* A *process matrix* ``A`` is the d^2 x d^2 matrix acting on vectorized
  states, ``vec(rho_out) = A @ vec(rho_in)``.
* The *dynamical (Choi-type) matrix* ``B = reshuffle(A)`` satisfies
  ``B[(a, c), (b, d)] = A[(a, b), (c, d)]`` with pair index ``d*x + y``.
  ``B`` is Hermitian iff the map is Hermiticity-preserving, and positive
  semidefinite iff the map is completely positive.
* For row-major vectorization ``vec(X rho Y) = (X (x) Y^T) vec(rho)``, so a
  Kraus set {E_k} has process matrix ``sum_k E_k (x) conj(E_k)``.

All functions are pure and operate on plain ``numpy`` arrays.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_SV_THRESHOLD = 1e-10
DEFAULT_EIG_TOL = 1e-9
DEFAULT_HERM_TOL = 1e-8


class SingularMapError(ValueError):
    """A process matrix is numerically singular (non-invertible map).

    Carries the offending smallest singular value so callers can report it
    as non-invertibility evidence.
    """

    def __init__(self, min_sv: float, threshold: float):
        self.min_sv = float(min_sv)
        self.threshold = float(threshold)
        super().__init__(
            f"process matrix is singular: min singular value {min_sv:.3e} "
            f"<= threshold {threshold:.3e}"
        )


def _as_complex_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("matrix has non-finite entries")
    return a


def _square_side(m: np.ndarray) -> int:
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m.shape[0]


def _superop_side(m: np.ndarray) -> int:
    """Hilbert-space dimension d for a d^2 x d^2 superoperator."""
    n = _square_side(m)
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise ValueError(f"superoperator side {n} is not a perfect square")
    return d


def max_abs(m) -> float:
    """Entrywise max-norm of a matrix."""
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def vectorize(rho) -> np.ndarray:
    """Flatten a d x d matrix row-major into a length-d^2 vector."""
    m = _as_complex_matrix(rho)
    _square_side(m)
    return m.reshape(-1)


def devectorize(v) -> np.ndarray:
    """Inverse of :func:`vectorize`; the length must be a perfect square."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    return v.reshape(d, d)


def validate_density_matrix(rho, herm_tol: float = 1e-12, psd_tol: float = 1e-10) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity of a density matrix.

    Returns the validated array; raises ``ValueError`` with the measured
    defect otherwise.
    """
    m = _as_complex_matrix(rho)
    _square_side(m)
    scale = max(max_abs(m), 1e-300)
    herm = max_abs(m - m.conj().T)
    if herm > herm_tol * scale:
        raise ValueError(f"not Hermitian: asymmetry {herm:.3e}")
    tr = complex(np.trace(m))
    if abs(tr - 1.0) > 1e-12:
        raise ValueError(f"trace {tr} differs from 1")
    eigs = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if eigs[0] < -psd_tol:
        raise ValueError(f"not positive semidefinite: min eigenvalue {eigs[0]:.3e}")
    return m


def kraus_completeness_defect(ops: Sequence[np.ndarray]) -> float:
    """Max-norm of sum_k E_k^dag E_k - I (zero for a trace-preserving set)."""
    ops = [_as_complex_matrix(e) for e in ops]
    d = _square_side(ops[0])
    acc = np.zeros((d, d), dtype=complex)
    for e in ops:
        if e.shape != (d, d):
            raise ValueError(f"Kraus operators have mixed shapes: {e.shape} vs {(d, d)}")
        acc += e.conj().T @ e
    return max_abs(acc - np.eye(d))


def kraus_to_process(ops: Sequence[np.ndarray], completeness_tol: float = 1e-10) -> np.ndarray:
    """Process matrix sum_k E_k (x) conj(E_k) of a Kraus set {E_k}.

    The set must be trace-preserving within ``completeness_tol``.
    """
    if not ops:
        raise ValueError("empty Kraus set")
    defect = kraus_completeness_defect(ops)
    if defect > completeness_tol:
        raise ValueError(f"Kraus set not trace-preserving: defect {defect:.3e}")
    ops = [np.asarray(e, dtype=complex) for e in ops]
    d = ops[0].shape[0]
    a = np.zeros((d * d, d * d), dtype=complex)
    for e in ops:
        a += np.kron(e, e.conj())
    return a


def reshuffle(m) -> np.ndarray:
    """Swap the inner pair indices: out[(a, c), (b, d)] = in[(a, b), (c, d)].

    Maps a process matrix to the dynamical (Choi-type) matrix and back; the
    operation is an involution.
    """
    a = _as_complex_matrix(m)
    d = _superop_side(a)
    return a.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def hermitian_eigenvalues(m, herm_tol: float = DEFAULT_HERM_TOL) -> np.ndarray:
    """Real eigenvalues (ascending) of a Hermitian matrix.

    The input is symmetrized as (M + M^dag)/2 before solving; inputs whose
    asymmetry exceeds ``herm_tol`` relative to the largest entry are
    rejected with the measured asymmetry.
    """
    a = _as_complex_matrix(m)
    _square_side(a)
    scale = max(max_abs(a), 1.0)
    asym = max_abs(a - a.conj().T)
    if asym > herm_tol * scale:
        raise ValueError(f"matrix is not Hermitian: asymmetry {asym:.3e} (tol {herm_tol * scale:.3e})")
    return np.linalg.eigvalsh(0.5 * (a + a.conj().T))


def singular_values(m) -> np.ndarray:
    """Singular values (ascending) via the Hermitian eigenvalues of M^dag M."""
    a = _as_complex_matrix(m)
    gram = a.conj().T @ a
    eigs = np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))
    return np.sqrt(np.clip(eigs, 0.0, None))


def min_singular_value_and_det(m) -> tuple[float, float, complex]:
    """(smallest singular value, largest singular value, determinant)."""
    a = _as_complex_matrix(m)
    _square_side(a)
    svs = singular_values(a)
    return float(svs[0]), float(svs[-1]), complex(np.linalg.det(a))


class CPVerdict(NamedTuple):
    is_cp: bool
    min_eigenvalue: float


def is_cp(dyn_matrix, tol: float = DEFAULT_EIG_TOL) -> CPVerdict:
    """Complete-positivity test: the dynamical matrix must be PSD.

    True iff the minimum eigenvalue is >= -tol * max(1, ||B||_max).
    """
    b = _as_complex_matrix(dyn_matrix)
    eigs = hermitian_eigenvalues(b)
    lo = float(eigs[0])
    return CPVerdict(lo >= -tol * max(1.0, max_abs(b)), lo)


def invert(a, sv_threshold: float = DEFAULT_SV_THRESHOLD) -> np.ndarray:
    """Inverse of a process matrix, guarded by a relative singular-value cut.

    Raises :class:`SingularMapError` when min_sv <= sv_threshold * max_sv;
    that error firing is exactly the non-invertibility witness.
    """
    m = _as_complex_matrix(a)
    _square_side(m)
    svs = singular_values(m)
    threshold = sv_threshold * float(svs[-1])
    if svs[0] <= threshold:
        raise SingularMapError(float(svs[0]), threshold)
    return np.linalg.inv(m)


def intermediate_map(a_t, a_s, sv_threshold: float = DEFAULT_SV_THRESHOLD) -> np.ndarray:
    """Map between two intermediate times: A(t, s) = A(t) A(s)^-1.

    Requires A(s) to be invertible; propagates :class:`SingularMapError`.
    """
    at = _as_complex_matrix(a_t)
    return at @ invert(a_s, sv_threshold)


def tp_defect(a) -> float:
    """Trace-preservation defect of a process matrix.

    Max-norm distance of the sum of the d diagonal d x d blocks of
    reshuffle(A) from the identity; zero for trace-preserving maps.
    """
    b = reshuffle(a)
    d = _superop_side(b)
    acc = np.zeros((d, d), dtype=complex)
    for k in range(d):
        acc += b[k * d:(k + 1) * d, k * d:(k + 1) * d]
    return max_abs(acc - np.eye(d))


def hermiticity_preserving_defect(a) -> float:
    """Asymmetry of reshuffle(A); zero iff the map preserves Hermiticity."""
    b = reshuffle(a)
    return max_abs(b - b.conj().T)


def trace_annihilation_defect(l) -> float:
    """Max-norm of the summed diagonal blocks of reshuffle(L).

    Zero exactly when the generator L annihilates the trace (exp(t L) is
    trace-preserving for all t).
    """
    b = reshuffle(l)
    d = _superop_side(b)
    acc = np.zeros((d, d), dtype=complex)
    for k in range(d):
        acc += b[k * d:(k + 1) * d, k * d:(k + 1) * d]
    return max_abs(acc)


# ---------------------------------------------------------------------------
# Superoperator builders (row-major vectorization)
# ---------------------------------------------------------------------------

def left_mult(x) -> np.ndarray:
    """Superoperator of rho -> X rho."""
    x = _as_complex_matrix(x)
    return np.kron(x, np.eye(x.shape[0]))


def right_mult(x) -> np.ndarray:
    """Superoperator of rho -> rho X."""
    x = _as_complex_matrix(x)
    return np.kron(np.eye(x.shape[0]), x.T)


def commutator_superop(h) -> np.ndarray:
    """Superoperator of rho -> [H, rho]."""
    return left_mult(h) - right_mult(h)


def dissipator_superop(lop) -> np.ndarray:
    """Superoperator of rho -> L rho L^dag - (1/2){L^dag L, rho}."""
    l = _as_complex_matrix(lop)
    sandwich = np.kron(l, l.conj())
    n = l.conj().T @ l
    return sandwich - 0.5 * (left_mult(n) + right_mult(n))


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal Hermitian basis of d x d matrices under tr(X^dag Y).

    Element 0 is I/sqrt(d); the remaining d^2 - 1 elements are traceless
    (normalized generalized Gell-Mann matrices). For d = 2 the traceless
    part spans {sigma_x, sigma_y, sigma_z}/sqrt(2).
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    basis = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0 / np.sqrt(2.0)
            basis.append(sym)
            asym = np.zeros((d, d), dtype=complex)
            asym[j, k] = -1j / np.sqrt(2.0)
            asym[k, j] = 1j / np.sqrt(2.0)
            basis.append(asym)
    for k in range(1, d):
        diag = np.zeros((d, d), dtype=complex)
        diag[:k, :k] = np.eye(k)
        diag[k, k] = -k
        basis.append(diag / np.sqrt(k * (k + 1)))
    return basis


# ---------------------------------------------------------------------------
# JSON matrix exchange format: {"dim": n, "re": [[...]], "im": [[...]]}
# ---------------------------------------------------------------------------

def matrix_to_json_dict(m) -> dict:
    """Serialize a complex matrix to the row-major re/im JSON schema."""
    a = _as_complex_matrix(m)
    n = _square_side(a)
    return {"dim": n, "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_json_dict(obj: dict) -> np.ndarray:
    """Parse the re/im JSON schema back into a complex matrix."""
    try:
        n = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from exc
    if re.shape != (n, n) or im.shape != (n, n):
        raise ValueError(
            f"matrix payload shape mismatch: dim={n}, re{re.shape}, im{im.shape}"
        )
    return re + 1j * im
