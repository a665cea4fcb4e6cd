"""Small dense complex linear algebra.

Matrices are plain ``numpy`` complex128 arrays of shape (d, d); d is tiny
(d <= 8, usually 2), so everything here favours exactness and transparency
over speed. Hermitian eigenproblems use cyclic Jacobi rotations, kernels use
Gauss-Jordan elimination with partial pivoting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceFailure, NotHermitian


@dataclass(frozen=True)
class Tolerances:
    """Every numerical threshold used by the package, in one place."""

    coin: float = 1e-10
    hermitian: float = 1e-10
    psd: float = 1e-10
    null: float = 1e-10
    eig_match: float = 1e-9
    phase_dup: float = 1e-9
    jordan_gap: float = 1e-8
    half: float = 1e-9
    invariant: float = 1e-8
    faithful: float = 1e-8
    word_search: float = 1e-8
    degenerate_prob: float = 1e-14
    eig_residual: float = 1e-9


DEFAULT_TOL = Tolerances()


class EigenPair(NamedTuple):
    value: complex
    vector: np.ndarray


def as_matrix(m, dim: int | None = None) -> np.ndarray:
    """Coerce to a finite square complex128 array (a copy)."""
    a = np.array(m, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def adjoint(m: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(m))


def max_abs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if np.size(m) else 0.0


def hermitian_eigen(h: np.ndarray, tol: float = DEFAULT_TOL.hermitian,
                    max_sweeps: int = 100) -> list[EigenPair]:
    """Eigen-decompose a Hermitian matrix with cyclic complex Jacobi rotations.

    Returns d pairs with real eigenvalues in ascending order and orthonormal
    eigenvectors.
    """
    a = as_matrix(h)
    scale = max(1.0, max_abs(a))
    if max_abs(a - adjoint(a)) > tol * scale:
        raise NotHermitian(f"max|H - H*| = {max_abs(a - adjoint(a)):.3e}")
    a = (a + adjoint(a)) / 2
    d = a.shape[0]
    v = np.eye(d, dtype=np.complex128)
    fro = np.linalg.norm(a)
    target = 1e-14 * fro

    def off_norm(x):
        return np.linalg.norm(x - np.diag(np.diag(x)))

    sweeps = 0
    while fro > 0 and off_norm(a) >= target:
        if sweeps >= max_sweeps:
            raise ConvergenceFailure(f"Jacobi did not converge in {max_sweeps} sweeps")
        sweeps += 1
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                r = abs(apq)
                if r == 0.0:
                    continue
                phase = apq / r
                app, aqq = a[p, p].real, a[q, q].real
                theta = (aqq - app) / (2.0 * r)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # phase fix on column q, then a real rotation in the (p, q) plane
                g = np.eye(d, dtype=np.complex128)
                g[p, p] = c
                g[p, q] = s
                g[q, p] = -s * np.conj(phase)
                g[q, q] = c * np.conj(phase)
                a = adjoint(g) @ a @ g
                a[p, q] = a[q, p] = 0.0
                v = v @ g
    values = np.real(np.diag(a))
    order = np.argsort(values, kind="stable")
    pairs = []
    for k in order:
        vec = v[:, k] / np.linalg.norm(v[:, k])
        pairs.append(EigenPair(complex(values[k]), vec))
    return pairs


def eigvalsh(h: np.ndarray, tol: float = DEFAULT_TOL.hermitian) -> np.ndarray:
    return np.array([p.value.real for p in hermitian_eigen(h, tol)])


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _eigen_2x2(m: np.ndarray, gap_tol: float) -> tuple[list[EigenPair], bool]:
    a, b = m[0, 0], m[0, 1]
    c, d = m[1, 0], m[1, 1]
    tr = a + d
    det = a * d - b * c
    root = np.sqrt(tr * tr - 4 * det + 0j)
    lam1 = (tr + root) / 2
    lam2 = (tr - root) / 2
    scale = max(1.0, max_abs(m))
    half_tr = tr / 2
    if max_abs(m - half_tr * np.eye(2)) <= 1e-12 * scale:
        # scalar matrix: every vector is an eigenvector
        return [EigenPair(complex(half_tr), np.array([1, 0], dtype=complex)),
                EigenPair(complex(half_tr), np.array([0, 1], dtype=complex))], False

    def vector_for(lam):
        # rows of (M - lam I) annihilate the eigenvector; pick the better-conditioned one
        v1 = np.array([b, lam - a])
        v2 = np.array([lam - d, c])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        return _unit(v)

    if abs(lam1 - lam2) < gap_tol * scale:
        lam = complex(half_tr)
        return [EigenPair(lam, vector_for(lam))], True
    return [EigenPair(complex(lam1), vector_for(lam1)),
            EigenPair(complex(lam2), vector_for(lam2))], False


def eigen_general(m: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> list[EigenPair]:
    """Eigenpairs of a general (non-Hermitian) square matrix.

    For d = 2 a closed form is used and a Jordan block yields a single pair.
    For d > 2 the pairs come from LAPACK (``numpy.linalg.eig``); only pairs
    with residual below ``tol.eig_residual`` are kept and parallel vectors of
    numerically repeated eigenvalues are merged, so fewer than d pairs may be
    returned.
    """
    a = as_matrix(m)
    d = a.shape[0]
    if d == 1:
        return [EigenPair(complex(a[0, 0]), np.array([1.0 + 0j]))]
    if d == 2:
        return _eigen_2x2(a, tol.jordan_gap)[0]
    try:
        values, vectors = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(str(exc)) from exc
    scale = max(1.0, max_abs(a))
    pairs: list[EigenPair] = []
    for k in range(d):
        vec = _unit(vectors[:, k])
        lam = complex(values[k])
        if np.linalg.norm(a @ vec - lam * vec) > tol.eig_residual * scale:
            continue
        if any(abs(np.vdot(p.vector, vec)) > 1 - tol.phase_dup for p in pairs):
            continue
        pairs.append(EigenPair(lam, vec))
    if not pairs:
        raise ConvergenceFailure("no eigenpair met the residual bound")
    return pairs


def is_jordan_degenerate(m: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True for a 2x2 matrix whose eigenvalue gap is below ``tol.jordan_gap``
    without the matrix being scalar."""
    a = as_matrix(m, 2)
    return _eigen_2x2(a, tol.jordan_gap)[1]


def gauss_jordan_kernel(m: np.ndarray, tol: float = DEFAULT_TOL.null,
                        scale: float | None = None):
    """Kernel of ``m`` by Gauss-Jordan elimination with partial pivoting.

    Returns ``(basis, pivots, threshold)`` where ``basis`` is a list of raw
    (not yet orthonormalised) kernel vectors, ``pivots`` the magnitudes of the
    accepted pivots and ``threshold`` the rejection threshold
    ``tol * ||m||_F`` (or ``tol * scale`` when ``scale`` is given).
    """
    a = np.array(m, dtype=np.complex128)
    rows, cols = a.shape
    threshold = tol * (float(np.linalg.norm(a)) if scale is None else scale)
    pivot_cols: list[int] = []
    pivots: list[float] = []
    r = 0
    for j in range(cols):
        if r >= rows:
            break
        k = r + int(np.argmax(np.abs(a[r:, j])))
        piv = abs(a[k, j])
        if piv <= threshold:
            continue
        if k != r:
            a[[r, k]] = a[[k, r]]
        a[r] = a[r] / a[r, j]
        for i in range(rows):
            if i != r and a[i, j] != 0:
                a[i] = a[i] - a[i, j] * a[r]
        pivot_cols.append(j)
        pivots.append(float(piv))
        r += 1
    free = [j for j in range(cols) if j not in pivot_cols]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.complex128)
        v[f] = 1.0
        for row, pc in enumerate(pivot_cols):
            v[pc] = -a[row, f]
        basis.append(v)
    return basis, pivots, threshold


def orthonormalize(vectors: list[np.ndarray]) -> list[np.ndarray]:
    """Modified Gram-Schmidt, applied twice for stability."""
    out: list[np.ndarray] = []
    for v in vectors:
        w = np.array(v, dtype=np.complex128)
        for _ in range(2):
            for q in out:
                w = w - np.vdot(q, w) * q
        n = np.linalg.norm(w)
        if n > 1e-13:
            out.append(w / n)
    return out


def null_space(m: np.ndarray, tol: float = DEFAULT_TOL.null) -> list[np.ndarray]:
    """Orthonormal basis of the kernel of ``m`` (empty list if trivial)."""
    basis, _, _ = gauss_jordan_kernel(m, tol)
    return orthonormalize(basis)


def is_psd(h: np.ndarray, tol: float = DEFAULT_TOL.psd) -> bool:
    """Minimum eigenvalue >= -tol. Raises ``NotHermitian`` if ``h`` is not
    Hermitian within ``tol``."""
    return min_eigenvalue(h, tol) >= -tol


def min_eigenvalue(h: np.ndarray, tol: float = DEFAULT_TOL.hermitian) -> float:
    return hermitian_eigen(h, tol)[0].value.real


def proj_residual(m: np.ndarray, v: np.ndarray) -> float:
    """Distance of ``m v`` from the line spanned by the unit vector ``v``."""
    w = m @ v
    return float(np.linalg.norm(w - np.vdot(v, w) * v))
