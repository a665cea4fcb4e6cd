"""The auxiliary channel ``rho -> L rho L* + R rho R*`` and its invariant states.

Vectorisation is column stacking throughout: ``vec(A X B) = (B^T kron A) vec(X)``,
so the channel acts on ``vec(rho)`` as ``conj(L) kron L + conj(R) kron R``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .coin import (Coin, DensityMatrix, ReducibilityReport, _fmt_vec, _is_scalar,
                   common_eigenvectors, density)
from .errors import DimensionMismatch, NoInvariantState
from .linalg import DEFAULT_TOL, Tolerances, adjoint, max_abs, proj_residual


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


def apply_aux_matrix(c: Coin, rho: np.ndarray) -> np.ndarray:
    L, R = c.left, c.right
    return L @ rho @ adjoint(L) + R @ rho @ adjoint(R)


def apply_aux(c: Coin, rho: DensityMatrix) -> DensityMatrix:
    m = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho)
    if m.shape != (c.dim, c.dim):
        raise DimensionMismatch(f"density is {m.shape}, coin has dimension {c.dim}")
    return density(apply_aux_matrix(c, m))


@dataclass(frozen=True)
class Superoperator:
    dim: int
    matrix: np.ndarray

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)


def build_superoperator(c: Coin) -> Superoperator:
    L, R = c.left, c.right
    m = np.kron(L.conj(), L) + np.kron(R.conj(), R)
    m.flags.writeable = False
    return Superoperator(c.dim, m)


@dataclass(frozen=True)
class InvariantStateReport:
    kernel_dim: int
    states: list[DensityMatrix]
    unique: bool
    faithful: bool
    min_eigenvalue: float
    # a pivot within 10x of the rank threshold: a second kernel direction is
    # numerically possible, so uniqueness is not asserted
    marginal: bool = False
    residuals: list[float] = field(default_factory=list)

    @property
    def state(self) -> DensityMatrix:
        if not self.unique:
            raise NoInvariantState("invariant state is not unique")
        return self.states[0]


def _hermitian_candidates(v: np.ndarray, d: int):
    V = unvec(v, d)
    yield (V + adjoint(V)) / 2
    yield (V - adjoint(V)) / 2j


def invariant_states(c: Coin, tol: Tolerances = DEFAULT_TOL) -> InvariantStateReport:
    """Invariant densities of the auxiliary map from the kernel of ``M - I``."""
    d = c.dim
    sup = build_superoperator(c)
    a = sup.matrix - np.eye(d * d)
    # M - I of a channel has natural scale 1; a near-zero norm must not shrink
    # the rank threshold to nothing
    scale = max(float(np.linalg.norm(a)), 1.0)
    raw, pivots, threshold = linalg.gauss_jordan_kernel(a, tol.null, scale)
    kernel = linalg.orthonormalize(raw)
    marginal = any(p <= 10 * threshold for p in pivots)
    states: list[DensityMatrix] = []
    residuals: list[float] = []
    for v in kernel:
        for h in _hermitian_candidates(v, d):
            tr = np.trace(h)
            if abs(tr) <= 1e-8:
                continue
            h = h / tr.real
            if not linalg.is_psd(h, tol.invariant):
                continue
            if any(max_abs(h - s.matrix) <= tol.invariant for s in states):
                continue
            # clip tiny negative eigenvalues introduced by round-off
            h = _clip_psd(h)
            states.append(density(h, tol.invariant))
            residuals.append(max_abs(apply_aux_matrix(c, h) - h))
    if kernel and not states:
        raise NoInvariantState("kernel of M - I contains no trace-normalisable positive element")
    unique = len(kernel) == 1 and not marginal
    faithful = False
    min_eig = float("nan")
    if len(kernel) == 1 and states:
        min_eig = linalg.min_eigenvalue(states[0].matrix)
        faithful = unique and min_eig > tol.faithful
    return InvariantStateReport(len(kernel), states, unique, faithful, min_eig, marginal, residuals)


def _clip_psd(h: np.ndarray) -> np.ndarray:
    pairs = linalg.hermitian_eigen(h)
    if pairs[0].value.real >= 0:
        return h
    out = np.zeros_like(h)
    for p in pairs:
        out += max(p.value.real, 0.0) * np.outer(p.vector, p.vector.conj())
    return out / np.trace(out).real


def fixed_point_iteration(c: Coin, steps: int = 2000) -> np.ndarray:
    """``L^steps(I/d)``; an independent cross-check of the kernel computation."""
    rho = np.eye(c.dim, dtype=np.complex128) / c.dim
    for _ in range(steps):
        rho = apply_aux_matrix(c, rho)
    return rho


def aux_irreducibility_evidence(c: Coin, tol: Tolerances = DEFAULT_TOL,
                                report: InvariantStateReport | None = None) -> ReducibilityReport:
    """Irreducibility of the auxiliary map, when it can be certified.

    A unique faithful invariant state proves irreducibility; a common
    eigenvector of L and R spans a common invariant subspace and disproves
    it. Otherwise the answer is unknown (``None``).
    """
    report = report if report is not None else invariant_states(c, tol)
    if report.unique and report.faithful:
        return ReducibilityReport(
            aux_irreducible=True,
            witness=f"unique faithful invariant state, min eigenvalue {report.min_eigenvalue:.6g}")
    ce = common_eigenvectors(c, tol)
    if ce.count > 0 and c.dim > 1:
        v = ce.vectors[0]
        return ReducibilityReport(aux_irreducible=False,
                                  witness=f"common eigenvector {_fmt_vec(v)} of L and R",
                                  vectors=(v,))
    return ReducibilityReport(aux_irreducible=None,
                              witness="no certificate either way")


def balanced_words(length: int):
    """All words in {-1, +1}^length with zero sum (-1 = L, +1 = R)."""
    if length % 2:
        return
    for pos in itertools.combinations(range(length), length // 2):
        word = [-1] * length
        for p in pos:
            word[p] = 1
        yield tuple(word)


def word_product(c: Coin, word) -> np.ndarray:
    """``B_{s_l} ... B_{s_1}`` with ``B_{-1} = L`` and ``B_{+1} = R``."""
    out = np.eye(c.dim, dtype=np.complex128)
    for s in word:
        out = (c.right if s > 0 else c.left) @ out
    return out


NO_OBSTRUCTION = "no-obstruction"
REDUCIBLE_CANDIDATE = "reducible-candidate"


def oqw_irreducibility_search(c: Coin, max_len: int = 8,
                              tol: Tolerances = DEFAULT_TOL) -> ReducibilityReport:
    """Look for a subspace left invariant by every balanced word up to ``max_len``.

    Finding one only makes the walk a reducibility candidate, since longer
    words are not checked; never finding one is reported as "no obstruction"
    and never as a proof of irreducibility. For d = 2 the search intersects
    the invariant lines of the products; for larger d it computes the
    dimension of their linear span (Burnside: a span equal to all d x d
    matrices rules out any common invariant subspace).
    """
    if max_len < 2 or max_len % 2 or max_len > 12:
        raise ValueError("max_len must be even, between 2 and 12")
    d = c.dim
    products = [word_product(c, w) for l in range(2, max_len + 1, 2) for w in balanced_words(l)]
    if d == 1:
        return ReducibilityReport(status=NO_OBSTRUCTION, witness="dimension 1 has no proper subspace")
    if d == 2:
        informative = [b for b in products if not _is_scalar(b, 1e-12)]
        if not informative:
            return ReducibilityReport(status=REDUCIBLE_CANDIDATE,
                                      witness=f"all {len(products)} balanced words are scalar")
        for pair in linalg.eigen_general(informative[0], tol):
            v = pair.vector
            if all(proj_residual(b, v) <= tol.word_search * max(1.0, max_abs(b)) for b in informative):
                return ReducibilityReport(
                    status=REDUCIBLE_CANDIDATE, vectors=(v,),
                    witness=f"line {_fmt_vec(v)} invariant under all {len(products)} "
                            f"balanced words up to length {max_len}")
        return ReducibilityReport(status=NO_OBSTRUCTION,
                                  witness=f"no common invariant line among {len(products)} words")
    span = np.array([np.eye(d).reshape(-1)] + [b.reshape(-1) for b in products])
    rank = int(np.linalg.matrix_rank(span, tol=tol.word_search * max(1.0, max_abs(span))))
    if rank == d * d:
        return ReducibilityReport(status=NO_OBSTRUCTION,
                                  witness=f"balanced words up to length {max_len} span all {d}x{d} matrices")
    return ReducibilityReport(status=REDUCIBLE_CANDIDATE,
                              witness=f"span of balanced words has dimension {rank} < {d * d}")
