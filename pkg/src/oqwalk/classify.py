"""Recurrence and absorption verdicts for homogeneous walks.

Everything is decided by the quantity ``Tr(L*L rho)`` evaluated at the
invariant state of the auxiliary map (or at the pure states of common
eigenvectors of L and R), compared against 1/2. The walk drifts with speed
``mu = 1 - 2 Tr(L*L rho_inf)``: zero drift means recurrence on the line,
non-positive drift means absorption at the origin of the half-line.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .auxmap import (NO_OBSTRUCTION, InvariantStateReport, apply_aux_matrix,
                     aux_irreducibility_evidence, invariant_states,
                     oqw_irreducibility_search)
from .coin import (Coin, CommonEigReport, DensityMatrix, common_eigenvectors,
                   pure_density)
from .errors import DimensionMismatch, NotCommonEigenvector, NotInvariant, OQWError
from .linalg import DEFAULT_TOL, Tolerances, adjoint, max_abs, proj_residual


class Verdict(str, enum.Enum):
    RECURRENT = "Recurrent"
    TRANSIENT = "Transient"
    MIXED_TRANSIENT_ONLY = "MixedTransientOnly"
    INCONCLUSIVE = "Inconclusive"


class AbsorptionKind(str, enum.Enum):
    ABSORBING = "Absorbing"
    NOT_ABSORBING = "NotAbsorbing"
    ABSORBING_ONLY_FOR = "AbsorbingOnlyFor"
    INCONCLUSIVE = "Inconclusive"


class Basis(str, enum.Enum):
    """Which criterion produced a verdict."""

    DIM2_SINGLE_STATE = "dim2/at-most-one-common-eigenvector: compare Tr(L*L rho_inf) with 1/2"
    DIM2_TWO_EIGENVECTORS = "dim2/two-common-eigenvectors: compare Tr(L*L sigma_i) with 1/2 for both"
    UNIQUE_STATE_DRIFT = "unique-invariant-state: Tr(L*L rho_inf) != 1/2 gives nonzero drift"
    IRREDUCIBLE_ZERO_DRIFT = "irreducible-walk: Tr(L*L rho_inf) = 1/2 gives recurrence"
    ABS_UNIQUE_STATE = "absorption/unique-invariant-state: Tr(L*L rho_inf) > 1/2 drifts to the origin"
    ABS_IRREDUCIBLE = "absorption/irreducible-walk: absorbing iff Tr(L*L rho_inf) >= 1/2"
    ABS_DIM2_SINGLE_STATE = "absorption/dim2/at-most-one-common-eigenvector: absorbing iff Tr(L*L rho_inf) >= 1/2"
    ABS_DIM2_TWO_EIGENVECTORS = "absorption/dim2/two-common-eigenvectors: absorbing iff both Tr(L*L sigma_i) >= 1/2"
    NONE = "no criterion applies"

    @property
    def tag(self) -> str:
        return self.value.split(":")[0]


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    basis: Basis
    near_critical: bool = False
    trace_values: tuple[float, ...] = ()
    drift: float | None = None
    exceptional: DensityMatrix | None = None
    invariant_state: DensityMatrix | None = None
    common: CommonEigReport | None = None
    note: str = ""


@dataclass(frozen=True)
class AbsorptionVerdict:
    verdict: AbsorptionKind
    basis: Basis
    trace_values: tuple[float, ...] = ()
    near_critical: bool = False
    absorbing_density: DensityMatrix | None = None
    invariant_state: DensityMatrix | None = None
    note: str = ""
    # orthonormal common eigenbasis for the two-eigenvector case
    eigenbasis: tuple = field(default=(), repr=False)
    # traces within tol_half of 1/2 count as critical, i.e. absorbing
    tol_half: float = DEFAULT_TOL.half

    def probability(self, rho, m: int = 1) -> float:
        """Absorption probability from site ``m`` in the two-eigenvector case.

        In the common eigenbasis ``{u1, u2}`` the off-diagonal part of rho
        never reaches the origin, so the probability is
        ``rho_11 P(sigma_1) + rho_22 P(sigma_2)``, each term a classical
        gambler's ruin with left probability ``t_i``.
        """
        if len(self.eigenbasis) != 2:
            raise OQWError("affine absorption formula needs two common eigenvectors")
        if m < 1:
            raise ValueError("start site must be >= 1")
        rho = np.asarray(rho)
        # written as 1 - (escape mass) so that an absorbing density gives exactly 1
        escape = 0.0
        for u, t in zip(self.eigenbasis, self.trace_values):
            weight = float(np.vdot(u, rho @ u).real)
            escape += weight * (1.0 - classical_absorption(t, m, self.tol_half))
        return 1.0 - escape


def classical_absorption(p_left: float, m: int, tol_half: float = 0.0) -> float:
    """Probability that a classical walk from ``m >= 1`` ever hits 0."""
    if p_left >= 0.5 - tol_half:
        return 1.0
    return (p_left / (1.0 - p_left)) ** m


def left_trace(c: Coin, rho) -> float:
    """``Tr(L*L rho)``: the probability of a left move from internal state rho."""
    rho = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho)
    return float(np.trace(adjoint(c.left) @ c.left @ rho).real)


def drift(c: Coin, rho_inf, tol: Tolerances = DEFAULT_TOL) -> float:
    """Asymptotic speed ``1 - 2 Tr(L*L rho_inf)`` of the walk."""
    rho = np.asarray(rho_inf.matrix if isinstance(rho_inf, DensityMatrix) else rho_inf)
    res = max_abs(apply_aux_matrix(c, rho) - rho)
    if res > tol.invariant:
        raise NotInvariant(f"max|L(rho) - rho| = {res:.3e}")
    mu = 1.0 - 2.0 * left_trace(c, rho)
    direct = float(np.trace(c.right @ rho @ adjoint(c.right)).real
                   - np.trace(c.left @ rho @ adjoint(c.left)).real)
    if abs(mu - direct) > 1e-10:
        raise OQWError(f"drift identity violated: {mu!r} vs {direct!r}")
    return mu


def classical_reduction_check(c: Coin, v) -> float:
    """Left-move probability ``p = |delta|^2`` on a common eigenvector ``v``.

    Started from ``|v><v|`` the internal state never changes, so the position
    is a classical walk with left probability ``p``.
    """
    v = np.asarray(v, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    if proj_residual(c.left, v) > DEFAULT_TOL.eig_match or proj_residual(c.right, v) > DEFAULT_TOL.eig_match:
        raise NotCommonEigenvector("v is not an eigenvector of both L and R")
    delta = np.vdot(v, c.left @ v)
    lam = np.vdot(v, c.right @ v)
    p = left_trace(c, np.outer(v, v.conj()))
    if abs(p - abs(delta) ** 2) > 1e-10 or abs(p + abs(lam) ** 2 - 1) > 1e-10:
        raise OQWError("eigenvalue moduli inconsistent with the coin constraint")
    return p


def _near_half(t: float, tol_half: float) -> bool:
    return abs(t - 0.5) <= tol_half


def _unique_state(c: Coin, tol: Tolerances) -> InvariantStateReport:
    return invariant_states(c, tol)


def classify_dim2(c: Coin, tol_half: float = DEFAULT_TOL.half,
                  tol: Tolerances = DEFAULT_TOL) -> Classification:
    """Complete recurrence criterion for coins of dimension 2."""
    if c.dim != 2:
        raise DimensionMismatch("classify_dim2 needs a coin of dimension 2")
    ce = common_eigenvectors(c, tol)
    if ce.count <= 1:
        rep = _unique_state(c, tol)
        if not rep.unique:
            return Classification(Verdict.INCONCLUSIVE, Basis.NONE, common=ce,
                                  note=f"invariant state not unique (kernel dim {rep.kernel_dim}, "
                                       f"marginal={rep.marginal})")
        rho = rep.state
        t = left_trace(c, rho)
        crit = _near_half(t, tol_half)
        return Classification(Verdict.RECURRENT if crit else Verdict.TRANSIENT,
                              Basis.DIM2_SINGLE_STATE, near_critical=crit, trace_values=(t,),
                              drift=drift(c, rho, tol), invariant_state=rho, common=ce)
    sigmas = [pure_density(v) for v in ce.vectors]
    ts = tuple(left_trace(c, s) for s in sigmas)
    at_half = [_near_half(t, tol_half) for t in ts]
    if all(at_half):
        verdict, exc = Verdict.RECURRENT, None
    elif not any(at_half):
        verdict, exc = Verdict.TRANSIENT, None
    else:
        verdict, exc = Verdict.MIXED_TRANSIENT_ONLY, sigmas[at_half.index(False)]
    return Classification(verdict, Basis.DIM2_TWO_EIGENVECTORS, near_critical=any(at_half),
                          trace_values=ts, exceptional=exc, common=ce,
                          note="drift is density dependent; one drift per common eigenvector: "
                               + ", ".join(f"{1 - 2 * t:.6g}" for t in ts))


def classify_general(c: Coin, tol_half: float = DEFAULT_TOL.half, max_len: int = 8,
                     tol: Tolerances = DEFAULT_TOL) -> Classification:
    """Recurrence criterion for coins of any dimension.

    Transience needs only a unique invariant state with nonzero drift;
    recurrence additionally needs evidence that the walk is irreducible.
    """
    rep = _unique_state(c, tol)
    if not rep.unique:
        return Classification(Verdict.INCONCLUSIVE, Basis.NONE,
                              note=f"invariant state not unique (kernel dim {rep.kernel_dim})")
    rho = rep.state
    t = left_trace(c, rho)
    mu = drift(c, rho, tol)
    if not _near_half(t, tol_half):
        return Classification(Verdict.TRANSIENT, Basis.UNIQUE_STATE_DRIFT, trace_values=(t,),
                              drift=mu, invariant_state=rho)
    aux = aux_irreducibility_evidence(c, tol, report=rep)
    search = oqw_irreducibility_search(c, max_len, tol)
    if aux.aux_irreducible and search.status == NO_OBSTRUCTION:
        return Classification(Verdict.RECURRENT, Basis.IRREDUCIBLE_ZERO_DRIFT, near_critical=True,
                              trace_values=(t,), drift=mu, invariant_state=rho,
                              note=f"{aux.witness}; {search.witness}")
    return Classification(Verdict.INCONCLUSIVE, Basis.NONE, near_critical=True, trace_values=(t,),
                          drift=mu, invariant_state=rho,
                          note=f"zero drift but irreducibility not established: {aux.witness}; "
                               f"{search.witness}")


def classify(c: Coin, tol_half: float = DEFAULT_TOL.half, tol: Tolerances = DEFAULT_TOL) -> Classification:
    return classify_dim2(c, tol_half, tol) if c.dim == 2 else classify_general(c, tol_half, tol=tol)


def classify_absorption_dim2(c: Coin, tol_half: float = DEFAULT_TOL.half,
                             tol: Tolerances = DEFAULT_TOL) -> AbsorptionVerdict:
    """Absorption at the origin of the half-line, dimension-2 coins; L points at the origin."""
    if c.dim != 2:
        raise DimensionMismatch("classify_absorption_dim2 needs a coin of dimension 2")
    ce = common_eigenvectors(c, tol)
    if ce.count <= 1:
        rep = _unique_state(c, tol)
        if not rep.unique:
            return AbsorptionVerdict(AbsorptionKind.INCONCLUSIVE, Basis.NONE,
                                     note="invariant state not unique")
        t = left_trace(c, rep.state)
        kind = AbsorptionKind.ABSORBING if t > 0.5 - tol_half else AbsorptionKind.NOT_ABSORBING
        return AbsorptionVerdict(kind, Basis.ABS_DIM2_SINGLE_STATE, trace_values=(t,),
                                 near_critical=_near_half(t, tol_half), invariant_state=rep.state)
    sigmas = [pure_density(v) for v in ce.vectors]
    ts = tuple(left_trace(c, s) for s in sigmas)
    ok = [t > 0.5 - tol_half for t in ts]
    near = any(_near_half(t, tol_half) for t in ts)
    basis = tuple(ce.vectors)
    if all(ok):
        return AbsorptionVerdict(AbsorptionKind.ABSORBING, Basis.ABS_DIM2_TWO_EIGENVECTORS, ts, near,
                                 eigenbasis=basis, tol_half=tol_half)
    if not any(ok):
        return AbsorptionVerdict(AbsorptionKind.NOT_ABSORBING, Basis.ABS_DIM2_TWO_EIGENVECTORS, ts, near,
                                 eigenbasis=basis, tol_half=tol_half)
    i = ok.index(True)
    j = 1 - i
    note = (f"P(rho) = <u{i + 1}|rho|u{i + 1}> * 1 + <u{j + 1}|rho|u{j + 1}> * "
            f"({ts[j]:.6g}/{1 - ts[j]:.6g})^m; equals 1 only for sigma_{i + 1}")
    return AbsorptionVerdict(AbsorptionKind.ABSORBING_ONLY_FOR, Basis.ABS_DIM2_TWO_EIGENVECTORS, ts, near,
                             absorbing_density=sigmas[i], note=note, eigenbasis=basis, tol_half=tol_half)


def classify_absorption_general(c: Coin, tol_half: float = DEFAULT_TOL.half, max_len: int = 8,
                                tol: Tolerances = DEFAULT_TOL) -> AbsorptionVerdict:
    """Absorption criterion for coins of any dimension; L points at the origin."""
    rep = _unique_state(c, tol)
    if not rep.unique:
        return AbsorptionVerdict(AbsorptionKind.INCONCLUSIVE, Basis.NONE,
                                 note="invariant state not unique")
    rho = rep.state
    t = left_trace(c, rho)
    near = _near_half(t, tol_half)
    if t > 0.5 + tol_half:
        return AbsorptionVerdict(AbsorptionKind.ABSORBING, Basis.ABS_UNIQUE_STATE, (t,), near,
                                 invariant_state=rho)
    aux = aux_irreducibility_evidence(c, tol, report=rep)
    search = oqw_irreducibility_search(c, max_len, tol)
    if aux.aux_irreducible and search.status == NO_OBSTRUCTION:
        kind = AbsorptionKind.ABSORBING if near else AbsorptionKind.NOT_ABSORBING
        return AbsorptionVerdict(kind, Basis.ABS_IRREDUCIBLE, (t,), near, invariant_state=rho,
                                 note=f"{aux.witness}; {search.witness}")
    return AbsorptionVerdict(AbsorptionKind.INCONCLUSIVE, Basis.NONE, (t,), near, invariant_state=rho,
                             note=f"irreducibility not established: {aux.witness}; {search.witness}")


def classify_absorption(c: Coin, tol_half: float = DEFAULT_TOL.half,
                        tol: Tolerances = DEFAULT_TOL) -> AbsorptionVerdict:
    if c.dim == 2:
        return classify_absorption_dim2(c, tol_half, tol)
    return classify_absorption_general(c, tol_half, tol=tol)
