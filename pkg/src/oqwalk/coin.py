"""Coins (L, R), internal densities, and the coin file format.

A coin is a pair of d x d matrices with ``L*L + R*R = I``: ``L`` moves the
walker one site to the left, ``R`` one site to the right.

Coin file (JSON)::

    {"dim": 2,
     "L": [[{"re": "1/sqrt(3)", "im": "0"}, ...], ...],
     "R": [[...], ...]}

Entry strings use the micro-grammar of :mod:`oqwalk.expr`. Density files
have the same layout with a single key ``"rho"``. Family files add
``"params": {"x": {"domain": [0, 0.5], "open": true}}`` and may use the
declared names inside entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from . import linalg
from .errors import (DimensionMismatch, InvalidDensity, NotTracePreserving,
                     ParseError)
from .expr import ExprError, evaluate
from .linalg import DEFAULT_TOL, Tolerances, adjoint, max_abs, proj_residual


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Coin:
    left: np.ndarray
    right: np.ndarray
    residual: float = 0.0
    name: str = ""
    # original entry strings, kept so that serialisation round-trips exactly
    source: Mapping[str, Any] | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.left.shape[0]

    @property
    def L(self) -> np.ndarray:
        return self.left

    @property
    def R(self) -> np.ndarray:
        return self.right

    def conjugated(self, u: np.ndarray) -> "Coin":
        """The unitarily equivalent coin ``(U L U*, U R U*)``."""
        u = np.asarray(u, dtype=np.complex128)
        return validate_coin(u @ self.left @ adjoint(u), u @ self.right @ adjoint(u),
                             name=self.name)

    def with_phases(self, theta: float = 0.0, phi: float = 0.0) -> "Coin":
        return validate_coin(np.exp(1j * theta) * self.left, np.exp(1j * phi) * self.right,
                             name=self.name)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def density(m, tol: float = DEFAULT_TOL.psd) -> DensityMatrix:
    """Validate ``m`` as a density: Hermitian, PSD and unit trace within ``tol``."""
    try:
        a = linalg.as_matrix(m)
    except ValueError as exc:
        raise InvalidDensity(str(exc)) from exc
    if max_abs(a - adjoint(a)) > tol:
        raise InvalidDensity("density is not Hermitian")
    a = (a + adjoint(a)) / 2
    if abs(np.trace(a) - 1) > tol:
        raise InvalidDensity(f"density trace is {np.trace(a).real!r}, not 1")
    if not linalg.is_psd(a, tol):
        raise InvalidDensity("density is not positive semidefinite")
    return DensityMatrix(_frozen(a))


def pure_density(v) -> DensityMatrix:
    v = np.asarray(v, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    return density(np.outer(v, v.conj()))


def maximally_mixed(d: int) -> DensityMatrix:
    return density(np.eye(d) / d)


def coin_residual(left: np.ndarray, right: np.ndarray) -> float:
    d = left.shape[0]
    return max_abs(adjoint(left) @ left + adjoint(right) @ right - np.eye(d))


def validate_coin(left, right, tol: float = DEFAULT_TOL.coin, *, name: str = "",
                  source: Mapping[str, Any] | None = None) -> Coin:
    """Build a :class:`Coin`, checking ``max|L*L + R*R - I| <= tol``."""
    try:
        lm = linalg.as_matrix(left)
        rm = linalg.as_matrix(right)
    except ValueError as exc:
        raise DimensionMismatch(str(exc)) from exc
    if lm.shape != rm.shape:
        raise DimensionMismatch(f"L is {lm.shape}, R is {rm.shape}")
    res = coin_residual(lm, rm)
    if res > tol:
        raise NotTracePreserving(res, tol)
    return Coin(_frozen(lm), _frozen(rm), residual=res, name=name, source=source)


# ---------------------------------------------------------------------------
# common eigenvectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CommonEigReport:
    count: int
    vectors: list[np.ndarray]
    eigen_left: list[complex]
    eigen_right: list[complex]
    degenerate: bool = False
    # False when a defective L (d > 2) prevented a complete search
    complete: bool = True


def _is_scalar(m: np.ndarray, tol: float = 1e-12) -> bool:
    d = m.shape[0]
    return max_abs(m - (np.trace(m) / d) * np.eye(d)) <= tol * max(1.0, max_abs(m))


def _dedupe(vectors: list[np.ndarray], tol: float) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for v in vectors:
        if all(abs(np.vdot(u, v)) <= 1 - tol for u in out):
            out.append(v)
    return out


def _common_lines_2x2(a: np.ndarray, b: np.ndarray, tol: Tolerances):
    """Common eigenvectors of two 2x2 matrices.

    Returns ``(vectors, everything, degenerate)``; ``everything`` is True when
    both matrices are scalar, so that every vector is a common eigenvector.
    """
    a_scalar, b_scalar = _is_scalar(a), _is_scalar(b)
    if a_scalar and b_scalar:
        e = np.eye(2, dtype=np.complex128)
        return [e[0], e[1]], True, False
    src, other = (b, a) if a_scalar else (a, b)
    pairs, degenerate = linalg._eigen_2x2(src, tol.jordan_gap)
    found = [p.vector for p in pairs
             if proj_residual(other, p.vector) <= tol.eig_match
             and proj_residual(src, p.vector) <= tol.eig_match]
    return _dedupe(found, tol.phase_dup), False, degenerate


def _eigenspaces(m: np.ndarray, tol: Tolerances):
    """Eigenspaces of ``m`` as orthonormal column blocks, plus a defectiveness flag."""
    values = np.linalg.eigvals(m)
    scale = max(1.0, max_abs(m))
    clusters: list[list[complex]] = []
    for lam in values:
        for cl in clusters:
            if abs(cl[0] - lam) <= 1e-6 * scale:
                cl.append(lam)
                break
        else:
            clusters.append([lam])
    spaces = []
    defective = False
    d = m.shape[0]
    for cl in clusters:
        lam = complex(np.mean(cl))
        basis = linalg.null_space(m - lam * np.eye(d), tol=1e-7)
        if len(basis) < len(cl):
            defective = True
        if basis:
            spaces.append((lam, np.column_stack(basis)))
    return spaces, defective


def _common_eigvecs_general(left: np.ndarray, right: np.ndarray, tol: Tolerances):
    spaces_l, def_l = _eigenspaces(left, tol)
    spaces_r, def_r = _eigenspaces(right, tol)
    found: list[np.ndarray] = []
    for _, ql in spaces_l:
        for _, qr in spaces_r:
            stacked = np.hstack([ql, -qr])
            for coeff in linalg.null_space(stacked, tol=1e-8):
                v = ql @ coeff[: ql.shape[1]]
                if np.linalg.norm(v) < 1e-12:
                    continue
                v = v / np.linalg.norm(v)
                if proj_residual(left, v) <= tol.eig_match and proj_residual(right, v) <= tol.eig_match:
                    found.append(v)
    return _dedupe(found, tol.phase_dup), not def_l


def common_eigenvectors(c: Coin, tol: Tolerances = DEFAULT_TOL) -> CommonEigReport:
    """Common eigenvectors of L and R, counted up to phase.

    For d = 2 the count is 0, 1 or 2; when two independent common
    eigenvectors exist the reported pair is orthonormal (u1, u2 = u1-perp).
    """
    L, R = c.left, c.right
    d = c.dim
    degenerate = False
    complete = True
    if d == 1:
        vecs = [np.array([1.0 + 0j])]
    elif d == 2:
        vecs, _, degenerate = _common_lines_2x2(L, R, tol)
        if len(vecs) >= 2:
            u1 = vecs[0]
            u2 = np.array([-np.conj(u1[1]), np.conj(u1[0])])
            vecs = [u1, u2]
    else:
        vecs, complete = _common_eigvecs_general(L, R, tol)
    return CommonEigReport(
        count=len(vecs),
        vectors=vecs,
        eigen_left=[complex(np.vdot(v, L @ v)) for v in vecs],
        eigen_right=[complex(np.vdot(v, R @ v)) for v in vecs],
        degenerate=degenerate,
        complete=complete,
    )


# ---------------------------------------------------------------------------
# reducibility of the walk, d = 2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducibilityReport:
    walk_reducible: bool | None = None
    aux_irreducible: bool | None = None
    witness: str | None = None
    status: str | None = None
    vectors: tuple = ()


def _fmt_vec(v: np.ndarray) -> str:
    return "[" + ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in v) + "]"


def _in_line(m: np.ndarray, u: np.ndarray, target: np.ndarray, tol: float) -> bool:
    w = m @ u
    return float(np.linalg.norm(w - np.vdot(target, w) * target)) <= tol


def walk_reducibility_dim2(c: Coin, tol: Tolerances = DEFAULT_TOL) -> ReducibilityReport:
    """Decide reducibility of the walk of a dimension-2 coin.

    ``W`` is the set of common eigenvectors of ``LR`` and ``RL``. The walk is
    reducible iff ``W`` contains an eigenvector of ``L`` or ``R``, or ``W``
    is the union of two lines ``u, v`` that ``L`` and ``R`` both swap.
    """
    if c.dim != 2:
        raise DimensionMismatch("walk_reducibility_dim2 needs a coin of dimension 2")
    L, R = c.left, c.right
    w, everything, _ = _common_lines_2x2(L @ R, R @ L, tol)
    if everything:
        # W is all of C^2, and L always has an eigenvector
        v = linalg.eigen_general(L, tol)[0].vector
        return ReducibilityReport(True, None, f"LR, RL scalar; eigenvector {_fmt_vec(v)} of L lies in W",
                                  vectors=(v,))
    for v in w:
        for name, m in (("L", L), ("R", R)):
            if proj_residual(m, v) <= tol.eig_match:
                return ReducibilityReport(True, None, f"{_fmt_vec(v)} in W is an eigenvector of {name}",
                                          vectors=(v,))
    if len(w) == 2:
        u, v = w
        t = tol.eig_match
        if all(_in_line(m, u, v, t) for m in (L, R)) and all(_in_line(m, v, u, t) for m in (L, R)):
            return ReducibilityReport(True, None, f"L and R swap the lines {_fmt_vec(u)} and {_fmt_vec(v)}",
                                      vectors=(u, v))
    return ReducibilityReport(False, None, f"|W| = {len(w)} lines, neither reducibility condition holds")


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def _locate(text: str, needle: str) -> tuple[int, int]:
    idx = text.find(needle)
    if idx < 0:
        return 1, 1
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return line, col


def _load_json(text) -> tuple[dict, str]:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise ParseError("top-level JSON value must be an object")
    return doc, text


def _entry_text(entry) -> tuple[str, str]:
    if isinstance(entry, dict):
        unknown = set(entry) - {"re", "im"}
        if unknown or "re" not in entry:
            raise ExprError(f"entry must have keys 're' and optional 'im', got {sorted(entry)}")
        return entry["re"], entry.get("im", "0")
    return entry, "0"


def _read_matrix(doc: dict, key: str, dim: int, text: str, variables) -> tuple[np.ndarray, list]:
    if key not in doc:
        raise ParseError(f"missing key {key!r}")
    rows = doc[key]
    line, col = _locate(text, f'"{key}"')
    if not isinstance(rows, list) or len(rows) != dim or \
            any(not isinstance(r, list) or len(r) != dim for r in rows):
        raise ParseError(f"{key!r} must be a {dim}x{dim} array of entries", line, col)
    out = np.zeros((dim, dim), dtype=np.complex128)
    src = []
    for i, row in enumerate(rows):
        src_row = []
        for j, entry in enumerate(row):
            try:
                re_s, im_s = _entry_text(entry)
                out[i, j] = complex(evaluate(re_s, variables), evaluate(im_s, variables))
            except ExprError as exc:
                needle = entry.get("re", "") if isinstance(entry, dict) else entry
                line, col = _locate(text, json.dumps(needle))
                raise ParseError(f"{key}[{i}][{j}]: {exc}", line, col) from exc
            src_row.append({"re": re_s, "im": im_s})
        src.append(src_row)
    return out, src


def _read_dim(doc: dict, text: str) -> int:
    dim = doc.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ParseError("'dim' must be a positive integer", *_locate(text, '"dim"'))
    return dim


def parse_coin(text, tol: float = DEFAULT_TOL.coin, variables: Mapping[str, float] | None = None,
               name: str = "") -> Coin:
    """Parse a coin file (bytes or str) and validate it."""
    doc, text = _load_json(text)
    dim = _read_dim(doc, text)
    env = dict(variables or {})
    for pname, spec in (doc.get("params") or {}).items():
        if pname not in env and isinstance(spec, dict) and "default" in spec:
            env[pname] = float(spec["default"])
    lm, lsrc = _read_matrix(doc, "L", dim, text, env)
    rm, rsrc = _read_matrix(doc, "R", dim, text, env)
    return validate_coin(lm, rm, tol, name=name or str(doc.get("name", "")),
                         source={"L": lsrc, "R": rsrc} if not variables else None)


def parse_density(text, dim: int | None = None, tol: float = DEFAULT_TOL.psd) -> DensityMatrix:
    doc, text = _load_json(text)
    d = _read_dim(doc, text)
    if dim is not None and d != dim:
        raise DimensionMismatch(f"density has dimension {d}, coin has {dim}")
    m, _ = _read_matrix(doc, "rho", d, text, {})
    return density(m, tol)


def _float_entry(z: complex) -> dict:
    return {"re": repr(float(z.real)), "im": repr(float(z.imag))}


def matrix_to_json(m: np.ndarray) -> list:
    return [[_float_entry(z) for z in row] for row in np.asarray(m)]


def coin_to_json(c: Coin) -> str:
    """Serialise a coin; entries parsed from a file keep their original strings."""
    if c.source is not None:
        doc = {"dim": c.dim, "L": c.source["L"], "R": c.source["R"]}
    else:
        doc = {"dim": c.dim, "L": matrix_to_json(c.left), "R": matrix_to_json(c.right)}
    if c.name:
        doc = {"name": c.name, **doc}
    return json.dumps(doc, indent=1)


def density_to_json(rho: DensityMatrix) -> str:
    return json.dumps({"dim": rho.dim, "rho": matrix_to_json(rho.matrix)}, indent=1)


@dataclass(frozen=True)
class CoinFamily:
    """A coin file whose entries depend on named parameters."""

    text: str
    params: Mapping[str, Mapping[str, Any]]
    name: str = ""

    def instantiate(self, tol: float = DEFAULT_TOL.coin, **values: float) -> Coin:
        return parse_coin(self.text, tol, variables=values, name=self.name)

    def boundary_status(self, pname: str, value: float, eps: float = 1e-12) -> str:
        """'interior', 'boundary' or 'outside' relative to the declared domain."""
        spec = self.params.get(pname) or {}
        dom = spec.get("domain")
        if not dom:
            return "interior"
        lo, hi = float(dom[0]), float(dom[1])
        if abs(value - lo) <= eps or abs(value - hi) <= eps:
            return "boundary" if spec.get("open", True) else "interior"
        return "interior" if lo < value < hi else "outside"


def parse_family(text) -> CoinFamily:
    doc, text = _load_json(text)
    _read_dim(doc, text)
    params = doc.get("params")
    if not isinstance(params, dict) or not params:
        raise ParseError("family file needs a non-empty 'params' object", *_locate(text, '"params"'))
    return CoinFamily(text=text, params=params, name=str(doc.get("name", "")))
