"""Exact evolution of the walk density over a finite window of sites.

The lattice state ``sum_i rho_i (x) |i><i|`` is stored as an array of
unnormalised d x d blocks, one per site. One step maps every block to
``R rho_{i-1} R* + L rho_{i+1} L*``. Internally the blocks are flattened
row-major, where ``X -> A X A*`` acts as the d^2 x d^2 matrix
``A kron conj(A)``, so a step is two small matrix products over the
occupied band of sites.

With a point mass at 0 and ``n_max`` steps, a window of ``n_max`` sites on
each side is lossless: a nearest-neighbour walk cannot leave it.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .coin import Coin, DensityMatrix
from .errors import DimensionMismatch, InvalidStart, WindowOverflow
from .linalg import adjoint


@dataclass(frozen=True, eq=False)
class LatticeState:
    """Blocks for sites ``lo .. hi`` (inclusive); ``blocks[k]`` is site ``lo + k``."""

    lo: int
    blocks: np.ndarray

    @property
    def hi(self) -> int:
        return self.lo + self.blocks.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.blocks.shape[1]

    @property
    def mass(self) -> float:
        return float(np.trace(self.blocks, axis1=1, axis2=2).real.sum())

    def block(self, site: int) -> np.ndarray:
        return self.blocks[site - self.lo]

    def site_traces(self) -> np.ndarray:
        return np.trace(self.blocks, axis1=1, axis2=2).real

    def min_block_eigenvalue(self) -> float:
        b = (self.blocks + np.conj(np.swapaxes(self.blocks, 1, 2))) / 2
        return float(np.linalg.eigvalsh(b).min())

    @classmethod
    def point_mass(cls, rho, site: int = 0, radius: int = 0, lo: int | None = None,
                   hi: int | None = None) -> "LatticeState":
        rho = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho, dtype=np.complex128)
        lo = site - radius if lo is None else lo
        hi = site + radius if hi is None else hi
        blocks = np.zeros((hi - lo + 1,) + rho.shape, dtype=np.complex128)
        blocks[site - lo] = rho
        return cls(lo, blocks)


def _kraus_superops(c: Coin) -> tuple[np.ndarray, np.ndarray]:
    # transposed so that a row-vector batch ``X`` maps to ``X @ K``
    kl = np.kron(c.left, c.left.conj()).T.copy()
    kr = np.kron(c.right, c.right.conj()).T.copy()
    return kl, kr


def step_phi(s: LatticeState, c: Coin) -> LatticeState:
    """One application of the walk channel; the window is kept fixed."""
    if s.dim != c.dim:
        raise DimensionMismatch(f"lattice blocks are {s.dim}x{s.dim}, coin has dimension {c.dim}")
    if np.any(s.blocks[0] != 0) or np.any(s.blocks[-1] != 0):
        raise WindowOverflow("mass on a boundary site would leave the window")
    d = c.dim
    flat = s.blocks.reshape(len(s.blocks), d * d)
    kl, kr = _kraus_superops(c)
    out = np.zeros_like(flat)
    out[1:] += flat[:-1] @ kr
    out[:-1] += flat[1:] @ kl
    return LatticeState(s.lo, out.reshape(s.blocks.shape))


class _Band:
    """In-place evolver that only touches the occupied band of sites."""

    def __init__(self, c: Coin, rho, start: int, lo: int, hi: int):
        d = c.dim
        rho = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho, dtype=np.complex128)
        if rho.shape != (d, d):
            raise DimensionMismatch(f"density is {rho.shape}, coin has dimension {d}")
        self.d = d
        self.lo = lo
        self.flat = np.zeros((hi - lo + 1, d * d), dtype=np.complex128)
        self.flat[start - lo] = rho.reshape(-1)
        self.a = self.b = start - lo  # occupied index range
        self.kl, self.kr = _kraus_superops(c)
        self.diag = [k * d + k for k in range(d)]

    def step(self) -> None:
        a, b = self.a, self.b
        while a < b and not self.flat[a].any():
            a += 1
        while b > a and not self.flat[b].any():
            b -= 1
        if a - 1 < 0 or b + 1 >= len(self.flat):
            raise WindowOverflow("walk left the window")
        seg = self.flat[a:b + 1].copy()
        self.flat[a - 1:b + 2] = 0
        self.flat[a + 1:b + 2] += seg @ self.kr
        self.flat[a - 1:b] += seg @ self.kl
        self.a, self.b = a - 1, b + 1

    def trace_at(self, site: int) -> float:
        row = self.flat[site - self.lo]
        return float(sum(row[k].real for k in self.diag))

    def clear(self, site: int) -> None:
        self.flat[site - self.lo] = 0

    def state(self) -> LatticeState:
        return LatticeState(self.lo, self.flat.reshape(-1, self.d, self.d).copy())


class SeriesMode(str, enum.Enum):
    RETURN = "return"
    FIRST_RETURN = "first-return"
    ABSORPTION = "absorb"


@dataclass(frozen=True)
class SeriesResult:
    terms: np.ndarray
    partial_sums: np.ndarray
    mode: SeriesMode
    horizon: int

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "term", "partial_sum"])
        for n, (t, s) in enumerate(zip(self.terms, self.partial_sums)):
            w.writerow([n, f"{t:.17g}", f"{s:.17g}"])
        return buf.getvalue()


def compensated_cumsum(terms) -> np.ndarray:
    """Running sums with Kahan-Babuska (Neumaier) compensation."""
    out = np.empty(len(terms))
    total = 0.0
    comp = 0.0
    for i, x in enumerate(terms):
        x = float(x)
        t = total + x
        if abs(total) >= abs(x):
            comp += (total - t) + x
        else:
            comp += (x - t) + total
        total = t
        out[i] = total + comp
    return out


def _result(terms: np.ndarray, mode: SeriesMode, n_max: int) -> SeriesResult:
    terms.flags.writeable = False
    sums = compensated_cumsum(terms)
    sums.flags.writeable = False
    return SeriesResult(terms, sums, mode, n_max)


def evolve(c: Coin, rho, n: int, start: int = 0) -> LatticeState:
    """``Phi^n(rho (x) |start><start|)`` on the window ``[start - n, start + n]``."""
    band = _Band(c, rho, start, start - n - 1, start + n + 1)
    for _ in range(n):
        band.step()
    return band.state()


def return_series(c: Coin, rho, n_max: int) -> SeriesResult:
    """``terms[n] = P(x_n = 0)`` for the walk started at site 0 with internal state rho."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    band = _Band(c, rho, 0, -n_max - 1, n_max + 1)
    terms = np.zeros(n_max + 1)
    terms[0] = band.trace_at(0)
    for n in range(1, n_max + 1):
        band.step()
        terms[n] = band.trace_at(0)
    return _result(terms, SeriesMode.RETURN, n_max)


def _first_passage(c: Coin, rho, start: int, target: int, n_max: int, lo: int, hi: int) -> np.ndarray:
    band = _Band(c, rho, start, lo, hi)
    terms = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        band.step()
        terms[n] = band.trace_at(target)
        band.clear(target)
    return terms


def first_return_series(c: Coin, rho, n_max: int) -> SeriesResult:
    """``terms[n]`` = probability that the first return to 0 happens at step n.

    Each step is followed by reading off and then deleting the mass at site
    0, which realises ``P_0 Phi (Q_0 Phi)^(n-1)``.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    terms = _first_passage(c, rho, 0, 0, n_max, -n_max - 1, n_max + 1)
    return _result(terms, SeriesMode.FIRST_RETURN, n_max)


def absorption_series(c: Coin, rho, m: int, n_max: int) -> SeriesResult:
    """``terms[n]`` = probability of absorption at 0 at step n, starting from site m >= 1."""
    if m < 1:
        raise InvalidStart("start site must be >= 1")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    # site -1 is never reached: mass arriving at 0 is removed before it can move
    terms = _first_passage(c, rho, m, 0, n_max, -1, n_max + m + 1)
    return _result(terms, SeriesMode.ABSORPTION, n_max)


def brute_force_paths(c: Coin, rho, n: int, target: int) -> float:
    """``sum_w Tr(B_w rho B_w*)`` over all words of length n with displacement ``target``.

    Enumerates words depth first and prunes branches that can no longer reach
    ``target``; independent of the lattice evolution above.
    """
    if n > 16:
        raise ValueError("brute force is limited to n <= 16")
    if (n + target) % 2 or abs(target) > n:
        return 0.0
    rho = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho, dtype=np.complex128)
    moves = ((c.left, -1), (c.right, +1))
    total = math.fsum(_paths(moves, rho, n, target))
    return total


def _paths(moves, rho, remaining, target):
    if remaining == 0:
        yield float(np.trace(rho).real)
        return
    for b, s in moves:
        if abs(target - s) <= remaining - 1:
            yield from _paths(moves, b @ rho @ adjoint(b), remaining - 1, target - s)
