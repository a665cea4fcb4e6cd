"""Quantum-trajectory Monte Carlo for the chain (x_n, rho_n).

At every step the walker moves left with probability ``p_L = Tr(L rho L*)``
and its internal state becomes ``L rho L* / p_L``; otherwise it moves right
with ``R rho R*`` renormalised.

Random numbers come from SplitMix64 used as a counter-based generator.
Trajectory ``i`` gets the seed ``child_i``, the i-th output of a SplitMix64
stream seeded with the master seed, and its n-th uniform is the n-th output
of a SplitMix64 stream seeded with ``child_i``. Any uniform can therefore be
computed directly from ``(master_seed, i, n)`` with no shared state.

Trajectories are advanced in vectorised batches. The batch kernel uses only
elementwise float64 multiply/add/divide in a fixed order (no BLAS, no
complex ufuncs), so a trajectory's path is bit-identical whatever batch or
worker it runs in, and bit-identical to the scalar :func:`step_trajectory`.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coin import Coin, DensityMatrix, density
from .errors import DimensionMismatch, InvalidStart

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_U64 = np.uint64


# ---------------------------------------------------------------------------
# SplitMix64
# ---------------------------------------------------------------------------

def mix64(z: int) -> int:
    """SplitMix64 output finaliser (Stafford variant 13)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> _U64(30))
    z = z * _U64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> _U64(27))
    z = z * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


def child_seed(master_seed: int, index: int) -> int:
    return mix64(master_seed + (index + 1) * GOLDEN_GAMMA)


def child_seeds(master_seed: int, indices: np.ndarray) -> np.ndarray:
    idx = np.asarray(indices, dtype=_U64)
    with np.errstate(over="ignore"):
        z = _U64(master_seed & _MASK64) + (idx + _U64(1)) * _U64(GOLDEN_GAMMA)
        return _mix64_array(z)


def uniform(seed: int, n: int) -> float:
    """The n-th (0-based) uniform in [0, 1) of the stream seeded by ``seed``."""
    return (mix64(seed + (n + 1) * GOLDEN_GAMMA) >> 11) * 2.0 ** -53


def uniforms(seeds: np.ndarray, n: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = seeds + _U64(((n + 1) * GOLDEN_GAMMA) & _MASK64)
        z = _mix64_array(z)
    return (z >> _U64(11)).astype(np.float64) * 2.0 ** -53


# ---------------------------------------------------------------------------
# one step
# ---------------------------------------------------------------------------

DEGENERATE_PROB = 1e-14


def _program(a: np.ndarray) -> list[list[tuple[int, float, float]]]:
    """Nonzero entries of ``X -> A X A*`` on row-major flattened X, by output index."""
    k = np.kron(a, a.conj())
    return [[(j, float(k[i, j].real), float(k[i, j].imag)) for j in range(k.shape[1]) if k[i, j] != 0]
            for i in range(k.shape[0])]


@dataclass(frozen=True)
class _Kernel:
    d: int
    left: list
    right: list

    @classmethod
    def of(cls, c: Coin) -> "_Kernel":
        return cls(c.dim, _program(c.left), _program(c.right))

    @property
    def diag(self) -> list[int]:
        return [k * self.d + k for k in range(self.d)]


def _apply(prog, xr, xi, zero):
    # identical operation order for python floats and numpy arrays
    outr, outi = [], []
    for row in prog:
        ar = zero
        ai = zero
        for j, kr, ki in row:
            ar = ar + (kr * xr[j] - ki * xi[j])
            ai = ai + (kr * xi[j] + ki * xr[j])
        outr.append(ar)
        outi.append(ai)
    return outr, outi


def _trace(diag, xr, zero):
    t = zero
    for k in diag:
        t = t + xr[k]
    return t


@dataclass(frozen=True)
class TrajectoryState:
    position: int
    internal: DensityMatrix
    time: int = 0


def step_trajectory(s: TrajectoryState, c: Coin, u: float) -> TrajectoryState:
    """Advance one trajectory by one step using the uniform ``u``."""
    rho = s.internal.matrix if isinstance(s.internal, DensityMatrix) else np.asarray(s.internal)
    if rho.shape != (c.dim, c.dim):
        raise DimensionMismatch(f"internal state is {rho.shape}, coin has dimension {c.dim}")
    kern = _Kernel.of(c)
    flat = rho.reshape(-1)
    xr = [float(z.real) for z in flat]
    xi = [float(z.imag) for z in flat]
    left, xr, xi = _scalar_step(kern, xr, xi, u)
    m = (np.array(xr) + 1j * np.array(xi)).reshape(c.dim, c.dim)
    return TrajectoryState(s.position + (-1 if left else 1), DensityMatrix(m), s.time + 1)


def _scalar_step(kern: _Kernel, xr, xi, u: float):
    lr, li = _apply(kern.left, xr, xi, 0.0)
    rr, ri = _apply(kern.right, xr, xi, 0.0)
    p_left = _trace(kern.diag, lr, 0.0)
    p_right = _trace(kern.diag, rr, 0.0)
    if p_right < DEGENERATE_PROB:
        left = True
    elif p_left < DEGENERATE_PROB:
        left = False
    else:
        left = u < p_left
    if left:
        return True, [v / p_left for v in lr], [v / p_left for v in li]
    return False, [v / p_right for v in rr], [v / p_right for v in ri]


def _batch_step(kern: _Kernel, xr, xi, u: np.ndarray):
    """Vectorised :func:`_scalar_step`; ``xr``/``xi`` are lists of d*d arrays."""
    zero = np.zeros(u.shape[0])
    lr, li = _apply(kern.left, xr, xi, zero)
    rr, ri = _apply(kern.right, xr, xi, zero)
    p_left = _trace(kern.diag, lr, zero)
    p_right = _trace(kern.diag, rr, zero)
    left = np.where(p_right < DEGENERATE_PROB, True,
                    np.where(p_left < DEGENERATE_PROB, False, u < p_left))
    den_l = np.where(left, p_left, 1.0)
    den_r = np.where(left, 1.0, p_right)
    nr = [np.where(left, a / den_l, b / den_r) for a, b in zip(lr, rr)]
    ni = [np.where(left, a / den_l, b / den_r) for a, b in zip(li, ri)]
    return left, nr, ni


# ---------------------------------------------------------------------------
# batched simulation
# ---------------------------------------------------------------------------

class Quantity(str, enum.Enum):
    DRIFT = "Drift"
    RETURN = "ReturnByHorizon"
    ABSORPTION = "AbsorbedByHorizon"
    MEAN_VISITS = "MeanVisits"


@dataclass(frozen=True)
class SimConfig:
    master_seed: int
    n_trajectories: int
    horizon: int
    init: DensityMatrix
    site: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class Trajectories:
    """Per-trajectory summaries, in trajectory-index order."""

    t0: np.ndarray          # first hitting time of the target site, -1 if none by the horizon
    visits: np.ndarray      # number of n in 1..horizon with x_n = target
    final_position: np.ndarray

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trajectory_index", "t0_or_-1", "visits", "final_position"])
        for i, (t, v, x) in enumerate(zip(self.t0, self.visits, self.final_position)):
            w.writerow([i, int(t), int(v), int(x)])
        return buf.getvalue()


@dataclass(frozen=True)
class EstimateReport:
    point_estimate: float
    std_error: float
    n_samples: int
    quantity: Quantity
    horizon: int
    seed: int
    related: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.quantity is Quantity.DRIFT:
            return f"mean of x_H / H at H = {self.horizon}"
        return f"{self.quantity.value} by horizon {self.horizon}"

    def to_dict(self) -> dict:
        out = {"quantity": self.quantity.value, "label": self.label,
               "point_estimate": self.point_estimate, "std_error": self.std_error,
               "n_samples": self.n_samples, "horizon": self.horizon, "seed": self.seed}
        if self.related:
            out["related"] = {k: v.to_dict() for k, v in self.related.items()}
        return out


def _run_chunk(left: np.ndarray, right: np.ndarray, rho: np.ndarray, seed: int, lo: int, hi: int,
               horizon: int, start: int, target: int, absorbing: bool):
    kern = _Kernel(left.shape[0], _program(left), _program(right))
    n = hi - lo
    idx = np.arange(lo, hi)
    seeds = child_seeds(seed, idx)
    flat = rho.reshape(-1)
    xr = [np.full(n, float(z.real)) for z in flat]
    xi = [np.full(n, float(z.imag)) for z in flat]
    pos = np.full(n, start, dtype=np.int64)
    t0 = np.full(n, -1, dtype=np.int64)
    visits = np.zeros(n, dtype=np.int64)
    final = np.full(n, start, dtype=np.int64)
    # rows still being simulated, as indices into the chunk
    active = np.arange(n)
    for step in range(horizon):
        if active.size == 0:
            break
        u = uniforms(seeds, step)
        left_move, xr, xi = _batch_step(kern, xr, xi, u)
        pos = pos + np.where(left_move, -1, 1)
        hit = pos == target
        if hit.any():
            rows = active[hit]
            visits[rows] += 1
            first = t0[rows] < 0
            t0[rows[first]] = step + 1
            if absorbing:
                final[rows] = target
                keep = ~hit
                active, pos, seeds = active[keep], pos[keep], seeds[keep]
                xr = [a[keep] for a in xr]
                xi = [a[keep] for a in xi]
    final[active] = pos
    return t0, visits, final


def simulate(c: Coin, cfg: SimConfig, *, start: int | None = None, target: int = 0,
             absorbing: bool = False) -> Trajectories:
    """Run every trajectory and collect per-trajectory summaries.

    With ``absorbing`` set, a trajectory stops at its first visit to
    ``target``. The split of trajectories across workers never changes the
    result.
    """
    rho = np.asarray(cfg.init.matrix if isinstance(cfg.init, DensityMatrix) else cfg.init,
                     dtype=np.complex128)
    if rho.shape != (c.dim, c.dim):
        raise DimensionMismatch(f"initial density is {rho.shape}, coin has dimension {c.dim}")
    start = cfg.site if start is None else start
    n = cfg.n_trajectories
    workers = min(cfg.workers, n)
    bounds = [(n * k) // workers for k in range(workers + 1)]
    args = [(np.asarray(c.left), np.asarray(c.right), rho, cfg.master_seed, bounds[k], bounds[k + 1],
             cfg.horizon, start, target, absorbing) for k in range(workers)]
    if workers == 1:
        parts = [_run_chunk(*args[0])]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, *a) for a in args]
            parts = [f.result() for f in futures]
    t0, visits, final = (np.concatenate(col) for col in zip(*parts))
    return Trajectories(t0, visits, final)


def _summary(samples: np.ndarray, quantity: Quantity, cfg: SimConfig, **related) -> EstimateReport:
    x = np.asarray(samples, dtype=np.float64)
    mean = math.fsum(x) / x.size
    if x.size > 1:
        var = math.fsum((x - mean) ** 2) / (x.size - 1)
        se = math.sqrt(var / x.size)
    else:
        se = float("nan")
    return EstimateReport(mean, se, int(x.size), quantity, cfg.horizon, cfg.master_seed, related)


def estimate_drift(c: Coin, cfg: SimConfig, trajectories: Trajectories | None = None) -> EstimateReport:
    """Mean of ``(x_H - x_0) / H`` over the trajectories."""
    tr = trajectories if trajectories is not None else simulate(c, cfg)
    return _summary((tr.final_position - cfg.site) / cfg.horizon, Quantity.DRIFT, cfg)


def estimate_return(c: Coin, cfg: SimConfig, trajectories: Trajectories | None = None) -> EstimateReport:
    """Fraction of trajectories back at their start site by the horizon.

    ``related["mean_visits"]`` holds the mean number of visits to the start
    site in steps 1..H.
    """
    tr = trajectories if trajectories is not None else simulate(c, cfg, target=cfg.site)
    visits = _summary(tr.visits, Quantity.MEAN_VISITS, cfg)
    return _summary(tr.t0 >= 0, Quantity.RETURN, cfg, mean_visits=visits)


def estimate_absorption(c: Coin, m: int, cfg: SimConfig,
                        trajectories: Trajectories | None = None) -> EstimateReport:
    """Fraction of walks started at site ``m >= 1`` that reach 0 by the horizon."""
    if m < 1:
        raise InvalidStart("start site must be >= 1")
    tr = trajectories if trajectories is not None else simulate(c, cfg, start=m, absorbing=True)
    return _summary(tr.t0 >= 0, Quantity.ABSORPTION, cfg)


def run_trajectory(c: Coin, rho, seed: int, steps: int, index: int = 0, site: int = 0):
    """Scalar reference path of trajectory ``index``.

    Yields ``(position, re, im)`` after each step, where ``re``/``im`` are the
    row-major flattened parts of the internal state.
    """
    rho = rho if isinstance(rho, DensityMatrix) else density(rho)
    cs = child_seed(seed, index)
    kern = _Kernel.of(c)
    flat = rho.matrix.reshape(-1)
    xr = [float(z.real) for z in flat]
    xi = [float(z.imag) for z in flat]
    pos = site
    for n in range(steps):
        left, xr, xi = _scalar_step(kern, xr, xi, uniform(cs, n))
        pos += -1 if left else 1
        yield pos, xr, xi
