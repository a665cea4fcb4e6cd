"""Regression suite over the shipped example coins.

Each check loads one fixture, classifies it and compares the verdict and the
key numbers against known values. Checks are independent and may run
concurrently; results keep the suite order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .auxmap import invariant_states
from .classify import AbsorptionKind, Verdict, classify, classify_absorption
from .coin import Coin, parse_coin
from .errors import NotTracePreserving, OQWError, ParseError
from .linalg import DEFAULT_TOL, max_abs

SUITES = ("examples",)

PASS, MISMATCH, INVALID, ERROR = "pass", "mismatch", "invalid-coin", "input-error"


def fixture_text(name: str, fixtures_dir: str | Path | None = None) -> bytes:
    """Raw bytes of ``<name>.json`` from ``fixtures_dir`` or the packaged fixtures."""
    if fixtures_dir is not None:
        return (Path(fixtures_dir) / f"{name}.json").read_bytes()
    return (resources.files("oqwalk") / "fixtures" / f"{name}.json").read_bytes()


def load_fixture(name: str, fixtures_dir: str | Path | None = None, **variables: float) -> Coin:
    return parse_coin(fixture_text(name, fixtures_dir), variables=variables or None, name=name)


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str

    @property
    def ok(self) -> bool:
        return self.status == PASS


class _Mismatch(Exception):
    pass


def _expect(cond: bool, what: str) -> None:
    if not cond:
        raise _Mismatch(what)


def _close(value, target, tol: float, what: str) -> None:
    err = max_abs(np.asarray(value) - np.asarray(target))
    _expect(err <= tol, f"{what}: deviation {err:.3e} > {tol:.0e}")


def _pure(k: int, d: int = 2) -> np.ndarray:
    m = np.zeros((d, d))
    m[k, k] = 1.0
    return m


@dataclass(frozen=True)
class Check:
    name: str
    fixture: str
    run: Callable[[Coin, float], str]
    variables: tuple = ()


def _recurrence(expected: Verdict, rho_inf=None, rho_tol=1e-8, trace=None, trace_tol=1e-10,
                exceptional=None, unique_nonfaithful=False):
    def run(c: Coin, tol_half: float) -> str:
        r = classify(c, tol_half)
        _expect(r.verdict is expected, f"verdict {r.verdict.value}, expected {expected.value}")
        parts = [r.verdict.value]
        if rho_inf is not None:
            _expect(r.invariant_state is not None, "no invariant state reported")
            _close(r.invariant_state.matrix, rho_inf, rho_tol, "invariant state")
        if trace is not None:
            _close(r.trace_values[0], trace, trace_tol, "Tr(L*L rho_inf)")
            parts.append(f"Tr={r.trace_values[0]:.12g}")
        if exceptional is not None:
            _expect(r.exceptional is not None, "no exceptional density reported")
            _close(r.exceptional.matrix, exceptional, 1e-10, "exceptional density")
        if unique_nonfaithful:
            rep = invariant_states(c)
            _expect(rep.unique and not rep.faithful, "invariant state should be unique and not faithful")
        return " ".join(parts)
    return run


def _absorption(expected: AbsorptionKind, absorbing_density=None):
    def run(c: Coin, tol_half: float) -> str:
        r = classify_absorption(c, tol_half)
        _expect(r.verdict is expected, f"verdict {r.verdict.value}, expected {expected.value}")
        if absorbing_density is not None:
            _expect(r.absorbing_density is not None, "no absorbing density reported")
            _close(r.absorbing_density.matrix, absorbing_density, 1e-10, "absorbing density")
            p = r.probability(absorbing_density, 1)
            _expect(p == 1.0, f"absorption probability {p!r} for the absorbing density, expected 1")
        return r.verdict.value
    return run


UNBALANCED_RHO = np.array([[15, 6 + math.sqrt(6)], [6 + math.sqrt(6), 5]]) / 20
HALF_I = np.eye(2) / 2


def example_checks() -> list[Check]:
    checks = [
        Check("pq_diagonal recurrence", "pq_diagonal", _recurrence(Verdict.TRANSIENT)),
        Check("pq_nonunital recurrence", "pq_nonunital",
              _recurrence(Verdict.TRANSIENT, np.diag([1.0, 2.0]) / 3, 1e-10, 5 / 9, 1e-10)),
        Check("pq_nonunital absorption", "pq_nonunital", _absorption(AbsorptionKind.ABSORBING)),
        Check("diagonal_fair_line recurrence", "diagonal_fair_line",
              _recurrence(Verdict.MIXED_TRANSIENT_ONLY, exceptional=_pure(0))),
        Check("diagonal_fair_line absorption", "diagonal_fair_line",
              _absorption(AbsorptionKind.ABSORBING_ONLY_FOR, _pure(1))),
    ]
    for name in ("unitary_sum_balanced", "unitary_sum_real", "unitary_sum_complex"):
        checks.append(Check(f"{name} recurrence", name, _recurrence(Verdict.RECURRENT, HALF_I)))
    checks += [
        Check("unbalanced recurrence", "unbalanced",
              _recurrence(Verdict.TRANSIENT, UNBALANCED_RHO, 1e-8, 29 / 40 + math.sqrt(6) / 10, 1e-10)),
        Check("unbalanced absorption", "unbalanced", _absorption(AbsorptionKind.ABSORBING)),
        Check("shear recurrence", "shear", _recurrence(Verdict.RECURRENT, HALF_I)),
        Check("shear absorption", "shear", _absorption(AbsorptionKind.ABSORBING)),
    ]
    for x in (0.1, 0.3, 0.45):
        checks.append(Check(f"one_eigvec_family x={x} recurrence", "one_eigvec_family",
                            _recurrence(Verdict.RECURRENT, _pure(0), unique_nonfaithful=True),
                            variables=(("x", x),)))
    checks += [
        Check("qutrit recurrence", "qutrit", _recurrence(Verdict.TRANSIENT, trace=0.717825, trace_tol=1e-5)),
        Check("qutrit absorption", "qutrit", _absorption(AbsorptionKind.ABSORBING)),
    ]
    return checks


def run_check(check: Check, tol_half: float = DEFAULT_TOL.half,
              fixtures_dir: str | Path | None = None,
              coin_tol: float = DEFAULT_TOL.coin) -> CheckResult:
    try:
        text = fixture_text(check.fixture, fixtures_dir)
        c = parse_coin(text, coin_tol, variables=dict(check.variables) or None, name=check.fixture)
    except NotTracePreserving as exc:
        return CheckResult(check.name, INVALID, str(exc))
    except (OSError, ParseError) as exc:
        return CheckResult(check.name, ERROR, str(exc))
    try:
        return CheckResult(check.name, PASS, check.run(c, tol_half))
    except _Mismatch as exc:
        return CheckResult(check.name, MISMATCH, str(exc))
    except OQWError as exc:
        return CheckResult(check.name, MISMATCH, f"{type(exc).__name__}: {exc}")


def run_suite(suite: str = "examples", tol_half: float = DEFAULT_TOL.half,
              fixtures_dir: str | Path | None = None, coin_tol: float = DEFAULT_TOL.coin,
              workers: int = 4) -> list[CheckResult]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; available: {', '.join(SUITES)}")
    checks = example_checks()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ch: run_check(ch, tol_half, fixtures_dir, coin_tol), checks))


def suite_exit_code(results: list[CheckResult]) -> int:
    """0 all pass, 1 unreadable fixture, 2 invalid coin, 4 verdict or value mismatch."""
    statuses = {r.status for r in results}
    if ERROR in statuses:
        return 1
    if INVALID in statuses:
        return 2
    if MISMATCH in statuses:
        return 4
    return 0
