"""Command-line workbench: ``oqwalk <command> ...``.

Exit codes: 0 success, 1 input error, 2 invalid coin, 3 inconclusive
verdict, 4 reproduction mismatch.

Every JSON output carries a ``manifest`` object; every CSV output starts with
a ``# manifest: {...}`` comment line.

Coins are given as a file path or as ``builtin:<name>`` for a shipped
fixture. Densities (``--rho``) are a file path or one of ``mixed``,
``invariant`` or ``e<k>`` (the pure state of the k-th basis vector).

Environment: ``OQW_TOL_HALF`` and ``OQW_COIN_TOL`` override the default
criticality and coin-validation tolerances.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import dynamics, montecarlo, reproduce
from .auxmap import invariant_states
from .classify import (AbsorptionKind, AbsorptionVerdict, Classification, Verdict,
                       classify, classify_absorption)
from .coin import (Coin, DensityMatrix, coin_residual, matrix_to_json, maximally_mixed,
                   parse_coin, parse_density, parse_family, pure_density)
from .errors import NotTracePreserving, OQWError, ParseError
from .linalg import DEFAULT_TOL

EXIT_OK, EXIT_INPUT, EXIT_INVALID_COIN, EXIT_INCONCLUSIVE, EXIT_MISMATCH = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover - source checkout
        return "0+unknown"


@dataclass
class RunManifest:
    command: str
    coin_path: str
    parameters: dict
    tool_version: str = field(default_factory=tool_version)
    seed: int | None = None
    timestamp: str = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))

    def to_dict(self) -> dict:
        return {"command": self.command, "coin_path": self.coin_path, "parameters": self.parameters,
                "tool_version": self.tool_version, "seed": self.seed, "timestamp": self.timestamp}

    def comment(self) -> str:
        return "manifest: " + json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# input helpers
# ---------------------------------------------------------------------------

def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        value = float(raw)
    except ValueError:
        raise InputError(f"{name}={raw!r} is not a number") from None
    if not value >= 0:
        raise InputError(f"{name} must be non-negative")
    return value


def _read_bytes(path: str) -> bytes:
    if path.startswith("builtin:"):
        try:
            return reproduce.fixture_text(path.split(":", 1)[1])
        except FileNotFoundError:
            raise InputError(f"no builtin fixture {path!r}") from None
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _parse_params(items) -> dict[str, float]:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--param expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise InputError(f"--param {item!r}: value is not a number") from None
    return out


def _load_coin(args) -> Coin:
    variables = _parse_params(getattr(args, "param", None))
    return parse_coin(_read_bytes(args.coin), args.coin_tol, variables=variables or None,
                      name=Path(args.coin).stem)


def _load_density(choice: str | None, c: Coin) -> DensityMatrix:
    if choice is None or choice == "mixed":
        return maximally_mixed(c.dim)
    if choice == "invariant":
        return invariant_states(c).state
    if choice.startswith("e") and choice[1:].isdigit():
        k = int(choice[1:])
        if not 1 <= k <= c.dim:
            raise InputError(f"--rho {choice}: basis index out of range 1..{c.dim}")
        v = np.zeros(c.dim)
        v[k - 1] = 1.0
        return pure_density(v)
    return parse_density(_read_bytes(choice), c.dim)


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _density_json(rho: DensityMatrix | None):
    return None if rho is None else matrix_to_json(rho.matrix)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    manifest = RunManifest("validate", args.coin, {"coin_tol": args.coin_tol})
    try:
        c = _load_coin(args)
    except NotTracePreserving as exc:
        _write(_dump({"manifest": manifest.to_dict(), "valid": False, "residual": exc.residual,
                      "tolerance": args.coin_tol}), None)
        return EXIT_INVALID_COIN
    _write(_dump({"manifest": manifest.to_dict(), "valid": True, "dim": c.dim,
                  "residual": coin_residual(c.left, c.right), "tolerance": args.coin_tol}), None)
    return EXIT_OK


def classification_to_dict(r: Classification) -> dict:
    return {"verdict": r.verdict.value, "basis_theorem": r.basis.tag, "basis_detail": r.basis.value,
            "trace_values": list(r.trace_values), "drift": r.drift, "near_critical": r.near_critical,
            "invariant_state": _density_json(r.invariant_state),
            "exceptional_density": _density_json(r.exceptional),
            "common_eigenvectors": None if r.common is None else r.common.count,
            "note": r.note}


def absorption_to_dict(r: AbsorptionVerdict) -> dict:
    return {"verdict": r.verdict.value, "basis_theorem": r.basis.tag, "basis_detail": r.basis.value,
            "trace_values": list(r.trace_values), "near_critical": r.near_critical,
            "invariant_state": _density_json(r.invariant_state),
            "absorbing_density": _density_json(r.absorbing_density), "note": r.note}


def cmd_classify(args) -> int:
    c = _load_coin(args)
    params = {"mode": args.mode, "tol_half": args.tol_half, "coin_tol": args.coin_tol,
              "param": _parse_params(args.param)}
    manifest = RunManifest("classify", args.coin, params)
    if args.mode == "recurrence":
        r = classify(c, args.tol_half)
        body, inconclusive = classification_to_dict(r), r.verdict is Verdict.INCONCLUSIVE
    else:
        a = classify_absorption(c, args.tol_half)
        body, inconclusive = absorption_to_dict(a), a.verdict is AbsorptionKind.INCONCLUSIVE
    _write(_dump({"manifest": manifest.to_dict(), **body}), args.out)
    return EXIT_INCONCLUSIVE if inconclusive else EXIT_OK


def cmd_series(args) -> int:
    c = _load_coin(args)
    rho = _load_density(args.rho, c)
    params = {"mode": args.mode, "nmax": args.nmax, "rho": args.rho or "mixed"}
    if args.mode == "absorb":
        params["start"] = args.start
        res = dynamics.absorption_series(c, rho, args.start, args.nmax)
    elif args.mode == "first-return":
        res = dynamics.first_return_series(c, rho, args.nmax)
    else:
        res = dynamics.return_series(c, rho, args.nmax)
    manifest = RunManifest("series", args.coin, params)
    _write(res.to_csv(manifest.comment()), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    c = _load_coin(args)
    rho = _load_density(args.rho, c)
    site = args.start if args.quantity == "absorb" else 0
    cfg = montecarlo.SimConfig(args.seed, args.trajectories, args.horizon, rho, site=site,
                               workers=args.workers)
    params = {"quantity": args.quantity, "trajectories": args.trajectories, "horizon": args.horizon,
              "rho": args.rho or "mixed", "start": site}
    manifest = RunManifest("simulate", args.coin, params, seed=args.seed)
    if args.quantity == "drift":
        tr = montecarlo.simulate(c, cfg)
        report = montecarlo.estimate_drift(c, cfg, tr)
    elif args.quantity == "return":
        tr = montecarlo.simulate(c, cfg, target=0)
        report = montecarlo.estimate_return(c, cfg, tr)
    else:
        tr = montecarlo.simulate(c, cfg, start=site, absorbing=True)
        report = montecarlo.estimate_absorption(c, site, cfg, tr)
    doc = {"manifest": manifest.to_dict(), "estimate": report.to_dict(),
           "config": {"master_seed": cfg.master_seed, "n_trajectories": cfg.n_trajectories,
                      "horizon": cfg.horizon, "site": cfg.site, "workers": cfg.workers,
                      "init": matrix_to_json(rho.matrix)}}
    _write(_dump(doc), args.out)
    if args.csv:
        Path(args.csv).write_text(tr.to_csv(manifest.comment()))
    return EXIT_OK


def cmd_reproduce(args) -> int:
    params = {"suite": args.suite, "tol_half": args.tol_half, "fixtures_dir": args.fixtures_dir}
    manifest = RunManifest("reproduce", args.fixtures_dir or "builtin", params)
    results = reproduce.run_suite(args.suite, args.tol_half, args.fixtures_dir, args.coin_tol)
    width = max(len(r.name) for r in results)
    lines = [f"# {manifest.comment()}"]
    for r in results:
        lines.append(f"{r.status.upper():<12} {r.name:<{width}}  {r.detail}")
    bad = [r for r in results if not r.ok]
    lines.append(f"{len(results) - len(bad)}/{len(results)} checks passed")
    if bad:
        lines.append("failures: " + ", ".join(f"{r.name} ({r.status})" for r in bad))
    _write("\n".join(lines) + "\n", None)
    if args.json:
        Path(args.json).write_text(_dump({"manifest": manifest.to_dict(),
                                          "results": [r.__dict__ for r in results]}))
    return reproduce.suite_exit_code(results)


def parse_range(text: str) -> list[float]:
    """``a:b:step`` inclusive of b (up to round-off)."""
    try:
        a, b, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise InputError(f"--range expects a:b:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise InputError("--range needs step > 0 and a <= b")
    n = int(math.floor((b - a) / step + 1e-9))
    return [round(a + k * step, 12) for k in range(n + 1)]


def _sweep_row(family, pname: str, value: float, tol_half: float, coin_tol: float) -> dict:
    row = {"param": value, "verdict": "", "trace_values": "", "drift": "",
           "domain": family.boundary_status(pname, value), "error": ""}
    try:
        c = family.instantiate(coin_tol, **{pname: value})
    except NotTracePreserving as exc:
        row.update(verdict="InvalidCoin", error=f"residual {exc.residual:.3e}")
        return row
    except (ParseError, ValueError) as exc:
        row.update(verdict="InvalidCoin", error=str(exc))
        return row
    r = classify(c, tol_half)
    row.update(verdict=r.verdict.value,
               trace_values=";".join(f"{t:.17g}" for t in r.trace_values),
               drift="" if r.drift is None else f"{r.drift:.17g}")
    return row


def cmd_sweep(args) -> int:
    family = parse_family(_read_bytes(args.coin))
    if args.param not in family.params:
        raise InputError(f"parameter {args.param!r} not declared in the family file")
    values = parse_range(args.range)
    params = {"param": args.param, "range": args.range, "tol_half": args.tol_half}
    manifest = RunManifest("sweep", args.coin, params)
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(lambda v: _sweep_row(family, args.param, v, args.tol_half, args.coin_tol),
                             values))
    buf = io.StringIO()
    buf.write(f"# {manifest.comment()}\n")
    w = csv.DictWriter(buf, fieldnames=["param", "verdict", "trace_values", "drift", "domain", "error"],
                       lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({**row, "param": repr(row["param"])})
    _write(buf.getvalue(), args.out)
    return EXIT_INPUT if any(r["verdict"] == "InvalidCoin" for r in rows) else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser(tol_half: float, coin_tol: float) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oqwalk", description="Open quantum walk workbench")
    p.add_argument("--version", action="version", version=tool_version())
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_, coin=True):
        sp = sub.add_parser(name, help=help_)
        if coin:
            sp.add_argument("coin", help="coin file or builtin:<name>")
            sp.add_argument("--param", action="append", metavar="NAME=VALUE",
                            help="value for a family parameter (repeatable)")
        sp.add_argument("--coin-tol", type=float, default=coin_tol)
        return sp

    add("validate", "check L*L + R*R = I")

    sp = add("classify", "recurrence or absorption verdict")
    sp.add_argument("--mode", choices=("recurrence", "absorption"), default="recurrence")
    sp.add_argument("--tol-half", type=float, default=tol_half)
    sp.add_argument("--out")

    sp = add("series", "exact return / first-return / absorption series as CSV")
    sp.add_argument("--rho")
    sp.add_argument("--nmax", type=int, default=1000)
    sp.add_argument("--mode", choices=("return", "first-return", "absorb"), default="return")
    sp.add_argument("--start", type=int, default=1, help="start site for --mode absorb")
    sp.add_argument("--out")

    sp = add("simulate", "Monte Carlo quantum trajectories")
    sp.add_argument("--trajectories", type=_positive_int, default=1000)
    sp.add_argument("--horizon", type=_positive_int, default=1000)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--quantity", choices=("drift", "return", "absorb"), default="drift")
    sp.add_argument("--start", type=int, default=1, help="start site for --quantity absorb")
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.add_argument("--rho")
    sp.add_argument("--csv", help="write per-trajectory summaries here")
    sp.add_argument("--out")

    sp = add("reproduce", "run the example regression suite", coin=False)
    sp.add_argument("--suite", choices=reproduce.SUITES, default="examples")
    sp.add_argument("--tol-half", type=float, default=tol_half)
    sp.add_argument("--fixtures-dir", help="read fixture files from this directory instead")
    sp.add_argument("--json", help="also write the results as JSON")

    sp = add("sweep", "classify a parameterised coin family over a range", coin=False)
    sp.add_argument("coin", metavar="family", help="family file or builtin:<name>")
    sp.add_argument("--param", required=True, help="name of the parameter to sweep")
    sp.add_argument("--range", required=True, metavar="A:B:STEP")
    sp.add_argument("--tol-half", type=float, default=tol_half)
    sp.add_argument("--workers", type=_positive_int, default=4)
    sp.add_argument("--out")
    return p


COMMANDS = {"validate": cmd_validate, "classify": cmd_classify, "series": cmd_series,
            "simulate": cmd_simulate, "reproduce": cmd_reproduce, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    try:
        tol_half = _env_float("OQW_TOL_HALF", DEFAULT_TOL.half)
        coin_tol = _env_float("OQW_COIN_TOL", DEFAULT_TOL.coin)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    parser = build_parser(tol_half, coin_tol)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except NotTracePreserving as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_COIN
    except (InputError, ParseError, OQWError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
