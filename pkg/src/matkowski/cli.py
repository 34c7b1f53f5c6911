"""Command-line front end.

Usage::

    matkowski --command demo
    matkowski --command verify --input params.json --tol 1e-10
    matkowski --command invariance --input triple.json --format csv --output grid.csv
    matkowski --command classify --input params.json

Inputs are JSON.  ``build``/``verify``/``reduce``/``classify`` read family
parameters (``{"tag": ..., "constants": {...}, "interval": [lo, hi]}``); a
document holding only ``"tag"`` draws random valid parameters using
``--seed``.  ``invariance`` reads a generator triple
``{"m": [f, g], "n": [f, g], "k": [f, g], "interval": [lo, hi]}`` of catalog
names; without ``--input`` the geometric/arithmetic/harmonic triple is used.

Exit codes: 0 all residuals under ``--tol``; 1 a residual is over tolerance
(or the numerics failed); 2 unreadable or malformed input/output; 3 the
parameters violate a family constraint or admit no safe domain.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import catalog
from .classify import classify_tuple
from .errors import (
    ConstraintViolated,
    DomainMismatch,
    IoError,
    MatkowskiError,
    NotMonotone,
    ParseError,
    Unclassifiable,
    UnknownTag,
    UnsafeDomain,
)
from .families import FamilyParams, build_family, random_params
from .fncore import Grid, Interval
from .means import (
    GeneratorPair,
    ResidualReport,
    compose_generators,
    eq1_residual,
    invariance_residual,
)
from .reduction import derive_system, round_trip_error, system_residual

COMMANDS = ("build", "verify", "invariance", "reduce", "classify", "demo")
FORMATS = ("json", "csv")

#: Geometric mean against the arithmetic and harmonic means on ]0.5, 4[.
DEFAULT_TRIPLE = {"m": ["ln", "ln"], "n": ["id", "id"], "k": ["neg_reciprocal", "neg_reciprocal"],
                  "interval": [0.5, 4.0]}

EXIT_OK, EXIT_RESIDUAL, EXIT_PARSE, EXIT_CONSTRAINT = 0, 1, 2, 3


@dataclass(frozen=True)
class CommandConfig:
    command: str
    input_path: str | None = None
    grid_n: int = 50
    tol: float = 1e-8
    output_path: str | None = None
    format: str = "json"
    seed: int = 42

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ParseError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        if self.format not in FORMATS:
            raise ParseError(f"unknown format {self.format!r}")
        if int(self.grid_n) < 8:
            raise ParseError("grid_n must be at least 8")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ParseError("tol must be a positive finite number")


@dataclass
class CommandResult:
    """Exit status, JSON-ready document and the residual grid used for CSV."""

    status: int
    document: dict
    primary: ResidualReport | None = None


# ---------------------------------------------------------------------------
# input handling
# ---------------------------------------------------------------------------

def _read_json(path: str | None) -> Any:
    if path is None:
        return None
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from None


def _family_params(cfg: CommandConfig) -> FamilyParams:
    doc = _read_json(cfg.input_path)
    if doc is None:
        raise ParseError(f"command {cfg.command!r} needs --input with family parameters")
    if isinstance(doc, dict) and set(doc) == {"tag"}:
        return random_params(str(doc["tag"]), np.random.default_rng(cfg.seed))
    return FamilyParams.from_dict(doc)


def _pair(names, domain: Interval) -> GeneratorPair:
    if not (isinstance(names, (list, tuple)) and len(names) == 2):
        raise ParseError("a generator pair is a list of two catalog names")
    return GeneratorPair(catalog.get(str(names[0]), domain), catalog.get(str(names[1]), domain),
                         domain)


def _triple(doc: dict | None) -> tuple[GeneratorPair, GeneratorPair, GeneratorPair, Interval]:
    doc = DEFAULT_TRIPLE if doc is None else doc
    if not isinstance(doc, dict) or not {"m", "n", "k", "interval"} <= set(doc):
        raise ParseError("generator triple needs keys m, n, k and interval")
    try:
        lo, hi = (float(v) for v in doc["interval"])
        J = Interval(lo, hi)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad interval {doc['interval']!r}: {exc}") from None
    return _pair(doc["m"], J), _pair(doc["n"], J), _pair(doc["k"], J), J


def _all_pass(reports, tol: float) -> bool:
    return all(r.passed(tol) for r in reports)


def _status(reports, tol: float) -> int:
    return EXIT_OK if _all_pass(reports, tol) else EXIT_RESIDUAL


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _build(cfg: CommandConfig):
    p = _family_params(cfg)
    # the self-check is reported against cfg.tol rather than enforced here
    t = build_family(p, tol=math.inf, check_grid_n=cfg.grid_n)
    return p, t


def _cmd_build(cfg: CommandConfig) -> CommandResult:
    p, t = _build(cfg)
    rep: ResidualReport = t.meta["self_check"]
    meta = {k: v for k, v in t.meta.items() if k not in ("self_check", "constants")}
    doc = {"tag": p.tag, "constants": dict(t.meta["constants"]), "interval": t.I.to_list(),
           "sum_domain": t.sum_domain.to_list(), "free_fn": list(p.free_fn), "meta": meta,
           "self_check": rep.to_dict()}
    return CommandResult(_status([rep], cfg.tol), doc, rep)


def _cmd_verify(cfg: CommandConfig) -> CommandResult:
    _, t = _build(cfg)
    rep = eq1_residual(t, Grid.chebyshev(t.I, cfg.grid_n))
    return CommandResult(_status([rep], cfg.tol), rep.to_dict(), rep)


def _cmd_invariance(cfg: CommandConfig) -> CommandResult:
    m, n, k, J = _triple(_read_json(cfg.input_path))
    rep = invariance_residual(m, n, k, Grid.chebyshev(J, cfg.grid_n))
    return CommandResult(_status([rep], cfg.tol), rep.to_dict(), rep)


def _cmd_reduce(cfg: CommandConfig) -> CommandResult:
    _, t = _build(cfg)
    s = derive_system(t)
    plus, minus = system_residual(s, Grid.chebyshev(t.I, cfg.grid_n))
    rt = round_trip_error(t)
    doc = {"plus": plus.to_dict(), "minus": minus.to_dict(), "round_trip": rt}
    return CommandResult(_status([plus, minus], cfg.tol), doc, plus)


def _cmd_classify(cfg: CommandConfig) -> CommandResult:
    _, t = _build(cfg)
    try:
        report = classify_tuple(t, n_check=cfg.grid_n)
    except Unclassifiable as exc:
        partial = getattr(exc, "report", None)
        doc = partial.to_dict() if partial is not None else {
            "branch": None, "family_guess": None, "fits": [], "residuals": []}
        doc["error"] = str(exc)
        return CommandResult(EXIT_RESIDUAL, doc)
    primary = report.residuals[0] if report.residuals else None
    return CommandResult(_status(report.residuals, cfg.tol), report.to_dict(), primary)


def _cmd_demo(cfg: CommandConfig) -> CommandResult:
    m, n, k, J = _triple(None)
    inv = invariance_residual(m, n, k, Grid.chebyshev(J, cfg.grid_n))
    t = compose_generators(m, n, k)
    grid = Grid.chebyshev(t.I, cfg.grid_n)
    eq1 = eq1_residual(t, grid)
    plus, minus = system_residual(derive_system(t), grid)
    doc = {"fixture": DEFAULT_TRIPLE, "invariance": inv.to_dict(), "main": eq1.to_dict(),
           "plus": plus.to_dict(), "minus": minus.to_dict(),
           "interval": t.I.to_list(), "sum_domain": t.sum_domain.to_list()}
    return CommandResult(_status([inv, eq1, plus, minus], cfg.tol), doc, inv)


_DISPATCH = {"build": _cmd_build, "verify": _cmd_verify, "invariance": _cmd_invariance,
             "reduce": _cmd_reduce, "classify": _cmd_classify, "demo": _cmd_demo}


def run_command(cfg: CommandConfig) -> CommandResult:
    """Run one command; exceptions propagate (see :func:`exit_code_for`)."""
    return _DISPATCH[cfg.command](cfg)


def exit_code_for(exc: BaseException) -> int:
    """Exit status for an exception raised while running a command."""
    if isinstance(exc, (ParseError, IoError, UnknownTag)):
        return EXIT_PARSE
    if isinstance(exc, (ConstraintViolated, UnsafeDomain, DomainMismatch, NotMonotone)):
        return EXIT_CONSTRAINT
    return EXIT_RESIDUAL


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _plain(obj):
    """JSON-ready copy: dataclass reports to dicts, non-finite floats to null."""
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def _residual_rows(report: ResidualReport):
    if report.samples is None:
        raise ParseError("this report carries no residual grid for CSV output")
    X, Y, R = (np.asarray(a, dtype=float).ravel() for a in report.samples)
    return zip(X, Y, R)


def render(report, fmt: str = "json") -> str:
    """Text of ``report`` in ``fmt`` (deterministic key and row order)."""
    if fmt == "json":
        doc = report.document if isinstance(report, CommandResult) else report
        return json.dumps(_plain(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if fmt == "csv":
        rep = report.primary if isinstance(report, CommandResult) else report
        if not isinstance(rep, ResidualReport):
            raise ParseError("CSV output needs a residual report")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "residual"])
        for x, y, r in _residual_rows(rep):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(r))])
        return buf.getvalue()
    raise ParseError(f"unknown format {fmt!r}")


def emit_report(report, format: str = "json", path: str | None = None) -> None:
    """Write ``report`` as JSON or CSV to ``path`` (stdout when ``None``)."""
    text = render(report, format)
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="matkowski",
        description="Build, verify and classify solutions of F((x+y)/2)+f1(x)+f2(y)=G(g1(x)+g2(y)) "
                    "and check invariance of Matkowski means.")
    ap.add_argument("--command", required=True, choices=COMMANDS)
    ap.add_argument("--input", dest="input_path", default=None,
                    help="JSON family parameters or generator triple")
    ap.add_argument("--grid-n", type=int, default=50, help="points per grid axis (>= 8)")
    ap.add_argument("--tol", type=float, default=1e-8, help="residual tolerance for exit status")
    ap.add_argument("--output", dest="output_path", default=None, help="report file (default stdout)")
    ap.add_argument("--format", choices=FORMATS, default="json")
    ap.add_argument("--seed", type=int, default=42, help="seed for random parameter draws")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = CommandConfig(**vars(args))
        result = run_command(cfg)
        emit_report(result, cfg.format, cfg.output_path)
    except MatkowskiError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return result.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
