"""File formats: problem definitions in, records and sweeps out.

JSON floats are written with Python's shortest round-trip repr, which
reproduces every double exactly; NaN and infinities become ``null``. CSV
fields use ``%.17g``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .bvp import SolutionRecord, SweepReport
from .models import ModelError, ProblemInstance

FORMATS = ("csv", "json", "svg")
BRANCH_COLUMNS = ("lambda", "a", "residual", "positive", "r1", "r2", "E_min")


class ProblemFileError(ValueError):
    """Unreadable or invalid problem definition, with the location when known."""


def load_problem(path) -> ProblemInstance:
    """Read a problem JSON file.

    Raises:
        ProblemFileError: on I/O failure, malformed JSON (reports line and
            column) or an invalid model definition.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ProblemFileError(f"{path}: top level must be an object")
    try:
        return ProblemInstance.from_dict(data)
    except (ModelError, TypeError, ValueError) as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc


def _clean(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def dumps(obj) -> str:
    """Deterministic JSON with non-finite floats mapped to ``null``."""
    return json.dumps(_clean(obj), indent=1, allow_nan=False) + "\n"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    x = float(x)
    return f"{x:.17g}" if math.isfinite(x) else ""


def records_to_dict(instance: ProblemInstance, records: list[SolutionRecord], extra: dict | None = None) -> dict:
    d = {"kind": "solutions", "problem": instance.to_dict(), "records": [r.to_dict() for r in records]}
    if extra:
        d.update(extra)
    return d


def sweep_to_dict(instance: ProblemInstance, report: SweepReport) -> dict:
    return {
        "kind": "sweep",
        "problem": instance.to_dict(),
        "lambda_grid": list(report.lambda_grid),
        "lambda0_estimate": report.lambda0_estimate,
        "lambda0_bracket": list(report.lambda0_bracket) if report.lambda0_bracket else None,
        "lambda1_evidence": report.lambda1_evidence,
        "lambda2_evidence": report.lambda2_evidence,
        "scan": dict(report.scan),
        "records": [[r.to_dict() for r in recs] for recs in report.records],
    }


def _restore_nan(d):
    """Inverse of ``_clean`` for the float-valued record fields."""
    for key in ("E_min",):
        if d.get(key) is None:
            d[key] = math.nan
    diag = d.get("diagnostics")
    if diag:
        for key in ("M", "energy_upper"):
            if diag.get(key) is None:
                diag[key] = math.nan
    return d


def load_records(path) -> tuple[ProblemInstance, list[SolutionRecord]]:
    """Read the records of a ``solve`` or ``sweep`` JSON output, flattened.

    Raises:
        ProblemFileError: on missing or malformed files.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        base = ProblemInstance.from_dict(data["problem"])
        raw = data["records"]
        if data.get("kind") == "sweep":
            raw = [r for recs in raw for r in recs]
        records = []
        for r in raw:
            r = _restore_nan(r)
            records.append(SolutionRecord.from_dict(r, base.with_lambda(float(r["lambda"]))))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFileError(f"{path}: not a solve/sweep output ({exc})") from exc
    return base, records


def branch_csv(report: SweepReport) -> str:
    """One row per record: ``lambda,a,residual,positive,r1,r2,E_min``."""
    lines = [",".join(BRANCH_COLUMNS)]
    for recs in report.records:
        for rec in recs:
            d = rec.diagnostics
            row = (rec.lam, rec.a, rec.residual, rec.positive,
                   d.r1 if d else None, d.r2 if d else None, rec.E_min)
            lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_formats(text: str) -> tuple[str, ...]:
    items = tuple(s.strip().lower() for s in text.split(",") if s.strip())
    bad = [s for s in items if s not in FORMATS]
    if bad or not items:
        raise ValueError(f"unknown format(s) {bad or text!r}; choose from {','.join(FORMATS)}")
    return items
