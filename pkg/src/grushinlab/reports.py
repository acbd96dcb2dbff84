"""CSV tables with '# key=value' metadata lines, and their readers."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .constants import ConstantResult, Which
from .grid import read_csv_header
from .identities import IdentityReport
from .pme import PmeTrace, Status


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_table(path, header, rows, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for key, val in (meta or {}).items():
            fh.write(f"# {key}={fmt(val)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_table(path):
    """Return (meta, list of dicts keyed by the header)."""
    meta, rows = read_csv_header(path)
    if not rows:
        return meta, []
    header = rows[0]
    return meta, [dict(zip(header, r)) for r in rows[1:]]


def _bool(text):
    return text == "true"


CONSTANT_HEADER = ["p", "which", "value", "arg_s", "arg_t", "uncertainty", "bound_check",
                   "interval_lo", "interval_hi", "flags"]


def constant_row(r: ConstantResult):
    return [r.p, r.which.value, r.value, float(r.argpoint[0]), float(r.argpoint[1]),
            r.uncertainty, r.bound_check, float(r.interval[0]), float(r.interval[1]),
            ";".join(r.flags)]


def read_constants_csv(path) -> tuple[dict, list[ConstantResult]]:
    meta, rows = read_table(path)
    out = [
        ConstantResult(float(r["p"]), Which(r["which"]), float(r["value"]),
                       (float(r["arg_s"]), float(r["arg_t"])), float(r["uncertainty"]),
                       _bool(r["bound_check"]),
                       (float(r["interval_lo"]), float(r["interval_hi"])),
                       [f for f in r["flags"].split(";") if f])
        for r in rows
    ]
    return meta, out


IDENTITY_HEADER = ["case", "p", "gamma", "resolution", "lhs", "rhs", "abs_residual",
                   "rel_residual", "scale", "scaled_residual", "imag_part", "h",
                   "threshold", "passed"]


def identity_row(r: IdentityReport, h=math.nan, threshold=math.nan, passed=True):
    return [r.case, r.p, r.gamma, "x".join(map(str, r.resolution)), r.lhs, r.rhs,
            r.abs_residual, r.rel_residual, r.scale, r.scaled_residual, r.imag_part,
            float(h), float(threshold), passed]


def read_identity_csv(path) -> tuple[dict, list[tuple[IdentityReport, dict]]]:
    meta, rows = read_table(path)
    out = []
    for r in rows:
        rep = IdentityReport(
            float(r["lhs"]), float(r["rhs"]), float(r["abs_residual"]), float(r["rel_residual"]),
            float(r["scale"]), float(r["scaled_residual"]), float(r["p"]), float(r["gamma"]),
            tuple(int(v) for v in r["resolution"].split("x")), float(r["imag_part"]), r["case"],
        )
        out.append((rep, {"h": float(r["h"]), "threshold": float(r["threshold"]),
                          "passed": _bool(r["passed"])}))
    return meta, out


TRACE_HEADER = ["t", "mass", "J", "E", "sup_u"]


def read_trace_csv(path) -> tuple[dict, PmeTrace]:
    meta, rows = read_table(path)
    trace = PmeTrace()
    for r in rows:
        trace.times.append(float(r["t"]))
        trace.mass.append(float(r["mass"]))
        trace.J.append(float(r["J"]))
        trace.E.append(float(r["E"]))
        trace.sup_u.append(float(r["sup_u"]))
    trace.status = Status(meta.get("status", Status.INCONCLUSIVE.value))
    t_detect = meta.get("t_detect", "none")
    trace.t_detect = None if t_detect == "none" else float(t_detect)
    trace.steps = int(meta.get("steps", len(rows)))
    trace.rejections = int(meta.get("rejections", 0))
    trace.max_clamp = float(meta.get("max_clamp", 0.0))
    return meta, trace


def trace_meta(trace: PmeTrace) -> dict:
    return {
        "status": trace.status.value,
        "t_detect": "none" if trace.t_detect is None else float(trace.t_detect),
        "steps": trace.steps,
        "rejections": trace.rejections,
        "max_clamp": float(trace.max_clamp),
    }
