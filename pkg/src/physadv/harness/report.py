"""JSON, CSV and text renderings of scenario reports.

Wall-clock fields differ between runs, so the main JSON report leaves them
out and they go to a separate timing file. Everything else in a report is a
deterministic function of the config and seeds.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from ..errors import MalformedFile
from .runner import TIMING_KEYS


def _strip(d: dict) -> dict:
    out = {k: v for k, v in d.items() if k not in TIMING_KEYS}
    if "perSeed" in out:
        out["perSeed"] = [_strip(r) for r in out["perSeed"]]
    return out


def timing_of(report: dict) -> dict:
    return {
        **{k: report[k] for k in TIMING_KEYS},
        "perSeed": [{"seed": r["seed"], **{k: r[k] for k in TIMING_KEYS}} for r in report["perSeed"]],
    }


def to_json(report: dict, timing: bool = False) -> str:
    body = report if timing else _strip(report)
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def write_report(report: dict, path, timing_inline: bool = False) -> list[Path]:
    """Report JSON at ``path`` plus ``.timing.json`` and ``.csv`` siblings."""
    path = Path(path)
    written = [path]
    path.write_text(to_json(report, timing=timing_inline))
    tpath = path.with_suffix(".timing.json")
    tpath.write_text(json.dumps(timing_of(report), indent=2, sort_keys=True) + "\n")
    cpath = path.with_suffix(".csv")
    cpath.write_text(rows_to_csv(
        [{"domain": report["domain"], "case": report["case"], "scenario": report["scenario"], **r}
         for r in report["perSeed"]]
    ))
    return written + [tpath, cpath]


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in cols})
    return buf.getvalue()


def load_report(path) -> dict:
    path = Path(path)
    try:
        rep = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    for key in ("domain", "scenario", "detectionAccuracy", "perSeed"):
        if key not in rep:
            raise MalformedFile(f"{path}: missing {key!r}")
    tpath = path.with_suffix(".timing.json")
    if "meanTimeMs" not in rep and tpath.exists():
        rep.update({k: v for k, v in json.loads(tpath.read_text()).items() if k != "perSeed"})
    return rep


def _fmt(v, pct=False):
    if v is None:
        return "-"
    return f"{100 * v:.1f}%" if pct else f"{v:.4g}"


def render_table(reports: list[dict]) -> str:
    """Text summary with one line per report, medians over seeds."""
    head = ("domain", "case", "scenario", "clean acc", "detect acc", "L2", "rel L2", "time ms", "violations")
    rows = [head]
    for r in reports:
        rows.append((
            r["domain"], str(r["case"]), r["scenario"],
            _fmt(r.get("defenderCleanAccuracy"), pct=True), _fmt(r["detectionAccuracy"], pct=True),
            _fmt(r.get("meanL2")), _fmt(r.get("meanRelativeL2")), _fmt(r.get("meanTimeMs")),
            str(r.get("constraintViolations", "-")),
        ))
    widths = [max(len(row[i]) for row in rows) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
