"""Artifact emission: trace lines, metrics document, per-interval counts, intel archive."""
from __future__ import annotations

import csv
import json
import os

from .engine import Trace
from .itm import COUNTED_PROTOS
from .scenario import ScenarioConfig


def counts_rows(trace) -> list[list]:
    rows = []
    for r in trace:
        if r["kind"] == "log":
            c = r["counts"]
            rows.append([r["monitor"], r["interval"], r["t"], r["count"], r["bytes"], r["status"]]
                        + [c.get(p, 0) for p in COUNTED_PROTOS])
    rows.sort(key=lambda row: (row[0], row[1]))
    return rows


COUNTS_HEADER = ["monitor", "interval", "t_us", "count", "bytes", "status", *COUNTED_PROTOS]


def intel_archive(trace) -> list[dict]:
    out = []
    for r in trace:
        if r["kind"] in ("intel", "infiltrate", "takedown"):
            out.append({k: v for k, v in r.items()})
    return out


def emit(trace: Trace, report: dict, cfg: ScenarioConfig, out_dir: str | None = None) -> dict:
    """Write the configured artifacts and return {artifact: path} plus the digest."""
    out_dir = out_dir or cfg.output.dir or "."
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir!r} is not writable")
    arts = set(cfg.output.artifacts)
    paths = {}
    if "trace" in arts:
        paths["trace"] = p = os.path.join(out_dir, "trace.jsonl")
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(trace.serialize())
    if "metrics" in arts:
        paths["metrics"] = p = os.path.join(out_dir, "metrics.json")
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if "counts" in arts:
        paths["counts"] = p = os.path.join(out_dir, "counts.csv")
        with open(p, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COUNTS_HEADER)
            w.writerows(counts_rows(trace))
    if "intel" in arts:
        paths["intel"] = p = os.path.join(out_dir, "intel.json")
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(intel_archive(trace), fh, indent=2)
            fh.write("\n")
    paths["digest"] = trace.digest()
    return paths


def read_trace(path: str) -> Trace:
    t = Trace()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                if rec.get("kind") == "header" and not t.header:
                    t.header = rec
                else:
                    t.append(rec)
    return t


def file_digest(path: str) -> str:
    """Digest of a trace file, recomputed from its canonical re-serialization."""
    return read_trace(path).digest()
