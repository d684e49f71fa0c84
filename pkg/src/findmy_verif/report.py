"""Output artifacts: verdict reports, delimited summaries, figures, dumps.

The JSON verdict report is the primary artifact and is deterministic for a
fixed config when timing capture is off; elapsed times are the one
inherently nondeterministic field, so `--no-timing` zeroes them out for
byte-for-byte reproducibility.  Next to the JSON the writer drops a CSV with
one row per lemma and a PNG chart of the same table.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

from .checker import Verdict
from .engine import ScenarioBounds, TraceEngine, param_render, render_event, render_fact

TOOL_VERSION = "0.1.0"

_STATUS_COLORS = {
    "holds_at_bound": "#2a9d48",
    "falsified": "#c23b22",
}


def bounds_json(bounds: ScenarioBounds) -> dict:
    return {
        "max_sessions": bounds.max_sessions,
        "max_epochs": bounds.max_epochs,
        "max_reports": bounds.max_reports,
        "reveals": sorted(bounds.reveals),
        "deduction_depth": bounds.deduction_depth,
        "injection_bound": bounds.injection_bound,
    }


def verdict_json(verdict: Verdict, *, timing: bool = True) -> dict:
    out = {
        "lemma": verdict.lemma,
        "verdict": verdict.status,
        "expected": verdict.expect,
        "as_expected": verdict.as_expected,
        "unbounded_reference": verdict.unbounded_status,
        "note": verdict.note(),
        "bounds": bounds_json(verdict.bounds),
        "ecdh_canonicalization": verdict.ecdh_rule,
        "traces_explored": verdict.traces,
        "steps_explored": verdict.nodes,
        "elapsed_ms": round(verdict.elapsed_ms, 3) if timing else 0.0,
    }
    if verdict.counterexample is not None:
        out["counterexample"] = verdict.counterexample.to_json()
    return out


def report_json(
    verdicts: list[Verdict],
    *,
    backend: str,
    timing: bool = True,
    extra_meta: Optional[dict] = None,
) -> dict:
    meta = {
        "tool": "findmy-verif",
        "version": TOOL_VERSION,
        "backend": backend,
    }
    if extra_meta:
        meta.update(extra_meta)
    return {
        "meta": meta,
        "verdicts": [verdict_json(v, timing=timing) for v in verdicts],
        "all_as_expected": all(v.as_expected for v in verdicts),
    }


def write_report(path: Path, report: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2) + "\n")


def write_csv(path: Path, report: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = [
        "lemma",
        "verdict",
        "expected",
        "as_expected",
        "unbounded_reference",
        "traces_explored",
        "steps_explored",
        "elapsed_ms",
    ]
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in report["verdicts"]:
            writer.writerow({k: row[k] for k in fields})


def write_figure(path: Path, report: dict) -> None:
    """Horizontal bars of search effort per lemma, colored by verdict."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = report["verdicts"]
    if not rows:
        return
    names = [r["lemma"] for r in rows][::-1]
    traces = [max(r["traces_explored"], 1) for r in rows][::-1]
    colors = [_STATUS_COLORS.get(r["verdict"], "#888888") for r in rows][::-1]

    fig, ax = plt.subplots(figsize=(8, 0.42 * len(rows) + 1.6))
    ax.barh(names, traces, color=colors)
    ax.set_xscale("log")
    ax.set_xlabel("traces explored (log scale)")
    ax.set_title("bounded lemma verdicts")
    for i, row in enumerate(rows[::-1]):
        marker = "ok" if row["as_expected"] else "UNEXPECTED"
        ax.text(
            traces[i] * 1.05,
            i,
            f"{row['verdict']} ({marker})",
            va="center",
            fontsize=8,
        )
    ax.margins(x=0.25)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report_bundle(
    out: Path, report: dict, *, figure: bool = True
) -> list[Path]:
    """JSON report plus CSV and figure siblings.  `out` may be the JSON path
    or a directory."""
    if out.suffix == ".json":
        json_path = out
        stem = out.with_suffix("")
    else:
        json_path = out / "verdicts.json"
        stem = out / "verdicts"
    write_report(json_path, report)
    written = [json_path]
    csv_path = stem.with_suffix(".csv")
    write_csv(csv_path, report)
    written.append(csv_path)
    if figure:
        png_path = stem.with_suffix(".png")
        write_figure(png_path, report)
        written.append(png_path)
    return written


class TraceDumpWriter:
    """One JSON object per line: a header per trace, then one line per step."""

    def __init__(self, fh):
        self.fh = fh
        self.traces = 0
        self.steps = 0
        self.records = 0

    def _write(self, obj: dict) -> None:
        self.fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
        self.records += 1

    def on_leaf(self, engine: TraceEngine) -> None:
        index = self.traces
        self.traces += 1
        self._write({"trace": index, "length": engine.trace_length()})
        for step in engine.steps:
            self.steps += 1
            self._write(
                {
                    "trace": index,
                    "step": step.index,
                    "rule": step.rule,
                    "event": [render_event(e) for e in step.events],
                    "params": [
                        param_render(p)
                        for p in (step.events[0][1] if step.events else ())
                    ],
                    "consumed": [render_fact(f) for f in step.consumed],
                    "produced": [render_fact(f) for f in step.produced],
                }
            )

    def summary(self) -> dict:
        return {"traces": self.traces, "steps": self.steps, "records": self.records}
