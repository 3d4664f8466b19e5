"""Plot-ready data exports: Sankey flows, top_sim swarm rows, comparison tables, run logs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .evaluate import ContingencyMatrix, MetricReport
from .gateway import CostModel, RunLedger, compute_cost

SWARM_FIELDS = ("dataset", "level", "run_id", "h_name", "score")


def sankey_export(C: ContingencyMatrix) -> dict:
    nodes = [{"id": f"H:{n}", "name": n, "side": "human"} for n in C.rows]
    nodes += [{"id": f"M:{n}", "name": n, "side": "generated"} for n in C.cols]
    links = [
        {"source": f"H:{h}", "target": f"M:{m}", "weight": int(C.counts[i, j])}
        for i, h in enumerate(C.rows)
        for j, m in enumerate(C.cols)
        if C.counts[i, j] > 0
    ]
    return {"nodes": nodes, "links": links, "total": C.total}


def swarm_export(top_sims: dict[str, dict[str, float]], dataset: str, level: str) -> list[dict]:
    """``top_sims`` maps run id -> {human category -> top_sim}; one row per (run, category)."""
    if not top_sims:
        raise ValueError("no top_sim maps to export")
    return [
        {"dataset": dataset, "level": level, "run_id": run_id, "h_name": h, "score": score}
        for run_id, scores in top_sims.items()
        for h, score in scores.items()
    ]


def write_swarm_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SWARM_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({**row, "score": repr(float(row["score"]))})


def _better(p: float | None, n: float | None, closer_to_zero: bool = False) -> str | None:
    if p is None or n is None:
        return None
    if closer_to_zero:
        p, n = -abs(p), -abs(n)
    if p == n:
        return None
    return "P" if p > n else "N"


def summary_table(pipeline: MetricReport, naive: MetricReport) -> dict:
    """One comparison row of pipeline (P) vs naive (N) aggregates at matching dataset/level."""
    if (pipeline.dataset, pipeline.level) != (naive.dataset, naive.level):
        raise ValueError(
            f"mismatched reports: {pipeline.dataset}/{pipeline.level} vs {naive.dataset}/{naive.level}"
        )
    row = {"dataset": pipeline.dataset, "level": pipeline.level}
    better = {}
    for key in ("precision", "recall", "f1"):
        p, n = pipeline.means.get(key), naive.means.get(key)
        row[key] = {"P": p, "N": n}
        better[key] = _better(p, n)
    row["granularity"] = {"P": pipeline.granularity, "N": naive.granularity}
    better["granularity"] = _better(pipeline.granularity, naive.granularity, closer_to_zero=True)
    row["better"] = better
    return row


def summary_markdown(rows: list[dict]) -> str:
    def cell(row, key, side, fmt):
        v = row[key][side]
        text = "-" if v is None else format(v, fmt)
        return f"**{text}**" if row["better"][key] == side else text

    lines = [
        "| Data | Lv. | Pre. P | Pre. N | Rec. P | Rec. N | F1 P | F1 N | |M|-|H| P | |M|-|H| N |",
        "|---|---|---|---|---|---|---|---|---|---|",
    ]
    for row in rows:
        cells = [row["dataset"], row["level"]]
        for key, fmt in (("precision", ".2f"), ("recall", ".2f"), ("f1", ".2f"), ("granularity", "+.1f")):
            cells += [cell(row, key, "P", fmt), cell(row, key, "N", fmt)]
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("P: pipeline, N: naive. Bold marks the better value (granularity: closer to zero).")
    return "\n".join(lines) + "\n"


def runlog_export(ledger: RunLedger, wall_seconds: float, cost_model: CostModel,
                  dataset: str, run_id: str, status: str = "ok", error: str | None = None) -> dict:
    totals = ledger.totals
    record = {
        "dataset": dataset,
        "run_id": run_id,
        "status": status,
        "minutes": wall_seconds / 60.0,
        "calls": len(ledger),
        "input_tokens": totals.input_tokens,
        "output_tokens": totals.output_tokens,
        "cost": compute_cost(ledger, cost_model),
        "per_tag": {
            tag: {"calls": ledger.call_counts()[tag], "input_tokens": u.input_tokens, "output_tokens": u.output_tokens}
            for tag, u in ledger.by_tag().items()
        },
    }
    if error is not None:
        record["error"] = error
    return record


def efficiency_table(records: list[dict]) -> list[dict]:
    """Average minutes and cost per dataset over successful runs."""
    by: dict[str, list[dict]] = {}
    for r in records:
        if r.get("status") == "ok":
            by.setdefault(r["dataset"], []).append(r)
    return [
        {
            "dataset": ds,
            "runs": len(rs),
            "avg_minutes": sum(r["minutes"] for r in rs) / len(rs),
            "avg_cost": sum(r["cost"] for r in rs) / len(rs),
        }
        for ds, rs in sorted(by.items())
    ]


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")
