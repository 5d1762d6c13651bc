"""CSV and markdown renderings of an ExperimentResult.

Files per measure: ``correlation_<measure>`` (tau / P / R by method and
budget), ``agreement_<measure>`` (relevant found, AA, MA, MD, AD, bias), and
one ``ma_<measure>_<method>_b<budget>.csv`` per cell with the binned MA
score gaps. Output depends only on the result, never on wall-clock or order
of computation.
"""

from __future__ import annotations

import io
import re
from pathlib import Path
from typing import Iterable

from .agreement import bin_by_position, write_ma_csv

AGREEMENT_ROWS = [
    ("# rels.", "nrels"),
    ("AA", "aa"),
    ("MA_total", "ma_total"),
    ("MA_G", "ma_g"),
    ("MA_L", "ma_l"),
    ("MD_total", "md_total"),
    ("MD_G", "md_g"),
    ("MD_L", "md_l"),
    ("AD", "ad"),
    ("Bias", "bias"),
]


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "-", text).strip("-").lower()


def _pct(x: float) -> str:
    return f"{round(100 * x)}%"


def _value(mean: dict, key: str) -> float:
    if key == "ma_total":
        return mean["ma_g"] + mean["ma_l"]
    if key == "md_total":
        return mean["md_g"] + mean["md_l"]
    return mean[key]


def _methods(result) -> list[str]:
    return list(result.config["methods"])


def _fraction(result, budget: int, measure: str) -> float | None:
    for c in result.cells:
        if c["budget"] == budget and c["measure"] == measure:
            return c["fraction"]
    return None


def _budget_label(result, budget: int, measure: str) -> str:
    frac = _fraction(result, budget, measure)
    return f"{budget}" if frac is None else f"{budget} ({_pct(frac)})"


def correlation_csv(result, measure: str) -> str:
    out = io.StringIO()
    out.write("method,budget,fraction,tau,precision,recall,tau_std,precision_std,recall_std,repetitions\n")
    for c in result.cells:
        if c["measure"] != measure:
            continue
        m, s = c["mean"], c["std"]
        out.write(f"{c['method']},{c['budget']},{c['fraction']:.6f},{m['tau']:.6f},{m['precision']:.6f},"
                  f"{m['recall']:.6f},{s['tau']:.6f},{s['precision']:.6f},{s['recall']:.6f},{c['repetitions']}\n")
    return out.getvalue()


def correlation_markdown(result, measure: str) -> str:
    budgets = result.config["budgets"]
    head = ["Method"]
    for b in budgets:
        label = f"{measure}/{_budget_label(result, b, measure)}"
        head += [f"{label} tau", "P", "R"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for method in _methods(result):
        row = [method]
        for b in budgets:
            try:
                m = result.cell(method, b, measure)["mean"]
            except KeyError:
                row += ["", "", ""]
                continue
            row += [f"{m['tau']:.2f}", f"{m['precision']:.3f}", f"{m['recall']:.3f}"]
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def agreement_csv(result, measure: str) -> str:
    out = io.StringIO()
    keys = [k for _, k in AGREEMENT_ROWS]
    out.write("method,budget,fraction,n_gold_sig," + ",".join(keys) + ",repetitions\n")
    for c in result.cells:
        if c["measure"] != measure:
            continue
        vals = []
        for k in keys:
            v = _value(c["mean"], k)
            vals.append(f"{v:.4f}" if k == "bias" else f"{v:.1f}")
        out.write(f"{c['method']},{c['budget']},{c['fraction']:.6f},{result.gold[measure]['n_sig']},"
                  + ",".join(vals) + f",{c['repetitions']}\n")
    return out.getvalue()


def agreement_markdown(result, measure: str) -> str:
    methods = _methods(result)
    gold = result.gold.get(measure, {})
    lines = [f"{measure}: {gold.get('n_sig', 0)} of {gold.get('n_pairs', 0)} pairs significant under gold judgments",
             "", "| Budget | Metric | " + " | ".join(methods) + " |", "|" + "---|" * (len(methods) + 2)]
    for b in result.config["budgets"]:
        for label, key in AGREEMENT_ROWS:
            row = [_budget_label(result, b, measure), label]
            for method in methods:
                try:
                    v = _value(result.cell(method, b, measure)["mean"], key)
                except KeyError:
                    row.append("")
                    continue
                row.append(_pct(v) if key == "bias" else f"{round(v)}")
            lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def ma_csv(result, cell: dict) -> str:
    n_positions = len(result.gold[cell["measure"]]["ranking"])
    bins = bin_by_position(((int(p), float(v)) for p, v in cell["ma"]), n_positions,
                           result.config.get("ma_bin_size", 3))
    out = io.StringIO()
    write_ma_csv(bins, out)
    return out.getvalue()


def render_reports(result, out_dir: str | Path, formats: Iterable[str] = ("csv", "markdown")) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = set(formats)
    written: list[Path] = []

    def put(name: str, text: str) -> None:
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    for measure in result.config["measures"]:
        slug = _slug(measure)
        if "csv" in formats:
            put(f"correlation_{slug}.csv", correlation_csv(result, measure))
            put(f"agreement_{slug}.csv", agreement_csv(result, measure))
        if "markdown" in formats:
            put(f"correlation_{slug}.md", correlation_markdown(result, measure))
            put(f"agreement_{slug}.md", agreement_markdown(result, measure))
    if "csv" in formats:
        for c in result.cells:
            put(f"ma_{_slug(c['measure'])}_{_slug(c['method'])}_b{c['budget']}.csv", ma_csv(result, c))
    return written
