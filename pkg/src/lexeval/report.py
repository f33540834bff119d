"""Serialisation of runner results: JSON, TSV tables and a static HTML page."""

from __future__ import annotations

import html
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable

FORMATS = ("json", "tsv", "html")


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def format_cell(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def table_tsv(table: dict) -> str:
    lines = ["\t".join(table["columns"])]
    lines += ["\t".join(format_cell(v) for v in row) for row in table["rows"]]
    return "\n".join(lines) + "\n"


def _html_table(name: str, table: dict) -> str:
    head = "".join(f"<th>{html.escape(c)}</th>" for c in table["columns"])
    body = "".join(
        "<tr>" + "".join(f"<td>{html.escape(format_cell(v))}</td>" for v in row) + "</tr>" for row in table["rows"]
    )
    return f"<h3>{html.escape(name)}</h3>\n<table><thead><tr>{head}</tr></thead><tbody>{body}</tbody></table>\n"


def _curve_svg(curves: list[dict], width: int = 480, height: int = 240) -> str:
    pad = 30
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    parts.append(f'<rect x="{pad}" y="10" width="{width - 2 * pad}" height="{height - pad - 10}" fill="none" stroke="#999"/>')
    for ci, curve in enumerate(curves):
        n = len(curve["y"])
        pts = []
        for i, y in enumerate(curve["y"]):
            px = pad + (width - 2 * pad) * (i / max(n - 1, 1))
            py = height - pad - (height - pad - 10) * min(max(y, 0.0), 1.0)
            pts.append(f"{px:.1f},{py:.1f}")
        hue = (ci * 67) % 360
        parts.append(f'<polyline fill="none" stroke="hsl({hue},60%,40%)" stroke-width="2" points="{" ".join(pts)}"/>')
        parts.append(
            f'<text x="{width - pad + 2}" y="{20 + 12 * ci}" font-size="10" fill="hsl({hue},60%,40%)">'
            f"{html.escape(curve['group'])}</text>"
        )
    if curves:
        for i, lab in enumerate(curves[0]["x"]):
            px = pad + (width - 2 * pad) * (i / max(len(curves[0]["x"]) - 1, 1))
            parts.append(f'<text x="{px - 8:.1f}" y="{height - 12}" font-size="10">{html.escape(lab)}</text>')
    parts.append("</svg>")
    return "".join(parts)


def render_html(results: dict, title: str = "lexeval report") -> str:
    meta = results.get("meta", {})
    out = [
        "<!DOCTYPE html>",
        '<html><head><meta charset="utf-8">',
        f"<title>{html.escape(title)}</title>",
        "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse;margin-bottom:1.5em}"
        "td,th{border:1px solid #ccc;padding:3px 8px;text-align:right}th{background:#f3f3f3}</style>",
        "</head><body>",
        f"<h1>{html.escape(title)}</h1>",
        "<h2>Run</h2>",
        "<table>" + "".join(
            f"<tr><th>{html.escape(str(k))}</th><td>{html.escape(format_cell(v))}</td></tr>" for k, v in sorted(meta.items())
        ) + "</table>",
        "<h2>Tables</h2>",
    ]
    tables = results.get("tables", {})
    for name in sorted(tables):
        out.append(_html_table(name, tables[name]))
    if not tables:
        out.append('<p class="no-data">No data.</p>')
    out.append("<h2>Plots</h2>")
    curves = results.get("curves") or []
    plots = {k: v for k, v in results.get("plots", {}).items() if v.get("rows")}
    if curves:
        out.append(_curve_svg(curves))
    if not curves and not plots:
        out.append('<section id="no-data"><p>No data: this run produced no curves or plot series.</p></section>')
    for name in sorted(plots):
        out.append(_html_table(name, plots[name]))
    payload = {"curves": curves, "auc_ecdf": results.get("auc_ecdf", {}), "plots": results.get("plots", {})}
    embedded = json.dumps(payload, sort_keys=True, allow_nan=False).replace("</", "<\\/")
    out.append(f'<script type="application/json" id="plot-data">{embedded}</script>')
    out.append("</body></html>")
    return "\n".join(out) + "\n"


def emit_report(results: dict, out_dir: str | os.PathLike, formats: Iterable[str] = ("json", "tsv")) -> list[Path]:
    """Write ``results`` under ``out_dir``; returns the written paths in order."""
    out_dir = Path(out_dir)
    formats = list(formats)
    unknown = [f for f in formats if f not in FORMATS]
    if unknown:
        raise ValueError(f"unknown report format(s): {unknown}")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir} is not writable")
    written = []
    if "json" in formats:
        atomic_write(out_dir / "results.json", dumps(results))
        written.append(out_dir / "results.json")
    if "tsv" in formats:
        for kind in ("tables", "plots"):
            for name, table in sorted(results.get(kind, {}).items()):
                path = out_dir / kind / f"{name}.tsv"
                atomic_write(path, table_tsv(table))
                written.append(path)
    if "html" in formats:
        atomic_write(out_dir / "report.html", render_html(results))
        written.append(out_dir / "report.html")
    return written
