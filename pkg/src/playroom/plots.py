"""Utilitarian SVG charts rendered from the run and experiment CSVs."""

from __future__ import annotations

import csv
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _read_csv(path: str) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def _numeric(rows: List[dict], col: str) -> List[float]:
    out = []
    for row in rows:
        try:
            out.append(float(row[col]))
        except (ValueError, KeyError):
            out.append(float("nan"))
    return out


def line_chart(csv_path: str, x_col: str, y_cols: Sequence[str],
               out_path: str, title: Optional[str] = None) -> str:
    rows = _read_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    x = _numeric(rows, x_col)
    fig, ax = plt.subplots(figsize=(7, 4))
    for col in y_cols:
        ax.plot(x, _numeric(rows, col), marker="o", markersize=3, label=col)
    ax.set_xlabel(x_col)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path


def bar_chart(csv_path: str, label_col: str, value_cols: Sequence[str],
              out_path: str, title: Optional[str] = None) -> str:
    rows = [r for r in _read_csv(csv_path) if r.get(label_col)]
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    labels = [r[label_col] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(1, len(value_cols))
    base = range(len(labels))
    for i, col in enumerate(value_cols):
        xs = [b + i * width for b in base]
        ax.bar(xs, _numeric(rows, col), width=width, label=col)
    ax.set_xticks([b + 0.4 - width / 2 for b in base])
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.legend(fontsize=8)
    ax.grid(True, axis="y", alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path
