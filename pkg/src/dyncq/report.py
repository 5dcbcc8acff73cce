"""Benchmark report rendering: delimited rows, a plain-text table, and a
steps-vs-size figure written next to the delimited output."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

CSV_HEADER = "size,op,mean_steps,max_steps,mean_ns"


@dataclass(frozen=True)
class BenchRow:
    size: int
    op: str
    mean_steps: float
    max_steps: int
    mean_ns: float

    def csv(self) -> str:
        return (f"{self.size},{self.op},{self.mean_steps:.2f},"
                f"{self.max_steps},{self.mean_ns:.0f}")


def render_csv(rows: Sequence[BenchRow]) -> str:
    return "\n".join([CSV_HEADER] + [r.csv() for r in rows]) + "\n"


def render_text(rows: Sequence[BenchRow], title: str = "") -> str:
    widths = (10, 12, 14, 12, 14)
    header = ("size", "op", "mean_steps", "max_steps", "mean_ns")
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(h.rjust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        cells = (str(r.size), r.op, f"{r.mean_steps:.2f}", str(r.max_steps),
                 f"{r.mean_ns:.0f}")
        lines.append("  ".join(c.rjust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"


def render_figure(rows: Sequence[BenchRow], path: str, title: str = "") -> None:
    """Max instrumented steps per operation against active-domain size,
    log-log; written as a PNG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_op: dict[str, list[BenchRow]] = {}
    for r in rows:
        by_op.setdefault(r.op, []).append(r)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for op, series in sorted(by_op.items()):
        series = sorted(series, key=lambda r: r.size)
        ax.plot([r.size for r in series], [max(r.max_steps, 1) for r in series],
                marker="o", label=op)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("active domain size")
    ax.set_ylabel("max instrumented steps")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    if by_op:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_bench_outputs(rows: Sequence[BenchRow], out_dir: str,
                        basename: str = "bench", title: str = "") -> dict[str, str]:
    """Write CSV, text table, and figure; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "csv": os.path.join(out_dir, f"{basename}.csv"),
        "txt": os.path.join(out_dir, f"{basename}.txt"),
        "png": os.path.join(out_dir, f"{basename}.png"),
    }
    with open(paths["csv"], "w") as fh:
        fh.write(render_csv(rows))
    with open(paths["txt"], "w") as fh:
        fh.write(render_text(rows, title))
    render_figure(rows, paths["png"], title)
    return paths
