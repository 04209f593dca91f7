"""Report writers: delimited output, JSON summaries, and rendered figures.

Every run writes into one output directory: CSV tables with a header row, a
summary.json echoing the full configuration and seed, and PNG figures
rendered from the same rows (histograms of ratios, scatter of compared
distances).  All writers sort what they emit, and figures are saved without
volatile metadata, so a fixed seed reproduces every byte.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


@dataclass
class ReportContext:
    outdir: Path
    config: dict
    files: list[str] = field(default_factory=list)
    figures: bool = True

    def __post_init__(self):
        self.outdir = Path(self.outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = self.outdir / name
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow(list(row))
        self.files.append(name)
        return path

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.outdir / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        self.files.append(name)
        return path

    def finalize(self, summary: dict) -> Path:
        payload = {"config": self.config, "files": sorted(self.files), **summary}
        return self.write_json("summary.json", payload)

    # -- figures -----------------------------------------------------------

    def _save(self, fig, name: str) -> Path:
        path = self.outdir / name
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
        self.files.append(name)
        return path

    def render_histogram(self, name: str, values: Sequence[float], title: str, xlabel: str) -> Path | None:
        if not self.figures or not values:
            return None
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.hist(list(values), bins=min(20, max(5, len(values) // 8)), color="#4878d0", edgecolor="black")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("pairs")
        fig.tight_layout()
        return self._save(fig, name)

    def render_scatter(
        self,
        name: str,
        xs: Sequence[float],
        ys: Sequence[float],
        title: str,
        xlabel: str,
        ylabel: str,
        diagonal: bool = True,
    ) -> Path | None:
        if not self.figures or not xs:
            return None
        fig, ax = plt.subplots(figsize=(4.2, 4.2))
        ax.scatter(list(xs), list(ys), s=14, color="#d65f5f", alpha=0.8, edgecolors="none")
        if diagonal:
            hi = max(max(xs), max(ys), 1)
            ax.plot([0, hi], [0, hi], lw=0.8, color="gray", linestyle="--")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        return self._save(fig, name)


REPORT_SCHEMA = {
    "special_path.csv": {
        "pair": "sample pair index",
        "oracle": "exact model-space distance",
        "special": "special path length",
        "ratio": "special / oracle (1.0 for degenerate pairs)",
    },
    "formula_piece.csv": {
        "pair": "sample pair index",
        "d": "tree-factor distance",
        "sigma": "cutoff projection sum over the quasi-line family",
    },
    "formula_x1.csv": {
        "pair": "sample pair index",
        "d": "glued-space distance",
        "sigma": "cutoff projection sum over corridor families",
        "d_tree": "tree distance between the endpoint pieces",
    },
    "formula_coneoff.csv": {
        "pair": "sample pair index",
        "d_base": "tree-factor distance",
        "thick2": "doubled thick distance d^K",
        "sigma": "cutoff sum over boundary lines",
        "mode": "geodesic enumeration mode (complete/sampled)",
    },
    "partition.csv": {
        "class": "class index",
        "line": "canonical line label",
    },
    "quasitree.csv": {
        "node_a": "line:param",
        "node_b": "line:param",
    },
    "embed_phi.csv": {
        "pair": "sample pair index",
        "d_model": "model-space distance",
        "d_first": "first glued coordinate distance",
        "d_second": "second glued coordinate distance",
    },
    "embed_product.csv": {
        "pair": "sample pair index",
        "d_glued": "glued-space distance",
        "d_tree": "tree term",
        "sum_classes": "sum of class quasi-tree distances",
    },
    "pipeline.csv": {
        "pair": "sample pair index",
        "d_glued": "glued-space distance",
        "thick2": "doubled thick distance sum",
        "d_binding": "binding quasi-tree distance",
    },
    "subgroup_morse.csv": {
        "element": "serialized element",
        "translation": "tree translation length",
        "morse": "1 iff Morse",
    },
    "validation.json": {
        "ok": "true iff no admissibility violation",
        "violations": "kind/where/detail triples",
        "notes": "informational findings",
    },
    "contraction.json": {
        "constant": "contraction constant C under test",
        "checked": "pairs with far projections actually verified",
        "violations": "pair indices failing the C-closeness conditions",
        "neighborhood_R": "fitted containment radius for core-to-core paths",
    },
    "height.json": {
        "witnesses": "explicit conjugator/element words",
        "lower_bound": "bounded-search lower bound for height + 1",
    },
}
