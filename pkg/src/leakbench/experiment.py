"""Grid runner: hidden-layer widths x protocols x seeds, plus reports.

Each cell derives its own RNG streams from (run seed, width, protocol,
seed index), so results never depend on execution order and a repeated
run writes a byte-identical report.json (wall-time fields aside).
Cell failures are recorded in place and the remaining cells proceed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, SynthConfig, expand_features, generate_synthetic, load_csv
from .metrics import MetricReport
from .model import MlpConfig
from .pipeline import ContaminationReport, ProtocolSpec, RunArtifacts, SplitSpec, run_protocol
from .resample import QUADRATIC_METHODS, ResamplerSpec
from .seeding import derive_seed

__all__ = [
    "CellResult",
    "DatasetSpec",
    "GridConfig",
    "GridReport",
    "ModelParams",
    "REFERENCE_RESULTS",
    "REFERENCE_TOLERANCE",
    "ReferenceDeviation",
    "compare_to_reference",
    "emit_from_dict",
    "emit_report",
    "load_grid_dataset",
    "run_grid",
]

# Previously reported single-run leaky-protocol results on the full
# transactions file, by hidden-layer width; the grid report compares
# its own medians against these.
REFERENCE_RESULTS: dict[int, dict[str, float]] = {
    0: {"accuracy": 0.958, "precision": 0.976, "recall": 0.939, "f1": 0.958},
    1: {"accuracy": 0.959, "precision": 0.985, "recall": 0.932, "f1": 0.957},
    2: {"accuracy": 0.967, "precision": 0.976, "recall": 0.958, "f1": 0.967},
    4: {"accuracy": 0.982, "precision": 0.980, "recall": 0.983, "f1": 0.982},
    6: {"accuracy": 0.982, "precision": 0.985, "recall": 0.979, "f1": 0.982},
    8: {"accuracy": 0.986, "precision": 0.988, "recall": 0.985, "f1": 0.986},
    10: {"accuracy": 0.992, "precision": 0.989, "recall": 0.994, "f1": 0.992},
    12: {"accuracy": 0.992, "precision": 0.991, "recall": 0.992, "f1": 0.992},
    16: {"accuracy": 0.996, "precision": 0.992, "recall": 0.999, "f1": 0.996},
}

REFERENCE_METRICS = ("accuracy", "precision", "recall", "f1")
REFERENCE_TOLERANCE = 0.02

DEFAULT_N_VALUES = (0, 1, 2, 4, 6, 8, 10, 12, 16)

# Datasets larger than this refuse the all-pairs methods unless
# allow_quadratic is set.
QUADRATIC_ROW_LIMIT = 100_000


@dataclass
class DatasetSpec:
    """Where the grid's dataset comes from and how it is prepared."""

    synthetic: SynthConfig | None = None
    csv_path: str | None = None
    expect_schema: bool = False
    columns: tuple[str, ...] | None = None
    feature_degree: int = 1

    def __post_init__(self) -> None:
        if (self.synthetic is None) == (self.csv_path is None):
            raise ValueError("dataset needs exactly one of a synthetic config or a csv path")
        if self.feature_degree not in (1, 2):
            raise ValueError("feature_degree must be 1 or 2")

    def to_dict(self) -> dict:
        if self.synthetic is not None:
            source = {
                "synthetic": {
                    "n_samples": self.synthetic.n_samples,
                    "positive_rate": self.synthetic.positive_rate,
                    "n_features": self.synthetic.n_features,
                    "class_separation": self.synthetic.class_separation,
                    "seed": self.synthetic.seed,
                    "fraud_burst": self.synthetic.fraud_burst,
                }
            }
        else:
            source = {"csv": {"path": self.csv_path, "expect_schema": self.expect_schema}}
        if self.columns is not None:
            source["columns"] = list(self.columns)
        source["feature_degree"] = self.feature_degree
        return source


@dataclass
class ModelParams:
    """Trainer knobs shared by every cell (width and seed vary per cell)."""

    epochs: int = 20
    batch_size: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    threshold: float = 0.5

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "threshold": self.threshold,
        }


@dataclass
class GridConfig:
    dataset: DatasetSpec
    seeds: tuple[int, ...]
    resampler: ResamplerSpec
    split: SplitSpec
    n_values: tuple[int, ...] = DEFAULT_N_VALUES
    protocols: tuple[str, ...] = ("leaky", "clean")
    scaler: str = "standardize"
    model: ModelParams = field(default_factory=ModelParams)
    output_dir: str = "leakbench_out"
    formats: tuple[str, ...] = ("json", "csv", "markdown")
    allow_quadratic: bool = False

    def __post_init__(self) -> None:
        if len(self.seeds) == 0:
            raise ValueError("seeds must not be empty")
        if len(self.n_values) == 0:
            raise ValueError("n_values must not be empty")
        if any(n < 0 for n in self.n_values):
            raise ValueError("n_values must be non-negative")
        if len(self.protocols) == 0:
            raise ValueError("protocols must not be empty")
        for p in self.protocols:
            if p not in ("leaky", "clean"):
                raise ValueError(f"unknown protocol {p!r}")
        bad = [f for f in self.formats if f not in ("json", "csv", "markdown", "svg")]
        if bad:
            raise ValueError(f"unknown output formats: {', '.join(bad)}")

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset.to_dict(),
            "n_values": list(self.n_values),
            "protocols": list(self.protocols),
            "resampler": {
                "method": self.resampler.method,
                "k_neighbors": self.resampler.k_neighbors,
                "m_neighbors": self.resampler.m_neighbors,
                "target_ratio": self.resampler.target_ratio,
            },
            "split": {
                "strategy": self.split.strategy,
                "test_fraction": self.split.test_fraction,
            },
            "scaler": self.scaler,
            "model": self.model.to_dict(),
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
            "formats": list(self.formats),
            "allow_quadratic": self.allow_quadratic,
        }


@dataclass
class CellResult:
    key: str
    n_hidden: int
    protocol: str
    seed_index: int
    seed: int
    metrics: MetricReport | None = None
    contamination: ContaminationReport | None = None
    history: list[float] = field(default_factory=list)
    notes: tuple[str, ...] = ()
    wall_time_s: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        out: dict = {
            "key": self.key,
            "n_hidden": self.n_hidden,
            "protocol": self.protocol,
            "seed_index": self.seed_index,
            "seed": self.seed,
            "notes": list(self.notes),
            "wall_time_s": self.wall_time_s,
            "error": self.error,
        }
        if self.metrics is None:
            out["confusion"] = None
            out["metrics"] = None
        else:
            cm = self.metrics.confusion
            s = self.metrics.scalars
            out["confusion"] = {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn}
            out["metrics"] = {
                "accuracy": s.accuracy,
                "precision": s.precision,
                "recall": s.recall,
                "specificity": s.specificity,
                "f1": s.f1,
                "roc_auc": self.metrics.roc_auc,
                "average_precision": self.metrics.average_precision,
            }
        out["contamination"] = None if self.contamination is None else self.contamination.to_dict()
        out["history"] = list(self.history)
        return out


@dataclass
class GridReport:
    config: GridConfig
    cells: list[CellResult]
    total_wall_time_s: float

    @property
    def failed_cells(self) -> list[CellResult]:
        return [c for c in self.cells if c.error is not None]

    def aggregates(self) -> dict:
        """Median/min/max of every metric per (protocol, width)."""
        table: dict = {}
        for protocol in self.config.protocols:
            table[protocol] = {}
            for n in self.config.n_values:
                rows = [
                    c
                    for c in self.cells
                    if c.protocol == protocol and c.n_hidden == n and c.error is None
                ]
                table[protocol][n] = {
                    name: _summary(rows, name) for name in _AGG_METRICS
                }
        return table

    def leakage_gap(self) -> dict:
        """Median leaky f1 minus median clean f1 per width."""
        if not {"leaky", "clean"} <= set(self.config.protocols):
            return {}
        agg = self.aggregates()
        gap: dict = {}
        for n in self.config.n_values:
            leaky = agg["leaky"][n]["f1"]["median"]
            clean = agg["clean"][n]["f1"]["median"]
            gap[n] = {
                "leaky_f1": leaky,
                "clean_f1": clean,
                "gap": None if leaky is None or clean is None else leaky - clean,
            }
        return gap

    def to_dict(self) -> dict:
        agg = self.aggregates()
        return {
            "schema_version": "1",
            "config": self.config.to_dict(),
            "reference": {str(n): dict(m) for n, m in REFERENCE_RESULTS.items()},
            "cells": [c.to_dict() for c in self.cells],
            "aggregates": {
                protocol: {str(n): v for n, v in per_n.items()}
                for protocol, per_n in agg.items()
            },
            "leakage_gap": {str(n): v for n, v in self.leakage_gap().items()},
            "n_failed_cells": len(self.failed_cells),
            "total_wall_time_s": self.total_wall_time_s,
        }


_AGG_METRICS = (
    "accuracy",
    "precision",
    "recall",
    "specificity",
    "f1",
    "roc_auc",
    "average_precision",
)


def _cell_metric(cell: CellResult, name: str) -> float | None:
    if cell.metrics is None:
        return None
    if name == "roc_auc":
        return cell.metrics.roc_auc
    if name == "average_precision":
        return cell.metrics.average_precision
    return getattr(cell.metrics.scalars, name)


def _summary(rows: list[CellResult], name: str) -> dict:
    values = [v for v in (_cell_metric(c, name) for c in rows) if v is not None]
    if not values:
        return {"median": None, "min": None, "max": None}
    return {
        "median": float(np.median(values)),
        "min": float(min(values)),
        "max": float(max(values)),
    }


# ---------------------------------------------------------------------------
# running the grid
# ---------------------------------------------------------------------------


def load_grid_dataset(spec: DatasetSpec) -> Dataset:
    if spec.synthetic is not None:
        ds = generate_synthetic(spec.synthetic)
    else:
        ds = load_csv(spec.csv_path, expect_schema=spec.expect_schema)
    if spec.columns is not None:
        ds = ds.select_columns(spec.columns)
    return expand_features(ds, spec.feature_degree)


def check_quadratic_gate(cfg: GridConfig, n_rows: int) -> None:
    method = cfg.resampler.method
    if (
        method in QUADRATIC_METHODS
        and n_rows > QUADRATIC_ROW_LIMIT
        and not cfg.allow_quadratic
    ):
        raise ValueError(
            f"{method} runs an all-pairs search over {n_rows} rows; "
            "pass --allow-quadratic to run it anyway"
        )


def cell_key(n_hidden: int, protocol: str, seed_index: int) -> str:
    return f"N{n_hidden}_{protocol}_s{seed_index}"


def run_cell(
    ds: Dataset,
    cfg: GridConfig,
    n_hidden: int,
    protocol: str,
    seed_index: int,
) -> CellResult:
    """Run one grid cell; failures are captured, not raised."""
    seed = cfg.seeds[seed_index]
    stream = derive_seed(seed, n_hidden, protocol, seed_index)
    proto = ProtocolSpec(
        protocol=protocol,
        split=replace(cfg.split, seed=derive_seed(stream, "split")),
        resampler=replace(cfg.resampler, seed=derive_seed(stream, "resample")),
        scaler=cfg.scaler,
    )
    model_cfg = MlpConfig(
        n_features=ds.n_features,
        hidden_neurons=n_hidden,
        epochs=cfg.model.epochs,
        batch_size=cfg.model.batch_size,
        learning_rate=cfg.model.learning_rate,
        beta1=cfg.model.beta1,
        beta2=cfg.model.beta2,
        epsilon=cfg.model.epsilon,
        threshold=cfg.model.threshold,
        seed=derive_seed(stream, "model"),
    )
    cell = CellResult(
        key=cell_key(n_hidden, protocol, seed_index),
        n_hidden=n_hidden,
        protocol=protocol,
        seed_index=seed_index,
        seed=seed,
    )
    started = time.perf_counter()
    try:
        arts: RunArtifacts = run_protocol(ds, proto, model_cfg)
    except Exception as exc:  # noqa: BLE001 - per-cell isolation is the contract
        cell.error = f"{type(exc).__name__}: {exc}"
    else:
        cell.metrics = arts.report
        cell.contamination = arts.contamination
        cell.history = arts.history
        cell.notes = arts.notes
    cell.wall_time_s = time.perf_counter() - started
    return cell


def run_grid(cfg: GridConfig) -> GridReport:
    """Run every (width, protocol, seed) cell over one shared dataset."""
    ds = load_grid_dataset(cfg.dataset)
    check_quadratic_gate(cfg, ds.n_rows)
    started = time.perf_counter()
    cells = [
        run_cell(ds, cfg, n, protocol, si)
        for n in cfg.n_values
        for protocol in cfg.protocols
        for si in range(len(cfg.seeds))
    ]
    return GridReport(
        config=cfg,
        cells=cells,
        total_wall_time_s=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# reference comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceDeviation:
    n_hidden: int
    metric: str
    observed: float
    expected: float
    deviation: float
    within_tolerance: bool


def compare_to_reference(
    report: GridReport, reference: dict[int, dict[str, float]] | None = None
) -> list[ReferenceDeviation]:
    """Absolute deviation of leaky medians from the reference grid.

    The report must contain leaky cells for every reference width;
    missing widths raise with the full list.
    """
    ref = REFERENCE_RESULTS if reference is None else reference
    if "leaky" not in report.config.protocols:
        raise ValueError("reference comparison needs leaky-protocol cells")
    missing = sorted(set(ref) - set(report.config.n_values))
    if missing:
        raise ValueError(
            "report is missing leaky cells for widths: "
            + ", ".join(str(n) for n in missing)
        )
    agg = report.aggregates()["leaky"]
    out = []
    for n in sorted(ref):
        for metric in REFERENCE_METRICS:
            observed = agg[n][metric]["median"]
            if observed is None:
                raise ValueError(f"no defined {metric} median for width {n}")
            dev = abs(observed - ref[n][metric])
            out.append(
                ReferenceDeviation(
                    n_hidden=n,
                    metric=metric,
                    observed=observed,
                    expected=ref[n][metric],
                    deviation=dev,
                    within_tolerance=dev <= REFERENCE_TOLERANCE,
                )
            )
    return out


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def _fmt(value, digits: int = 6) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def render_cells_csv(report_dict: dict) -> str:
    test_fraction = report_dict["config"]["split"]["test_fraction"]
    header = (
        "key,n_hidden,protocol,seed_index,seed,test_fraction,"
        "tp,fp,tn,fn,accuracy,precision,recall,specificity,f1,roc_auc,average_precision,"
        "n_test_rows,n_synthetic_in_test,n_synthetic_parent_in_train,"
        "n_cross_split_duplicates,leak_flag,wall_time_s,error"
    )
    lines = [header]
    for cell in report_dict["cells"]:
        cm = cell["confusion"] or {}
        met = cell["metrics"] or {}
        con = cell["contamination"] or {}
        row = [
            cell["key"],
            str(cell["n_hidden"]),
            cell["protocol"],
            str(cell["seed_index"]),
            str(cell["seed"]),
            _fmt(test_fraction, 4),
            _fmt(cm.get("tp")),
            _fmt(cm.get("fp")),
            _fmt(cm.get("tn")),
            _fmt(cm.get("fn")),
            _fmt(met.get("accuracy")),
            _fmt(met.get("precision")),
            _fmt(met.get("recall")),
            _fmt(met.get("specificity")),
            _fmt(met.get("f1")),
            _fmt(met.get("roc_auc")),
            _fmt(met.get("average_precision")),
            _fmt(con.get("n_test_rows")),
            _fmt(con.get("n_synthetic_in_test")),
            _fmt(con.get("n_synthetic_parent_in_train")),
            _fmt(con.get("n_cross_split_duplicates")),
            _fmt(con.get("leak_flag")),
            _fmt(cell["wall_time_s"], 3),
            "" if cell["error"] is None else cell["error"].replace(",", ";"),
        ]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def render_markdown(report_dict: dict) -> str:
    cfg = report_dict["config"]
    ds = cfg["dataset"]
    source = "synthetic" if "synthetic" in ds else ds["csv"]["path"]
    lines = [
        "# Resampling leakage report",
        "",
        f"- dataset: {source}",
        f"- split: {cfg['split']['strategy']} (test_fraction={cfg['split']['test_fraction']})",
        f"- scaler: {cfg['scaler']}",
        f"- resampler: {cfg['resampler']['method']} (target_ratio={cfg['resampler']['target_ratio']})",
        f"- seeds per cell: {len(cfg['seeds'])}",
        f"- failed cells: {report_dict['n_failed_cells']}",
        "",
    ]
    agg = report_dict["aggregates"]
    for protocol in cfg["protocols"]:
        lines.append(f"## Median metrics by hidden width ({protocol} protocol)")
        lines.append("")
        lines.append("| hidden | accuracy | precision | recall | specificity | f1 | roc_auc | avg_precision |")
        lines.append("|---|---|---|---|---|---|---|---|")
        for n in cfg["n_values"]:
            row = agg[protocol][str(n)]
            cells = " | ".join(
                _fmt(row[m]["median"], 4)
                for m in (
                    "accuracy",
                    "precision",
                    "recall",
                    "specificity",
                    "f1",
                    "roc_auc",
                    "average_precision",
                )
            )
            lines.append(f"| {n} | {cells} |")
        lines.append("")
    gap = report_dict["leakage_gap"]
    if gap:
        lines.append("## Leakage gap (median f1, leaky - clean)")
        lines.append("")
        lines.append("| hidden | leaky f1 | clean f1 | gap |")
        lines.append("|---|---|---|---|")
        for n in cfg["n_values"]:
            row = gap[str(n)]
            lines.append(
                f"| {n} | {_fmt(row['leaky_f1'], 4)} | {_fmt(row['clean_f1'], 4)} "
                f"| {_fmt(row['gap'], 4)} |"
            )
        lines.append("")
    reference = report_dict["reference"]
    ref_widths = sorted(int(n) for n in reference)
    if "leaky" in cfg["protocols"] and set(ref_widths) <= set(cfg["n_values"]):
        lines.append("## Reference comparison (leaky medians vs published reference)")
        lines.append("")
        lines.append("| hidden | f1 observed | f1 reference | abs deviation |")
        lines.append("|---|---|---|---|")
        for n in ref_widths:
            observed = agg["leaky"][str(n)]["f1"]["median"]
            expected = reference[str(n)]["f1"]
            dev = None if observed is None else abs(observed - expected)
            lines.append(
                f"| {n} | {_fmt(observed, 4)} | {_fmt(expected, 4)} | {_fmt(dev, 4)} |"
            )
        lines.append("")
    lines.append(
        "Average precision uses the step-sum definition sum((R_n - R_n-1) * P_n); "
        "metrics with a zero denominator are reported as n/a."
    )
    lines.append("")
    return "\n".join(lines)


def _curve_svg(points: np.ndarray, xlabel: str, ylabel: str, title: str) -> str:
    size, margin = 420, 50
    span = size - 2 * margin

    def sx(v: float) -> float:
        return margin + v * span

    def sy(v: float) -> float:
        return margin + (1.0 - v) * span

    path = " ".join(f"{sx(p[0]):.2f},{sy(p[1]):.2f}" for p in points)
    ticks = []
    for t in (0.0, 0.5, 1.0):
        ticks.append(
            f'<text x="{sx(t):.1f}" y="{size - margin + 18}" font-size="11" '
            f'text-anchor="middle">{t:g}</text>'
        )
        ticks.append(
            f'<text x="{margin - 8}" y="{sy(t) + 4:.1f}" font-size="11" '
            f'text-anchor="end">{t:g}</text>'
        )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
        f'<rect width="{size}" height="{size}" fill="white"/>\n'
        f'<text x="{size / 2}" y="24" font-size="13" text-anchor="middle">{title}</text>\n'
        f'<rect x="{margin}" y="{margin}" width="{span}" height="{span}" '
        f'fill="none" stroke="#888"/>\n'
        + "\n".join(ticks)
        + f'\n<text x="{size / 2}" y="{size - 12}" font-size="12" '
        f'text-anchor="middle">{xlabel}</text>\n'
        f'<text x="16" y="{size / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {size / 2})">{ylabel}</text>\n'
        f'<polyline points="{path}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>\n'
        "</svg>\n"
    )


def _curve_csv(points: np.ndarray, xlabel: str, ylabel: str) -> str:
    lines = [f"{xlabel},{ylabel}"]
    lines.extend(f"{float(p[0])!r},{float(p[1])!r}" for p in points)
    return "\n".join(lines) + "\n"


def write_cell_curves(cell: CellResult, curves_dir: Path) -> list[Path]:
    """Write the ROC and PR point lists of one cell as csv and svg."""
    if cell.metrics is None:
        return []
    curves_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, points, xlabel, ylabel in (
        ("roc", cell.metrics.roc_points, "fpr", "tpr"),
        ("prc", cell.metrics.prc_points, "recall", "precision"),
    ):
        csv_path = curves_dir / f"{cell.key}_{kind}.csv"
        csv_path.write_text(_curve_csv(points, xlabel, ylabel))
        svg_path = curves_dir / f"{cell.key}_{kind}.svg"
        svg_path.write_text(_curve_svg(points, xlabel, ylabel, f"{cell.key} {kind}"))
        written.extend([csv_path, svg_path])
    return written


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def emit_report(report: GridReport, out_dir: str, formats: tuple[str, ...]) -> list[Path]:
    """Write the requested formats under out_dir; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict()
    written: list[Path] = []
    if "json" in formats:
        path = out / "report.json"
        path.write_text(_dump_json(payload))
        written.append(path)
    if "csv" in formats:
        path = out / "cells.csv"
        path.write_text(render_cells_csv(payload))
        written.append(path)
    if "markdown" in formats:
        path = out / "summary.md"
        path.write_text(render_markdown(payload))
        written.append(path)
    if "svg" in formats:
        for cell in report.cells:
            written.extend(write_cell_curves(cell, out / "curves"))
    return written


def emit_from_dict(report_dict: dict, out_dir: str, formats: tuple[str, ...]) -> list[Path]:
    """Re-emit table formats from a stored report.json payload.

    Curve files cannot be rebuilt from the stored payload (point lists
    live only in the per-cell curve CSVs), so svg is rejected here.
    """
    if "svg" in formats:
        raise ValueError("svg re-emission needs a rerun; report.json keeps no curve points")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "json" in formats:
        path = out / "report.json"
        path.write_text(_dump_json(report_dict))
        written.append(path)
    if "csv" in formats:
        path = out / "cells.csv"
        path.write_text(render_cells_csv(report_dict))
        written.append(path)
    if "markdown" in formats:
        path = out / "summary.md"
        path.write_text(render_markdown(report_dict))
        written.append(path)
    return written
