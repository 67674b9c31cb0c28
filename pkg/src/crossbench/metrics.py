"""Strategy-grid execution, per-cell metrics, and table/CSV rendering."""

from __future__ import annotations

import csv
import io
import logging
import shutil
import statistics
from dataclasses import dataclass, replace
from pathlib import Path

from .containers import ContainerKind
from .managers import ManagerKind
from .pipeline import CrossingBuilder, JobConfig, prepare_inputs

log = logging.getLogger(__name__)

# Column labels follow the classic strategy-table naming.
CONTAINER_LABELS = {
    ContainerKind.VALUE_SEQ: "stl",
    ContainerKind.DOUBLING_ARRAY: "c",
    ContainerKind.INDIRECT_ARRAY: "obj",
    ContainerKind.SLOT_ARRAY: "clones",
}
CONTAINER_BY_LABEL = {v: k for k, v in CONTAINER_LABELS.items()}

CSV_COLUMNS = [
    "manager",
    "container",
    "compression",
    "split",
    "basket",
    "burst",
    "jump",
    "reduction",
    "crossings",
    "kb_per_event",
    "read_s_per_crossing_mean",
    "read_s_per_crossing_std",
    "write_s_per_event",
    "connect_ms_mean",
    "file_switches_mean",
]


@dataclass
class RunMetrics:
    """Measured outputs of one strategy cell, with its config echo."""

    manager: ManagerKind
    container: ContainerKind
    compression: int
    split: int
    basket: int
    burst: int
    jump: int
    reduction: int
    crossings: int
    kb_per_event: float
    read_s_per_crossing_mean: float
    read_s_per_crossing_std: float
    write_s_per_event: float
    connect_ms_mean: float
    file_switches_mean: float

    def row(self) -> dict[str, object]:
        return {
            "manager": self.manager.value,
            "container": CONTAINER_LABELS[self.container],
            "compression": self.compression,
            "split": self.split,
            "basket": self.basket,
            "burst": self.burst,
            "jump": self.jump,
            "reduction": self.reduction,
            "crossings": self.crossings,
            "kb_per_event": repr(self.kb_per_event),
            "read_s_per_crossing_mean": repr(self.read_s_per_crossing_mean),
            "read_s_per_crossing_std": repr(self.read_s_per_crossing_std),
            "write_s_per_event": repr(self.write_s_per_event),
            "connect_ms_mean": repr(self.connect_ms_mean),
            "file_switches_mean": repr(self.file_switches_mean),
        }


def run_cell(config: JobConfig) -> RunMetrics:
    """Prepare inputs, build every crossing, and collect one metrics row."""
    inputs = prepare_inputs(config)
    builder = CrossingBuilder(config, inputs)
    try:
        timings = builder.run()
        builder.finalize_digis()
    finally:
        builder.close()

    reads = [t.read_s for t in timings]
    connects = [t.connect_s for t in timings]
    switches = [t.file_switches for t in timings]
    n_pileup = max(1, config.pileup_multiplicity)
    return RunMetrics(
        manager=config.manager,
        container=config.container,
        compression=config.compression,
        split=config.split,
        basket=config.basket_size,
        burst=config.burst,
        jump=config.jump,
        reduction=config.reduction,
        crossings=config.crossings,
        kb_per_event=inputs.pileup_kb_per_event,
        read_s_per_crossing_mean=statistics.fmean(reads) if reads else 0.0,
        read_s_per_crossing_std=statistics.stdev(reads) if len(reads) > 1 else 0.0,
        write_s_per_event=inputs.write_seconds_per_event,
        connect_ms_mean=(
            1000.0 * statistics.fmean(connects) / n_pileup if connects else 0.0
        ),
        file_switches_mean=statistics.fmean(switches) if switches else 0.0,
    )


def run_grid(configs: list[JobConfig], keep_files: bool = False) -> list[RunMetrics]:
    """Run cells sequentially; a failing cell is dropped, not the grid."""
    results = []
    for config in configs:
        try:
            results.append(run_cell(config))
        except Exception:
            log.exception(
                "cell %s/%s failed",
                config.manager.value,
                CONTAINER_LABELS[config.container],
            )
        finally:
            if not keep_files:
                shutil.rmtree(config.workdir, ignore_errors=True)
    return results


def _sig3(x: float) -> str:
    return f"{x:.3g}"


def emit_table(metrics: list[RunMetrics]) -> str:
    """Render the 3x4 strategy matrix, size over time in each cell."""
    by_cell = {(m.manager, m.container): m for m in metrics}
    containers = list(CONTAINER_LABELS)
    col_heads = [CONTAINER_LABELS[c].capitalize() for c in containers]
    width = 14
    lines = [
        "File size (Kb/event) / read time (s/crossing)",
        "".join(["          "] + [h.center(width) for h in col_heads]),
    ]
    for manager in ManagerKind:
        cells = []
        for container in containers:
            m = by_cell.get((manager, container))
            if m is None:
                cells.append("-".center(width))
            else:
                cells.append(
                    f"{_sig3(m.kb_per_event)} / {_sig3(m.read_s_per_crossing_mean)}".center(width)
                )
        lines.append("".join([manager.value.capitalize().ljust(10)] + cells))
    return "\n".join(lines) + "\n"


def emit_csv(metrics: list[RunMetrics]) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for m in metrics:
        writer.writerow(m.row())
    return out.getvalue()


def emit(metrics: list[RunMetrics], fmt: str = "table") -> str:
    if fmt == "table":
        return emit_table(metrics)
    if fmt == "csv":
        return emit_csv(metrics)
    raise ValueError(f"unknown format {fmt!r}")


def read_csv(text: str) -> list[RunMetrics]:
    """Parse ``emit_csv`` output back into metrics rows."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(
            RunMetrics(
                manager=ManagerKind(rec["manager"]),
                container=CONTAINER_BY_LABEL[rec["container"]],
                compression=int(rec["compression"]),
                split=int(rec["split"]),
                basket=int(rec["basket"]),
                burst=int(rec["burst"]),
                jump=int(rec["jump"]),
                reduction=int(rec["reduction"]),
                crossings=int(rec["crossings"]),
                kb_per_event=float(rec["kb_per_event"]),
                read_s_per_crossing_mean=float(rec["read_s_per_crossing_mean"]),
                read_s_per_crossing_std=float(rec["read_s_per_crossing_std"]),
                write_s_per_event=float(rec["write_s_per_event"]),
                connect_ms_mean=float(rec["connect_ms_mean"]),
                file_switches_mean=float(rec["file_switches_mean"]),
            )
        )
    return rows
