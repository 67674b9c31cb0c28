"""Crossing builder: folders, input preparation, the 4-step loop, verification.

Building one crossing means: read the next signal event, load the configured
number of pileup events through a single reconnecting manager (burst/jump
selection over the file chain, random rank deciding which in-memory folder
each lands in), digitize everything in memory, and append the digis to the
output store.  ``verify_strategies`` replays the same entry set through every
manager kind and compares the events field-exactly against the matrix
manager's readback.
"""

from __future__ import annotations

import shutil
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .codec import encode_row
from .containers import ContainerKind
from .events import (
    DIGIS_LAYOUT,
    EVENT_LAYOUT,
    DEFAULT_DIGITIZE_THRESHOLD,
    Digis,
    Event,
    FieldMismatch,
    content_mismatches,
    digitize,
    generate_event,
    new_event,
)
from .fileformat import FileStats
from .managers import (
    ManagerKind,
    PooledSource,
    ReconnectingSource,
    open_reader,
    open_writer,
)
from .selection import FileChain, PileupSelector, SelectorParams, assign_ranks

PILEUP_SLOTS = 153

# Seed-stream offsets so signal, pileup and rank draws never share a stream.
_SIGNAL_STREAM = 0x5163A1
_PILEUP_STREAM = 0x9E3779B9
_RANK_STREAM = 0x2545F491


@dataclass
class JobConfig:
    """One cell of the strategy grid plus all runtime parameters."""

    container: ContainerKind = ContainerKind.VALUE_SEQ
    manager: ManagerKind = ManagerKind.TREE
    compression: int = 1
    split: int = 99
    basket_size: int = 8000
    burst: int = 3
    jump: int = 10
    reduction: int = 10
    crossings: int = 100
    signal_files: int = 1
    pileup_files: int = 10
    events_per_file: int = 100
    pileup_multiplicity: int = PILEUP_SLOTS
    seed: int = 1
    rank_seed: int | None = None
    workdir: Path = Path("crossbench-work")
    distinct_pileup_seeds: bool = False
    manager_per_file: bool = False
    digitize_threshold: float = DEFAULT_DIGITIZE_THRESHOLD

    def __post_init__(self):
        self.workdir = Path(self.workdir)
        if not 0 <= self.compression <= 9:
            raise ValueError("compression must be in 0..9")
        if self.pileup_multiplicity > PILEUP_SLOTS:
            raise ValueError(f"pileup multiplicity exceeds {PILEUP_SLOTS} slots")
        if self.crossings > self.signal_files * self.events_per_file:
            raise ValueError("not enough signal events for the requested crossings")

    def with_scale(self, *, paper: bool) -> "JobConfig":
        if not paper:
            return self
        return replace(
            self,
            reduction=1,
            crossings=500,
            pileup_files=100,
            events_per_file=500,
        )


class FolderRegistry:
    """Named in-memory slots for the current crossing."""

    def __init__(self, kind: ContainerKind, slots: int = PILEUP_SLOTS):
        self.signal: Event = new_event(kind)
        self.minbias: list[Event] = [new_event(kind) for _ in range(slots)]
        self.digis: Digis | None = None
        self._by_name = {"crossing/signal": self.signal}
        for i, ev in enumerate(self.minbias):
            self._by_name[f"crossing/minbias{i}"] = ev

    def folder(self, name: str):
        if name == "crossing/digis":
            return self.digis
        return self._by_name[name]

    def names(self) -> list[str]:
        return [*self._by_name.keys(), "crossing/digis"]


@dataclass
class PreparedInputs:
    signal_path: Path
    pileup_paths: list[Path]
    signal_stats: FileStats
    pileup_stats: FileStats
    write_seconds_per_event: float

    @property
    def chain(self) -> FileChain:
        return FileChain.of((p, self.pileup_stats.event_count) for p in self.pileup_paths)

    @property
    def pileup_kb_per_event(self) -> float:
        return self.pileup_stats.kb_per_event


def _write_store(config: JobConfig, path: Path, prefix: str, seed: int, count: int,
                 first_event_id: int = 0) -> FileStats:
    writer = open_writer(
        config.manager,
        path,
        EVENT_LAYOUT,
        prefix=prefix,
        level=config.compression,
        split=config.split,
        basket_size=config.basket_size,
    )
    try:
        for i in range(count):
            event = generate_event(
                seed, first_event_id + i, config.reduction, config.container
            )
            writer.write_event(event)
    except BaseException:
        writer.close()
        raise
    return writer.finalize()


def prepare_inputs(config: JobConfig) -> PreparedInputs:
    """Generate and write the signal file(s) and the pileup file replicas."""
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    signal_path = workdir / "signal.store"
    signal_stats = _write_store(
        config,
        signal_path,
        "signal",
        config.seed + _SIGNAL_STREAM,
        config.signal_files * config.events_per_file,
    )

    pileup_paths = [workdir / f"minbias{i:03d}.store" for i in range(config.pileup_files)]
    pileup_stats = _write_store(
        config,
        pileup_paths[0],
        "minbias",
        config.seed + _PILEUP_STREAM,
        config.events_per_file,
    )
    for i, path in enumerate(pileup_paths[1:], start=1):
        if config.distinct_pileup_seeds:
            _write_store(
                config,
                path,
                "minbias",
                config.seed + _PILEUP_STREAM + i,
                config.events_per_file,
            )
        else:
            shutil.copyfile(pileup_paths[0], path)

    elapsed = time.perf_counter() - started
    written = signal_stats.event_count + pileup_stats.event_count * (
        config.pileup_files if config.distinct_pileup_seeds else 1
    )
    return PreparedInputs(
        signal_path,
        pileup_paths,
        signal_stats,
        pileup_stats,
        elapsed / written if written else 0.0,
    )


@dataclass
class CrossingTimings:
    signal_read_s: float
    pileup_read_s: float
    connect_s: float
    digitize_s: float
    write_s: float
    wall_s: float
    file_switches: int

    @property
    def read_s(self) -> float:
        """Time to read all events of the crossing, connects included."""
        return self.signal_read_s + self.connect_s + self.pileup_read_s


class CrossingBuilder:
    """Runs the per-crossing loop against prepared inputs."""

    def __init__(self, config: JobConfig, inputs: PreparedInputs):
        self.config = config
        self.inputs = inputs
        self.folders = FolderRegistry(config.container)
        self.chain = inputs.chain
        self.selector = PileupSelector(
            self.chain,
            SelectorParams(config.burst, config.jump, config.seed),
        )
        source_cls = PooledSource if config.manager_per_file else ReconnectingSource
        self.pileup_source = source_cls(config.manager, EVENT_LAYOUT, "minbias")
        self.signal_reader = open_reader(
            config.manager, inputs.signal_path, EVENT_LAYOUT, "signal"
        )
        self.digis_path = Path(config.workdir) / "digis.store"
        self.digis_writer = open_writer(
            config.manager,
            self.digis_path,
            DIGIS_LAYOUT,
            prefix="digis",
            level=config.compression,
            split=config.split,
            basket_size=config.basket_size,
        )
        self._next_crossing = 0

    def _rank_seed(self, crossing: int) -> int:
        base = self.config.rank_seed
        if base is None:
            base = self.config.seed + _RANK_STREAM
        return base + 1_000_003 * crossing

    def build_crossing(self, n: int) -> tuple[Digis, CrossingTimings]:
        config = self.config
        wall0 = time.perf_counter()

        t0 = time.perf_counter()
        self.signal_reader.load(n, self.folders.signal)
        t_signal = time.perf_counter() - t0

        multiplicity = config.pileup_multiplicity
        t_connect = 0.0
        t_pileup = 0.0
        switches = 0
        loaded: list[Event] = []
        if multiplicity:
            indices, switches = self.selector.next_indices(multiplicity)
            ranks = assign_ranks(self._rank_seed(n), multiplicity)
            for k, g in enumerate(indices):
                fi, local = self.chain.locate(g)
                folder = self.folders.minbias[ranks[k]]
                t_connect += self.pileup_source.connect(folder, self.chain.path(fi))
                t0 = time.perf_counter()
                self.pileup_source.load(local)
                t_pileup += time.perf_counter() - t0
            loaded = self.folders.minbias[:multiplicity]

        t0 = time.perf_counter()
        digis = digitize(
            self.folders.signal,
            loaded,
            config.digitize_threshold,
            config.container,
        )
        digis.event_id = n
        t_digitize = time.perf_counter() - t0

        t0 = time.perf_counter()
        self.digis_writer.write_event(digis)
        t_write = time.perf_counter() - t0

        self.folders.digis = digis
        timings = CrossingTimings(
            t_signal,
            t_pileup,
            t_connect,
            t_digitize,
            t_write,
            time.perf_counter() - wall0,
            switches,
        )
        return digis, timings

    def run(self) -> list[CrossingTimings]:
        timings = []
        for n in range(self.config.crossings):
            _, t = self.build_crossing(n)
            timings.append(t)
        return timings

    def finalize_digis(self) -> FileStats:
        return self.digis_writer.finalize()

    def close(self) -> None:
        self.pileup_source.close()
        self.signal_reader.close()
        self.digis_writer.close()


@dataclass(frozen=True)
class StrategyMismatch:
    manager: ManagerKind
    entry: int
    detail: FieldMismatch


@dataclass
class VerifyReport:
    container: ContainerKind
    compression: int
    split: int
    entries_checked: int
    mismatches: list[StrategyMismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def verify_strategies(config: JobConfig) -> VerifyReport:
    """Write the pileup chain with every manager and cross-check readback.

    The matrix manager is the oracle: for every entry of the chain, the keys
    and tree readbacks must match it field-exactly.  The generated events are
    also checked against the oracle, so a bug shared by all managers cannot
    hide.
    """
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    total = config.pileup_files * config.events_per_file
    report = VerifyReport(config.container, config.compression, config.split, total)

    managers = (ManagerKind.MATRIX, ManagerKind.KEYS, ManagerKind.TREE)
    paths: dict[ManagerKind, list[Path]] = {}
    for kind in managers:
        cell = replace(config, manager=kind)
        kind_dir = workdir / kind.value
        kind_dir.mkdir(parents=True, exist_ok=True)
        chain_paths = [
            kind_dir / f"minbias{i:03d}.store" for i in range(config.pileup_files)
        ]
        _write_store(
            cell, chain_paths[0], "minbias",
            config.seed + _PILEUP_STREAM, config.events_per_file,
        )
        for i, path in enumerate(chain_paths[1:], start=1):
            if config.distinct_pileup_seeds:
                _write_store(
                    cell, path, "minbias",
                    config.seed + _PILEUP_STREAM + i, config.events_per_file,
                )
            else:
                shutil.copyfile(chain_paths[0], path)
        paths[kind] = chain_paths

    readers = {
        kind: [open_reader(kind, p, EVENT_LAYOUT, "minbias") for p in paths[kind]]
        for kind in managers
    }
    try:
        oracle = new_event(config.container)
        candidate = new_event(config.container)
        for fi in range(config.pileup_files):
            for local in range(config.events_per_file):
                entry = fi * config.events_per_file + local
                readers[ManagerKind.MATRIX][fi].load(local, oracle)
                if fi == 0 or config.distinct_pileup_seeds:
                    regen_seed = config.seed + _PILEUP_STREAM
                    if config.distinct_pileup_seeds:
                        regen_seed += fi
                    regen = generate_event(
                        regen_seed, local, config.reduction, config.container
                    )
                    for d in content_mismatches(regen, oracle, EVENT_LAYOUT):
                        report.mismatches.append(
                            StrategyMismatch(ManagerKind.MATRIX, entry, d)
                        )
                for kind in (ManagerKind.KEYS, ManagerKind.TREE):
                    readers[kind][fi].load(local, candidate)
                    if _fast_equal(oracle, candidate):
                        continue
                    for d in content_mismatches(oracle, candidate, EVENT_LAYOUT):
                        report.mismatches.append(StrategyMismatch(kind, entry, d))
    finally:
        for group in readers.values():
            for r in group:
                r.close()
    return report


def _fast_equal(a: Event, b: Event) -> bool:
    if a.event_id != b.event_id:
        return False
    for schema, sa, sb in zip(EVENT_LAYOUT.schemas, a.collections(), b.collections()):
        if sa.size() != sb.size():
            return False
        if encode_row(sa, schema).data != encode_row(sb, schema).data:
            return False
    return True
