"""Event data model: byte-exact class schemas, synthetic generation, digitization.

A simulated input event carries five collections (generator particles,
simulated vertices and tracks, calorimeter and tracker hits).  Each class has
a fixed attribute schema whose widths drive all size accounting in the
stores.  The generator produces events deterministically from a seed, with
Poisson multiplicities around the nominal composition and field values drawn
from quantized/clustered distributions so that attribute-wise storage has
realistic compression leverage.  The digitizer is a deterministic
group-and-sum stand-in for front-end electronics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .containers import ContainerKind, TypedSequence, make_container

FLOAT = "float"
INT = "int"

_STRUCT_CODES = {
    (FLOAT, 4): "f",
    (FLOAT, 8): "d",
    (INT, 2): "h",
    (INT, 4): "i",
    (INT, 8): "q",
}


@dataclass(frozen=True)
class AttributeSpec:
    """One numerical attribute: name, byte width, float/int kind."""

    name: str
    width: int
    kind: str

    def __post_init__(self):
        if self.width not in (2, 4, 8):
            raise ValueError(f"attribute width must be 2, 4 or 8, got {self.width}")
        if self.kind not in (FLOAT, INT):
            raise ValueError(f"attribute kind must be {FLOAT!r} or {INT!r}")
        if self.width == 2 and self.kind != INT:
            raise ValueError("2-byte attributes must be integers")
        if not self.name.isidentifier():
            raise ValueError(f"attribute name {self.name!r} is not an identifier")

    @property
    def dtype_code(self) -> str:
        return ("<f" if self.kind == FLOAT else "<i") + str(self.width)

    @property
    def struct_code(self) -> str:
        return _STRUCT_CODES[(self.kind, self.width)]


@dataclass(frozen=True)
class ClassSchema:
    """Ordered attribute descriptors of one persistent class."""

    class_name: str
    attributes: tuple[AttributeSpec, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate attribute names in {self.class_name}")

    @property
    def raw_size(self) -> int:
        """Per-element byte size at native attribute widths."""
        return sum(a.width for a in self.attributes)

    @property
    def all_double_size(self) -> int:
        """Per-element byte size with every attribute widened to 8 bytes."""
        return 8 * len(self.attributes)

    def dtype(self, widen: bool = False) -> np.dtype:
        return _schema_dtype(self, widen)

    def struct_format(self, widen: bool = False) -> str:
        if widen:
            return "<" + "d" * len(self.attributes)
        return "<" + "".join(a.struct_code for a in self.attributes)


@lru_cache(maxsize=None)
def _schema_dtype(schema: ClassSchema, widen: bool) -> np.dtype:
    if widen:
        return np.dtype([(a.name, "<f8") for a in schema.attributes])
    return np.dtype([(a.name, a.dtype_code) for a in schema.attributes])


def _f4(name: str) -> AttributeSpec:
    return AttributeSpec(name, 4, FLOAT)


def _f8(name: str) -> AttributeSpec:
    return AttributeSpec(name, 8, FLOAT)


def _i2(name: str) -> AttributeSpec:
    return AttributeSpec(name, 2, INT)


def _i4(name: str) -> AttributeSpec:
    return AttributeSpec(name, 4, INT)


@dataclass(slots=True)
class GenParticle:
    energy: float
    px: float
    py: float
    pz: float
    x: float
    y: float
    z: float
    time: float
    charge: float
    weight: float
    pdg_code: int


@dataclass(slots=True)
class SimVertex:
    x: float
    y: float
    z: float
    time: float
    energy_loss: float
    quality: float
    parent_index: int
    process_type: int
    region: int
    detector_id: int
    flags: int


@dataclass(slots=True)
class SimTrack:
    px: float
    py: float
    pz: float
    energy: float
    time: float
    pdg_code: int


@dataclass(slots=True)
class CaloHit:
    energy: float
    time: float
    cell_id: int
    track_index: int
    weight: float


@dataclass(slots=True)
class TrackHit:
    tof: float
    energy_loss: float
    entry_x: float
    entry_y: float
    entry_z: float
    exit_x: float
    exit_y: float
    exit_z: float
    momentum: float
    theta: float
    phi: float
    detector_id: float


@dataclass(slots=True)
class CaloDigi:
    cell_id: int
    amplitude: float


@dataclass(slots=True)
class TrackDigi:
    detector_id: int
    hit_count: int
    charge: float


GEN_PARTICLE_SCHEMA = ClassSchema(
    "GenParticle",
    (
        _f8("energy"),
        _f4("px"), _f4("py"), _f4("pz"),
        _f4("x"), _f4("y"), _f4("z"),
        _f4("time"), _f4("charge"), _f4("weight"),
        _i2("pdg_code"),
    ),
)

SIM_VERTEX_SCHEMA = ClassSchema(
    "SimVertex",
    (
        _f4("x"), _f4("y"), _f4("z"),
        _f4("time"), _f4("energy_loss"), _f4("quality"),
        _i2("parent_index"), _i2("process_type"), _i2("region"),
        _i2("detector_id"), _i2("flags"),
    ),
)

SIM_TRACK_SCHEMA = ClassSchema(
    "SimTrack",
    (
        _f8("px"), _f8("py"), _f8("pz"), _f8("energy"),
        _f4("time"),
        _i2("pdg_code"),
    ),
)

CALO_HIT_SCHEMA = ClassSchema(
    "CaloHit",
    (
        _f4("energy"), _f4("time"),
        _i4("cell_id"), _i4("track_index"),
        _f4("weight"),
    ),
)

TRACK_HIT_SCHEMA = ClassSchema(
    "TrackHit",
    (
        _f8("tof"), _f8("energy_loss"),
        _f4("entry_x"), _f4("entry_y"), _f4("entry_z"),
        _f4("exit_x"), _f4("exit_y"), _f4("exit_z"),
        _f4("momentum"), _f4("theta"), _f4("phi"),
        _f4("detector_id"),
    ),
)

CALO_DIGI_SCHEMA = ClassSchema("CaloDigi", (_i4("cell_id"), _f4("amplitude")))

TRACK_DIGI_SCHEMA = ClassSchema(
    "TrackDigi", (_i4("detector_id"), _i4("hit_count"), _f4("charge"))
)


@dataclass
class Event:
    """One signal or minimum-bias event: five typed collections."""

    event_id: int
    gen_particles: TypedSequence
    sim_vertices: TypedSequence
    sim_tracks: TypedSequence
    calo_hits: TypedSequence
    track_hits: TypedSequence

    def collections(self) -> tuple[TypedSequence, ...]:
        return (
            self.gen_particles,
            self.sim_vertices,
            self.sim_tracks,
            self.calo_hits,
            self.track_hits,
        )


@dataclass
class Digis:
    """Digitized output of one crossing."""

    event_id: int
    calo_digis: TypedSequence
    track_digis: TypedSequence

    def collections(self) -> tuple[TypedSequence, ...]:
        return (self.calo_digis, self.track_digis)


@dataclass(frozen=True)
class FolderLayout:
    """Shape of a folder's content: its classes, in storage order."""

    name: str
    schemas: tuple[ClassSchema, ...]
    element_types: tuple[type, ...]
    content_type: type

    def new_content(self, kind: ContainerKind, event_id: int = 0):
        seqs = [
            make_container(kind, schema, etype)
            for schema, etype in zip(self.schemas, self.element_types)
        ]
        return self.content_type(event_id, *seqs)


EVENT_LAYOUT = FolderLayout(
    "event",
    (
        GEN_PARTICLE_SCHEMA,
        SIM_VERTEX_SCHEMA,
        SIM_TRACK_SCHEMA,
        CALO_HIT_SCHEMA,
        TRACK_HIT_SCHEMA,
    ),
    (GenParticle, SimVertex, SimTrack, CaloHit, TrackHit),
    Event,
)

DIGIS_LAYOUT = FolderLayout(
    "digis",
    (CALO_DIGI_SCHEMA, TRACK_DIGI_SCHEMA),
    (CaloDigi, TrackDigi),
    Digis,
)


def new_event(kind: ContainerKind, event_id: int = 0) -> Event:
    return EVENT_LAYOUT.new_content(kind, event_id)


def new_digis(kind: ContainerKind, event_id: int = 0) -> Digis:
    return DIGIS_LAYOUT.new_content(kind, event_id)


# Mean element counts per minimum-bias event, the nominal composition that
# all size accounting is checked against.
NOMINAL_MULTIPLICITIES: dict[str, int] = {
    "GenParticle": 351,
    "SimVertex": 584,
    "SimTrack": 169,
    "CaloHit": 3282,
    "TrackHit": 1871,
}


def expected_event_bytes(
    multiplicities: Mapping[str, float], mode: str = "raw"
) -> float:
    """Expected event payload size for the given per-class mean counts.

    ``mode='raw'`` uses native attribute widths, ``mode='all_double'`` widens
    every attribute to 8 bytes.
    """
    if mode not in ("raw", "all_double"):
        raise ValueError(f"unknown mode {mode!r}")
    total = 0.0
    for schema in EVENT_LAYOUT.schemas:
        count = multiplicities.get(schema.class_name, 0)
        if count < 0:
            raise ValueError("multiplicities must be non-negative")
        size = schema.raw_size if mode == "raw" else schema.all_double_size
        total += count * size
    return total


# --- synthetic event generation -------------------------------------------

_PDG_CODES = np.array(
    [211, -211, 22, 111, 321, -321, 2212, 2112, 11, -11, 13, -13], dtype=np.int64
)
_PDG_WEIGHTS = np.array(
    [0.25, 0.25, 0.18, 0.02, 0.04, 0.04, 0.05, 0.05, 0.04, 0.04, 0.02, 0.02]
)


def _event_rng(seed: int, event_id: int, reduction: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed, event_id, reduction])
    return np.random.Generator(np.random.PCG64(ss))


def _sig3(x: np.ndarray) -> np.ndarray:
    """Round to 3 significant decimal digits, elementwise; 0 stays 0."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    exp = np.floor(np.log10(np.where(ax > 0, ax, 1.0)))
    scale = np.power(10.0, 2.0 - exp)
    return np.where(ax > 0, np.round(x * scale) / scale, 0.0)


def _q32(x) -> list[float]:
    """Quantize to 3 significant digits and narrow to exact f32 values."""
    return np.asarray(_sig3(x), dtype="<f4").tolist()


def _q64(x) -> list[float]:
    return _sig3(x).tolist()


def _f32_list(x) -> list[float]:
    return np.asarray(x, dtype="<f4").tolist()


def _fill_gen_particles(rng: np.random.Generator, n: int, out: TypedSequence) -> None:
    cols = (
        _q64(rng.exponential(3.0, n) + 0.2),            # energy
        _q32(rng.normal(0.0, 1.5, n)),                  # px
        _q32(rng.normal(0.0, 1.5, n)),                  # py
        _q32(rng.normal(0.0, 2.5, n)),                  # pz
        _q32(rng.normal(0.0, 0.03, n)),                 # x
        _q32(rng.normal(0.0, 0.03, n)),                 # y
        _q32(rng.normal(0.0, 45.0, n)),                 # z
        _q32(rng.integers(0, 500, n) * 0.05),           # time, 50 ps steps
        _f32_list(rng.choice([-1.0, 0.0, 1.0], size=n, p=[0.4, 0.2, 0.4])),
        _f32_list(rng.choice([0.5, 1.0, 2.0], size=n, p=[0.05, 0.9, 0.05])),
        rng.choice(_PDG_CODES, size=n, p=_PDG_WEIGHTS).astype("<i2").tolist(),
    )
    for vals in zip(*cols):
        out.add(GenParticle(*vals))


def _fill_sim_vertices(rng: np.random.Generator, n: int, out: TypedSequence) -> None:
    cols = (
        _q32(rng.normal(0.0, 0.03, n)),                 # x
        _q32(rng.normal(0.0, 0.03, n)),                 # y
        _q32(rng.normal(0.0, 45.0, n)),                 # z
        _q32(rng.integers(0, 500, n) * 0.05),           # time
        _q32(rng.integers(1, 256, n) * 1e-5),           # energy_loss, ADC-like
        _f32_list(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n,
                             p=[0.05, 0.1, 0.15, 0.3, 0.4])),
        rng.integers(-1, 170, n).astype("<i2").tolist(),   # parent_index
        rng.integers(0, 14, n).astype("<i2").tolist(),     # process_type
        rng.integers(0, 6, n).astype("<i2").tolist(),      # region
        rng.integers(0, 24, n).astype("<i2").tolist(),     # detector_id
        rng.choice([0, 1, 2, 4, 8, 16], size=n,
                   p=[0.6, 0.1, 0.1, 0.1, 0.05, 0.05]).astype("<i2").tolist(),
    )
    for vals in zip(*cols):
        out.add(SimVertex(*vals))


def _fill_sim_tracks(rng: np.random.Generator, n: int, out: TypedSequence) -> None:
    cols = (
        _q64(rng.normal(0.0, 2.0, n)),                  # px
        _q64(rng.normal(0.0, 2.0, n)),                  # py
        _q64(rng.normal(0.0, 3.0, n)),                  # pz
        _q64(rng.exponential(4.0, n) + 0.3),            # energy
        _q32(rng.integers(0, 500, n) * 0.05),           # time
        rng.choice(_PDG_CODES, size=n, p=_PDG_WEIGHTS).astype("<i2").tolist(),
    )
    for vals in zip(*cols):
        out.add(SimTrack(*vals))


def _fill_calo_hits(rng: np.random.Generator, n: int, out: TypedSequence) -> None:
    # Hits cluster in a per-event set of active towers; cell ids repeat the
    # tower base so the id column carries long byte-level runs.
    n_towers = max(1, n // 24 + 1)
    towers = rng.integers(0, 3000, n_towers) * 32
    which = rng.integers(0, n_towers, n)
    cols = (
        _q32(rng.integers(1, 1024, n) * 2e-3),          # energy, ADC-like
        _q32(rng.integers(0, 500, n) * 0.05),           # time
        (towers[which] + rng.integers(0, 32, n)).astype("<i4").tolist(),
        rng.integers(-1, 170, n).astype("<i4").tolist(),   # track_index
        _f32_list(rng.choice([0.5, 1.0, 2.0], size=n, p=[0.05, 0.9, 0.05])),
    )
    for vals in zip(*cols):
        out.add(CaloHit(*vals))


def _fill_track_hits(rng: np.random.Generator, n: int, out: TypedSequence) -> None:
    # Entry/exit points live on a sensor-local coordinate grid; times and
    # deposits on readout grids.  The quantization is what gives per-attribute
    # columns their compression leverage.
    entry_x = rng.integers(-100, 101, n) * 0.05
    entry_y = rng.integers(-100, 101, n) * 0.05
    entry_z = rng.integers(-150, 151, n) * 0.1
    cols = (
        _q64(rng.integers(4, 200, n) * 0.25),           # tof, 0.25 ns bins
        _q64(rng.integers(1, 256, n) * 3e-5),           # energy_loss
        _q32(entry_x),
        _q32(entry_y),
        _q32(entry_z),
        _q32(entry_x + rng.integers(-5, 6, n) * 0.05),  # exit_x
        _q32(entry_y + rng.integers(-5, 6, n) * 0.05),  # exit_y
        _q32(entry_z + rng.integers(-5, 6, n) * 0.1),   # exit_z
        _q32(rng.integers(1, 400, n) * 0.025),          # momentum
        _q32(rng.integers(0, 630, n) * 0.005),          # theta
        _q32(rng.integers(-628, 629, n) * 0.005),       # phi
        _f32_list(rng.integers(0, 30, n)),              # detector_id (layer)
    )
    for vals in zip(*cols):
        out.add(TrackHit(*vals))


_FILLERS = {
    "GenParticle": _fill_gen_particles,
    "SimVertex": _fill_sim_vertices,
    "SimTrack": _fill_sim_tracks,
    "CaloHit": _fill_calo_hits,
    "TrackHit": _fill_track_hits,
}


def _check_reduction(reduction: int) -> None:
    if reduction < 1:
        raise ValueError(f"reduction must be >= 1, got {reduction}")


def event_multiplicities(seed: int, event_id: int, reduction: int = 1) -> dict[str, int]:
    """Per-class element counts of the event ``generate_event`` would build.

    Draws only the multiplicities, skipping value generation; consistent with
    ``generate_event`` for the same arguments.
    """
    _check_reduction(reduction)
    rng = _event_rng(seed, event_id, reduction)
    lam = [m / reduction for m in NOMINAL_MULTIPLICITIES.values()]
    counts = rng.poisson(lam)
    return {name: int(c) for name, c in zip(NOMINAL_MULTIPLICITIES, counts)}


def generate_event(
    seed: int,
    event_id: int,
    reduction: int = 1,
    kind: ContainerKind = ContainerKind.VALUE_SEQ,
) -> Event:
    """Deterministically generate one synthetic event.

    Same ``(seed, event_id, reduction)`` always yields the identical event;
    ``reduction`` divides the nominal per-class mean multiplicities.
    """
    _check_reduction(reduction)
    rng = _event_rng(seed, event_id, reduction)
    lam = [m / reduction for m in NOMINAL_MULTIPLICITIES.values()]
    counts = rng.poisson(lam)
    event = new_event(kind, event_id)
    for (name, filler), seq, n in zip(
        _FILLERS.items(), event.collections(), counts
    ):
        filler(rng, int(n), seq)
    return event


# --- digitization -----------------------------------------------------------

DEFAULT_DIGITIZE_THRESHOLD = 0.05


def digitize(
    signal: Event,
    pileups: Iterable[Event],
    threshold: float = DEFAULT_DIGITIZE_THRESHOLD,
    kind: ContainerKind | None = None,
) -> Digis:
    """Group-and-sum all hits of a crossing into digis.

    Calo: per distinct cell id, amplitude = sum of energy*weight over all
    events; cells at or below ``threshold`` are dropped.  Tracker: per
    distinct detector id, hit count and summed energy loss.  Sums use exact
    (fsum) accumulation, so the result is independent of event and hit order.
    """
    if kind is None:
        kind = signal.calo_hits.kind
    cells: dict[int, list[float]] = {}
    detectors: dict[int, list[float]] = {}
    for event in (signal, *pileups):
        hits = event.calo_hits
        for i in range(hits.size()):
            h = hits.get(i)
            cells.setdefault(h.cell_id, []).append(h.energy * h.weight)
        thits = event.track_hits
        for i in range(thits.size()):
            t = thits.get(i)
            detectors.setdefault(int(t.detector_id), []).append(t.energy_loss)
    digis = new_digis(kind)
    for cell_id in sorted(cells):
        amplitude = math.fsum(cells[cell_id])
        if amplitude > threshold:
            digis.calo_digis.add(CaloDigi(cell_id, float(np.float32(amplitude))))
    for det_id in sorted(detectors):
        losses = detectors[det_id]
        digis.track_digis.add(
            TrackDigi(det_id, len(losses), float(np.float32(math.fsum(losses))))
        )
    return digis


# --- field-exact comparison --------------------------------------------------


@dataclass(frozen=True)
class FieldMismatch:
    class_name: str
    element: int
    attribute: str
    expected: object
    actual: object


def content_mismatches(expected, actual, layout: FolderLayout) -> list[FieldMismatch]:
    """Field-exact differences between two folder contents (events or digis)."""
    out: list[FieldMismatch] = []
    if expected.event_id != actual.event_id:
        out.append(
            FieldMismatch("<content>", -1, "event_id", expected.event_id, actual.event_id)
        )
    for schema, a, b in zip(layout.schemas, expected.collections(), actual.collections()):
        if a.size() != b.size():
            out.append(FieldMismatch(schema.class_name, -1, "<size>", a.size(), b.size()))
            continue
        for i in range(a.size()):
            ea, eb = a.get(i), b.get(i)
            if ea == eb:
                continue
            for attr in schema.attributes:
                va, vb = getattr(ea, attr.name), getattr(eb, attr.name)
                if va != vb:
                    out.append(FieldMismatch(schema.class_name, i, attr.name, va, vb))
    return out


def contents_equal(expected, actual, layout: FolderLayout) -> bool:
    if expected.event_id != actual.event_id:
        return False
    for a, b in zip(expected.collections(), actual.collections()):
        if a.size() != b.size():
            return False
        if any(a.get(i) != b.get(i) for i in range(a.size())):
            return False
    return True
