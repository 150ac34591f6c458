"""Run records: the persisted form of a finished simulation.

Two interchangeable encodings of the same content:

* JSONL, human-greppable: one header object, one object per tick row, one
  footer object. Floats are written with repr (shortest round-trip), keys
  sorted, so identical runs give identical bytes. Non-finite metric values
  are encoded as null (the only non-finite the engine emits is +inf, so
  null decodes back to +inf).
* binary, fixed-width little-endian rows behind a JSON header, for bulk
  trajectory work. Row layout is a numpy structured dtype built from the
  agent count; non-finite floats are stored natively.

Row semantics follow the engine's trace convention: row L is the state at
tick L, its sensor bits are the ones that produced the step into L, and its
diffusion value is computed from the inputs applied on that step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import WorldConfig
from .metrics import Classification, PhaseLabel, classify_run
from .model import CODE_MODE, MODE_CODE, Behavior
from .util import dump_stable_json, float_or_null, null_or_float

RECORD_FORMAT = "swarmsim.run"
RECORD_VERSION = 1
BINARY_MAGIC = b"SWRMREC1"
BINARY_END = b"SWRMEND1"


class RecordError(ValueError):
    """Malformed or inconsistent record files."""


@dataclass
class RunRecord:
    config: WorldConfig
    rows: int
    states: np.ndarray          # (rows, N, 3): x, y, heading
    sensors: np.ndarray         # (rows, N) uint8
    modes: list                 # per-agent Behavior (static over a record)
    circliness: np.ndarray      # (rows,) float64
    diffusion: np.ndarray       # (rows,) float64
    min_pair: np.ndarray        # (rows,) float64
    n_components: np.ndarray    # (rows,) int32
    colliding_pairs: np.ndarray  # (rows,) int32
    collisions_total: int
    classification: Classification | None = None

    @property
    def n_agents(self) -> int:
        return self.config.n_agents

    def classify(self) -> Classification:
        if self.classification is None:
            self.classification = classify_run(self)
        return self.classification

    @staticmethod
    def from_result(result, world_index: int = 0,
                    classification: Classification | None = None) -> "RunRecord":
        """Build a record from an engine RunResult captured with states."""
        if result.states is None or result.sensors is None:
            raise RecordError("RunResult was captured without record_states")
        world = result.worlds[world_index]
        b = world_index
        return RunRecord(
            config=world.config,
            rows=result.rows,
            states=np.ascontiguousarray(result.states[:, b]),
            sensors=np.ascontiguousarray(result.sensors[:, b]),
            modes=[m.tag for m in world.modes],
            circliness=np.ascontiguousarray(result.circliness[:, b]),
            diffusion=np.ascontiguousarray(result.diffusion[:, b]),
            min_pair=np.ascontiguousarray(result.min_pair[:, b]),
            n_components=np.ascontiguousarray(result.n_components[:, b]),
            colliding_pairs=np.ascontiguousarray(result.colliding_pairs[:, b]),
            collisions_total=int(result.collisions_total[b]),
            classification=classification,
        )


def _header_dict(record: RunRecord) -> dict:
    return {
        "kind": "run_header",
        "format": RECORD_FORMAT,
        "version": RECORD_VERSION,
        "n_agents": record.n_agents,
        "rows": record.rows,
        "dt_s": record.config.dt,
        "seed": record.config.seed,
        "modes": [m.value for m in record.modes],
        "config": record.config.to_json_dict(),
    }


def _footer_dict(record: RunRecord) -> dict:
    cl = record.classification
    return {
        "kind": "run_footer",
        "rows": record.rows,
        "collisions_total": record.collisions_total,
        "label": None if cl is None else cl.label.value,
        "window_rows": None if cl is None else cl.window_rows,
        "circliness_window_mean": None if cl is None
        else float_or_null(cl.circliness_window_mean),
        "diffusion_window_mean": None if cl is None
        else float_or_null(cl.diffusion_window_mean),
        "collisions_in_window": None if cl is None else cl.collisions_in_window,
        "n_components_final": None if cl is None else cl.n_components_final,
    }


def _classification_from_footer(f: dict) -> Classification | None:
    if f.get("label") is None:
        return None
    return Classification(
        label=PhaseLabel(f["label"]),
        window_rows=int(f["window_rows"]),
        circliness_window_mean=null_or_float(f["circliness_window_mean"]),
        diffusion_window_mean=null_or_float(f["diffusion_window_mean"]),
        collisions_in_window=int(f["collisions_in_window"]),
        n_components_final=int(f["n_components_final"]),
    )


def _check_header(h: dict) -> None:
    if h.get("kind") != "run_header" or h.get("format") != RECORD_FORMAT:
        raise RecordError("not a run record (bad header)")
    if h.get("version") != RECORD_VERSION:
        raise RecordError(f"unsupported record version {h.get('version')!r}")


# ---------------------------------------------------------------------------
# JSONL


def write_record_jsonl(record: RunRecord, path: str | Path) -> None:
    lines = [dump_stable_json(_header_dict(record), indent=None)]
    mode_strs = [m.value for m in record.modes]
    for row in range(record.rows):
        agents = []
        for i in range(record.n_agents):
            agents.append([
                i,
                float(record.states[row, i, 0]),
                float(record.states[row, i, 1]),
                float(record.states[row, i, 2]),
                int(record.sensors[row, i]),
                mode_strs[i],
            ])
        d = record.diffusion[row]
        line = {
            "kind": "tick",
            "tick": row,
            "agents": agents,
            "metrics": {
                "circliness": float_or_null(float(record.circliness[row])),
                "diffusion": float_or_null(float(d)),
                "min_pairwise_m": float_or_null(float(record.min_pair[row])),
                "n_components": int(record.n_components[row]),
                "colliding_pairs": int(record.colliding_pairs[row]),
            },
        }
        lines.append(dump_stable_json(line, indent=None))
    lines.append(dump_stable_json(_footer_dict(record), indent=None))
    Path(path).write_text("\n".join(lines) + "\n")


def read_record_jsonl(path: str | Path) -> RunRecord:
    p = Path(path)
    if not p.exists():
        raise RecordError(f"record file not found: {p}")
    lines = p.read_text().splitlines()
    if len(lines) < 2:
        raise RecordError(f"record file {p} is truncated")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise RecordError(f"record header is not valid JSON: {e}") from e
    _check_header(header)
    config = WorldConfig.from_json_dict(header["config"])
    n = config.n_agents
    rows = int(header["rows"])
    if len(lines) != rows + 2:
        raise RecordError(
            f"record file {p} has {len(lines)} lines, expected {rows + 2}")
    states = np.empty((rows, n, 3))
    sensors = np.empty((rows, n), dtype=np.uint8)
    cbar = np.empty(rows)
    delta = np.empty(rows)
    min_pair = np.empty(rows)
    ncomp = np.empty(rows, dtype=np.int32)
    colliding = np.empty(rows, dtype=np.int32)
    modes = [Behavior(m) for m in header["modes"]]
    for row in range(rows):
        try:
            d = json.loads(lines[1 + row])
        except json.JSONDecodeError as e:
            raise RecordError(f"line {row + 2}: invalid JSON: {e}") from e
        if d.get("kind") != "tick" or d.get("tick") != row:
            raise RecordError(f"line {row + 2}: expected tick {row}")
        agents = d["agents"]
        if len(agents) != n:
            raise RecordError(f"tick {row}: expected {n} agents, got {len(agents)}")
        for i, a in enumerate(agents):
            if a[0] != i:
                raise RecordError(f"tick {row}: agent ids out of order")
            states[row, i, 0] = a[1]
            states[row, i, 1] = a[2]
            states[row, i, 2] = a[3]
            sensors[row, i] = a[4]
        m = d["metrics"]
        cbar[row] = null_or_float(m["circliness"])
        delta[row] = null_or_float(m["diffusion"])
        min_pair[row] = null_or_float(m["min_pairwise_m"])
        ncomp[row] = m["n_components"]
        colliding[row] = m["colliding_pairs"]
    footer = json.loads(lines[-1])
    if footer.get("kind") != "run_footer":
        raise RecordError("record footer missing")
    return RunRecord(
        config=config, rows=rows, states=states, sensors=sensors, modes=modes,
        circliness=cbar, diffusion=delta, min_pair=min_pair,
        n_components=ncomp, colliding_pairs=colliding,
        collisions_total=int(footer["collisions_total"]),
        classification=_classification_from_footer(footer),
    )


# ---------------------------------------------------------------------------
# binary


def _row_dtype(n: int) -> np.dtype:
    return np.dtype([
        ("tick", "<u8"),
        ("x", "<f8", (n,)),
        ("y", "<f8", (n,)),
        ("heading", "<f8", (n,)),
        ("sensor", "u1", (n,)),
        ("mode", "u1", (n,)),
        ("circliness", "<f8"),
        ("diffusion", "<f8"),
        ("min_pairwise", "<f8"),
        ("n_components", "<i4"),
        ("colliding_pairs", "<i4"),
    ])


def write_record_binary(record: RunRecord, path: str | Path) -> None:
    n, rows = record.n_agents, record.rows
    header = dump_stable_json(_header_dict(record), indent=None).encode()
    footer = dump_stable_json(_footer_dict(record), indent=None).encode()
    arr = np.zeros(rows, dtype=_row_dtype(n))
    arr["tick"] = np.arange(rows, dtype=np.uint64)
    arr["x"] = record.states[:, :, 0]
    arr["y"] = record.states[:, :, 1]
    arr["heading"] = record.states[:, :, 2]
    arr["sensor"] = record.sensors
    arr["mode"] = np.tile(np.array([MODE_CODE[m] for m in record.modes],
                                   dtype=np.uint8), (rows, 1))
    arr["circliness"] = record.circliness
    arr["diffusion"] = record.diffusion
    arr["min_pairwise"] = record.min_pair
    arr["n_components"] = record.n_components
    arr["colliding_pairs"] = record.colliding_pairs
    with open(path, "wb") as f:
        f.write(BINARY_MAGIC)
        f.write(len(header).to_bytes(4, "little"))
        f.write(header)
        f.write(arr.tobytes())
        f.write(len(footer).to_bytes(4, "little"))
        f.write(footer)
        f.write(BINARY_END)


def read_record_binary(path: str | Path) -> RunRecord:
    p = Path(path)
    if not p.exists():
        raise RecordError(f"record file not found: {p}")
    blob = p.read_bytes()
    if len(blob) < len(BINARY_MAGIC) + 4 or blob[:len(BINARY_MAGIC)] != BINARY_MAGIC:
        raise RecordError(f"{p} is not a binary run record")
    off = len(BINARY_MAGIC)
    hlen = int.from_bytes(blob[off:off + 4], "little")
    off += 4
    try:
        header = json.loads(blob[off:off + hlen])
    except json.JSONDecodeError as e:
        raise RecordError(f"binary record header invalid: {e}") from e
    off += hlen
    _check_header(header)
    config = WorldConfig.from_json_dict(header["config"])
    n, rows = config.n_agents, int(header["rows"])
    dtype = _row_dtype(n)
    body = rows * dtype.itemsize
    if len(blob) < off + body + 4:
        raise RecordError(f"{p} is truncated")
    arr = np.frombuffer(blob[off:off + body], dtype=dtype)
    off += body
    flen = int.from_bytes(blob[off:off + 4], "little")
    off += 4
    footer = json.loads(blob[off:off + flen])
    off += flen
    if blob[off:off + len(BINARY_END)] != BINARY_END:
        raise RecordError(f"{p} is missing its end marker")
    if not np.array_equal(arr["tick"], np.arange(rows, dtype=np.uint64)):
        raise RecordError("binary record rows out of order")
    states = np.stack([arr["x"], arr["y"], arr["heading"]], axis=-1)
    modes = [CODE_MODE[int(c)] for c in arr["mode"][0]] if rows else \
        [Behavior(m) for m in header["modes"]]
    return RunRecord(
        config=config, rows=rows,
        states=np.ascontiguousarray(states),
        sensors=np.ascontiguousarray(arr["sensor"]),
        modes=modes,
        circliness=np.ascontiguousarray(arr["circliness"]),
        diffusion=np.ascontiguousarray(arr["diffusion"]),
        min_pair=np.ascontiguousarray(arr["min_pairwise"]),
        n_components=np.ascontiguousarray(arr["n_components"]),
        colliding_pairs=np.ascontiguousarray(arr["colliding_pairs"]),
        collisions_total=int(footer["collisions_total"]),
        classification=_classification_from_footer(footer),
    )


def read_record(path: str | Path) -> RunRecord:
    """Dispatch on content: binary magic or JSONL header."""
    p = Path(path)
    if not p.exists():
        raise RecordError(f"record file not found: {p}")
    with open(p, "rb") as f:
        head = f.read(len(BINARY_MAGIC))
    if head == BINARY_MAGIC:
        return read_record_binary(p)
    return read_record_jsonl(p)


def records_equal(a: RunRecord, b: RunRecord) -> bool:
    """Bitwise equality of everything that defines a record.

    Byte-level comparison deliberately: NaN == NaN here, and float values
    that differ in the last ulp are unequal.
    """
    def eq(u: np.ndarray, v: np.ndarray) -> bool:
        u = np.ascontiguousarray(u)
        v = np.ascontiguousarray(v)
        return u.dtype == v.dtype and u.shape == v.shape and u.tobytes() == v.tobytes()

    return (a.config.to_json() == b.config.to_json()
            and a.rows == b.rows and a.modes == b.modes
            and a.collisions_total == b.collisions_total
            and eq(a.states, b.states)
            and eq(a.sensors, b.sensors)
            and eq(a.circliness, b.circliness)
            and eq(a.diffusion, b.diffusion)
            and eq(a.min_pair, b.min_pair)
            and eq(a.n_components, b.n_components)
            and eq(a.colliding_pairs, b.colliding_pairs))
