"""File formats: key=value configs, binary snapshots, JSON reports, CSV series.

Every writer goes through a temporary file in the destination directory
followed by an atomic rename, so an interrupted run never leaves a torn file.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
import typing
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import spectral as sp
from .errors import ConfigError
from .solver import EnergyLedger, MhdState
from .spectral import Grid, NormSeries

MAGIC = "MHDSNAP1"


# --- atomic writes ----------------------------------------------------------------


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- config files -----------------------------------------------------------------


def _coerce(name: str, raw: str, kind):
    if kind is bool:
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected {kind.__name__}, got {raw!r}") from None


def parse_config(text: str, schema: type, required: tuple[str, ...] = (),
                 extra: dict[str, type] | None = None) -> dict:
    """Parse ``key = value`` lines against the fields of a dataclass.

    Keys are the field names (case-sensitive, since M and m are distinct).
    ``extra`` admits additional typed keys. Unknown or duplicate keys and
    missing required keys raise ConfigError.
    """
    hints = typing.get_type_hints(schema)
    types = {f.name: hints[f.name] for f in fields(schema)}
    types.update(extra or {})
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _coerce(key, raw, types[key])
    missing = [k for k in required if k not in out]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    return out


def read_config(path: str | os.PathLike, schema: type, required: tuple[str, ...] = (),
                extra: dict[str, type] | None = None) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, schema, required, extra)


# --- snapshots --------------------------------------------------------------------


@dataclass
class Snapshot:
    """Real-space samples of named vector fields on a uniform grid."""

    modes: tuple[int, ...]
    time: float
    nu: float
    eta: float
    data: dict[str, np.ndarray]

    @property
    def dim(self) -> int:
        return len(self.modes)

    @property
    def grid(self) -> Grid:
        return Grid(self.modes)

    def field(self, name: str) -> sp.SpectralField:
        return sp.to_spectral(self.data[name], self.grid, divergence_free=True, zero_mean=True)

    def state(self) -> MhdState:
        b = self.field("b") if "b" in self.data else sp.zeros(self.grid, self.dim)
        u = self.field("u") if "u" in self.data else sp.zeros(self.grid, self.dim)
        return MhdState(self.time, u, b)

    @classmethod
    def from_state(cls, state: MhdState, nu: float, eta: float, include_u: bool | None = None) -> "Snapshot":
        if include_u is None:
            include_u = state.u.max_abs() > 0
        data = {}
        if include_u:
            data["u"] = sp.to_physical(state.u)
        data["b"] = sp.to_physical(state.b)
        return cls(tuple(state.grid.modes), float(state.t), float(nu), float(eta), data)


def encode_snapshot(snap: Snapshot) -> bytes:
    if snap.dim not in (2, 3):
        raise ValueError("snapshots are 2-D or 3-D")
    if not snap.data:
        raise ValueError("snapshot has no fields")
    header = "\n".join([
        MAGIC,
        f"dim={snap.dim}",
        "modes=" + ",".join(str(n) for n in snap.modes),
        "fields=" + ",".join(snap.data),
        f"time={snap.time!r}",
        f"nu={snap.nu!r}",
        f"eta={snap.eta!r}",
        "",
        "",
    ])
    expected = (snap.dim,) + tuple(snap.modes)
    parts = [header.encode("ascii")]
    for name, arr in snap.data.items():
        if arr.shape != expected:
            raise ValueError(f"field {name} has shape {arr.shape}, expected {expected}")
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_snapshot(blob: bytes) -> Snapshot:
    lines = []
    pos = 0
    for _ in range(8):
        end = blob.find(b"\n", pos)
        if end < 0:
            raise ValueError("truncated snapshot header")
        lines.append(blob[pos:end].decode("ascii"))
        pos = end + 1
    if lines[0] != MAGIC:
        raise ValueError(f"not a snapshot file (magic {lines[0]!r})")
    if lines[7] != "":
        raise ValueError("snapshot header must end with a blank line")
    kv = {}
    for line, key in zip(lines[1:7], ("dim", "modes", "fields", "time", "nu", "eta")):
        k, _, v = line.partition("=")
        if k != key:
            raise ValueError(f"expected header key {key!r}, got {k!r}")
        kv[k] = v
    dim = int(kv["dim"])
    modes = tuple(int(n) for n in kv["modes"].split(","))
    names = kv["fields"].split(",")
    if len(modes) != dim or dim not in (2, 3):
        raise ValueError("dim and modes disagree")
    if any(n not in ("u", "b") for n in names) or len(set(names)) != len(names):
        raise ValueError(f"bad field list {kv['fields']!r}")
    count = dim * math.prod(modes)
    if len(blob) - pos != 8 * count * len(names):
        raise ValueError(f"payload holds {len(blob) - pos} bytes, expected {8 * count * len(names)}")
    data = {}
    for i, name in enumerate(names):
        chunk = blob[pos + 8 * count * i: pos + 8 * count * (i + 1)]
        data[name] = np.frombuffer(chunk, dtype="<f8").reshape((dim,) + modes).astype(float)
    return Snapshot(modes, float(kv["time"]), float(kv["nu"]), float(kv["eta"]), data)


def write_snapshot(path: str | os.PathLike, snap: Snapshot) -> None:
    atomic_write(path, encode_snapshot(snap))


def read_snapshot(path: str | os.PathLike) -> Snapshot:
    return decode_snapshot(Path(path).read_bytes())


# --- reports and series -----------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def write_report(path: str | os.PathLike, report: dict) -> None:
    atomic_write(path, dumps_report(report).encode())


def read_report(path: str | os.PathLike) -> dict:
    return json.loads(Path(path).read_text())


def _csv_bytes(header: list[str], rows) -> bytes:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue().encode()


def write_norms_csv(path: str | os.PathLike, norms: NormSeries) -> None:
    atomic_write(path, _csv_bytes(["t", "norm_label", "value"], norms.rows()))


def read_norms_csv(path: str | os.PathLike) -> NormSeries:
    grouped: dict[float, dict[str, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader) != ["t", "norm_label", "value"]:
            raise ValueError("norm CSV header must be t,norm_label,value")
        for t, label, value in reader:
            grouped.setdefault(float(t), {})[label] = float(value)
    series = NormSeries()
    for t in sorted(grouped):
        series.append(t, grouped[t])
    return series


LEDGER_HEADER = ["t", "energy", "viscous", "ohmic", "dissipated"]


def write_ledger_csv(path: str | os.PathLike, ledger: EnergyLedger) -> None:
    atomic_write(path, _csv_bytes(LEDGER_HEADER, ledger.rows()))


def read_ledger_csv(path: str | os.PathLike) -> EnergyLedger:
    ledger = EnergyLedger()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader) != LEDGER_HEADER:
            raise ValueError("ledger CSV header must be " + ",".join(LEDGER_HEADER))
        for row in reader:
            t, e, du, db, dis = (float(v) for v in row)
            ledger.times.append(t)
            ledger.energy.append(e)
            ledger.viscous.append(du)
            ledger.ohmic.append(db)
            ledger.dissipated.append(dis)
    return ledger
