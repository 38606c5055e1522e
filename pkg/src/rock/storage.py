"""File formats: CSV datasets, manifests, and versioned binary containers.

CSV files are UTF-8 with a header row, the ``t`` column first, and float64
round-trip precision (17 significant digits).  Models and field grids can
also be stored in a self-describing binary container: a little-endian
uint32 header length, a JSON header naming the format version and listing
every array (name, dtype, shape), then the raw little-endian array bytes in
header order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError, StorageError
from .kernels import KernelSpec, RffConfig
from .ode import RockModel, Trajectory, TrajectorySet
from .pde import FeatureSpec, FieldGrid, PdeModel
from .test_space import TestBlock

MODEL_FORMAT = "rock-model-v1"
FIELD_FORMAT = "rock-field-v1"

_FLOAT_FMT = "%.17g"


# CSV -------------------------------------------------------------------


def _format_row(values) -> str:
    return ",".join(_FLOAT_FMT % v for v in values)


def write_trajectory_csv(path, ts, xs):
    """Write one trajectory as ``t,x_1,...,x_d`` rows."""
    ts = np.asarray(ts, dtype=float)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    path = Path(path)
    header = "t," + ",".join(f"x_{i + 1}" for i in range(xs.shape[0]))
    lines = [header]
    for j in range(ts.size):
        lines.append(_format_row([ts[j], *xs[:, j]]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_csv_rows(path, expected_width=None):
    path = Path(path)
    if not path.exists():
        raise StorageError(f"file not found: {path}")
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("t,"):
            raise DataError(f"{path}: line 1: header must start with 't,'")
        width = len(header.split(","))
        if expected_width is not None and width != expected_width:
            raise DataError(
                f"{path}: line 1: expected {expected_width} columns, got {width}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != width:
                raise DataError(
                    f"{path}: line {lineno}: expected {width} fields, "
                    f"got {len(parts)}"
                )
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, np.asarray(rows, dtype=float)


def read_trajectory_csv(path):
    """Read a trajectory CSV; returns (ts, xs) with xs of shape (d, m)."""
    _, data = _read_csv_rows(path)
    return data[:, 0], data[:, 1:].T


def write_field_csv(path, grid: FieldGrid):
    """Write a field grid as rows ``t,u(x_1),...,u(x_N)``."""
    path = Path(path)
    header = "t," + ",".join(f"x_{i + 1}" for i in range(grid.xs.size))
    lines = [header]
    for j in range(grid.ts.size):
        lines.append(_format_row([grid.ts[j], *grid.u[j]]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_field_csv(path, xs=None, periodic=True) -> FieldGrid:
    """Read a field CSV.

    The header names the spatial columns positionally, so the coordinates
    come from ``xs`` (or default to a unit-spaced mesh).
    """
    _, data = _read_csv_rows(path)
    n = data.shape[1] - 1
    if xs is None:
        xs = np.arange(n, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if xs.size != n:
        raise DataError(f"xs length {xs.size} does not match {n} columns")
    return FieldGrid(u=data[:, 1:], ts=data[:, 0], xs=xs, periodic=periodic)


# Dataset directories ---------------------------------------------------


def write_dataset(directory, data, manifest: dict | None = None) -> dict:
    """Write a dataset directory: per-trajectory CSVs plus manifest.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = dict(manifest or {})
    if isinstance(data, TrajectorySet):
        files = []
        for i, traj in enumerate(data):
            name = f"traj_{i:04d}.csv"
            write_trajectory_csv(directory / name, traj.ts, traj.xs)
            files.append(name)
        manifest.update(kind="ode", n_trajectories=len(data), d=data.d, files=files)
    elif isinstance(data, FieldGrid):
        write_field_csv(directory / "field.csv", data)
        manifest.update(
            kind="pde",
            files=["field.csv"],
            xs=[float(v) for v in data.xs],
            periodic=bool(data.periodic),
        )
    else:
        raise TypeError(f"cannot store {type(data).__name__}")
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def read_dataset(directory):
    """Read a dataset directory; returns (data, manifest)."""
    directory = Path(directory)
    mpath = directory / "manifest.json"
    if not mpath.exists():
        raise StorageError(f"manifest not found: {mpath}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    kind = manifest.get("kind")
    if kind == "ode":
        trajs = []
        for name in manifest["files"]:
            ts, xs = read_trajectory_csv(directory / name)
            trajs.append(Trajectory(ts=ts, xs=xs))
        return TrajectorySet(tuple(trajs)), manifest
    if kind == "pde":
        grid = read_field_csv(
            directory / manifest["files"][0],
            xs=manifest.get("xs"),
            periodic=manifest.get("periodic", True),
        )
        return grid, manifest
    raise DataError(f"{mpath}: unknown dataset kind {kind!r}")


# Binary container ------------------------------------------------------


def _write_container(path, header: dict, arrays: dict):
    meta = dict(header)
    meta["arrays"] = [
        {"name": name, "dtype": "<f8", "shape": list(arr.shape)}
        for name, arr in arrays.items()
    ]
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_container(path):
    path = Path(path)
    if not path.exists():
        raise StorageError(f"file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < 4:
        raise DataError(f"{path}: truncated container")
    (hlen,) = struct.unpack("<I", raw[:4])
    if len(raw) < 4 + hlen:
        raise DataError(f"{path}: truncated container header")
    try:
        header = json.loads(raw[4 : 4 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: bad container header: {exc}") from None
    offset = 4 + hlen
    arrays = {}
    for entry in header.get("arrays", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise DataError(f"{path}: truncated array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(
            raw, dtype="<f8", count=count, offset=offset
        ).reshape(shape).copy()
        offset += nbytes
    return header, arrays


def _kernel_to_dict(spec: KernelSpec) -> dict:
    out = {"family": spec.family, "scale": spec.scale}
    if spec.rff is not None:
        out["rff"] = {
            "num_features": spec.rff.num_features,
            "period": spec.rff.period,
            "seed": spec.rff.seed,
        }
    return out


def kernel_from_dict(d: dict) -> KernelSpec:
    rff = d.get("rff")
    return KernelSpec(
        family=d["family"],
        scale=float(d["scale"]),
        rff=RffConfig(
            num_features=int(rff["num_features"]),
            period=rff.get("period"),
            seed=int(rff.get("seed", 0)),
        )
        if rff
        else None,
    )


def _features_to_dict(spec: FeatureSpec) -> dict:
    return {
        "kind": spec.kind,
        "max_order": spec.max_order,
        "degree": spec.degree,
        "num_features": spec.num_features,
        "scale": spec.scale,
        "period": spec.period,
        "seed": spec.seed,
    }


def features_from_dict(d: dict) -> FeatureSpec:
    return FeatureSpec(
        kind=d["kind"],
        max_order=int(d["max_order"]),
        degree=int(d.get("degree", 2)),
        num_features=int(d.get("num_features", 200)),
        scale=float(d.get("scale", 1.0)),
        period=d.get("period"),
        seed=int(d.get("seed", 0)),
    )


def save_model(path, model):
    """Serialize a trained model to the versioned binary container."""
    if isinstance(model, RockModel):
        tb = model.test_block
        offsets = np.asarray(tb.block_offsets, dtype=float)
        # per-block qphi/qphid rows stacked as (p, total_samples)
        qphi_rows = np.zeros((tb.p, tb.total_samples))
        qphid_rows = np.zeros((tb.p, tb.total_samples))
        for i, (lo, hi) in enumerate(tb.block_offsets):
            qphi_rows[:, lo:hi] = tb.qphi[tb.row_slice(i), lo:hi]
            qphid_rows[:, lo:hi] = tb.qphid[tb.row_slice(i), lo:hi]
        header = {
            "format": MODEL_FORMAT,
            "kind": "ode",
            "kernel": _kernel_to_dict(model.kernel),
            "lambda": model.lam,
            "p": tb.p,
        }
        arrays = {
            "train_points": model.train_points,
            "coeffs": model.coeffs,
            "qphi_rows": qphi_rows,
            "qphid_rows": qphid_rows,
            "block_offsets": offsets,
        }
    elif isinstance(model, PdeModel):
        header = {
            "format": MODEL_FORMAT,
            "kind": "pde",
            "features": _features_to_dict(model.feature_spec),
            "lambda": model.lam,
            "coarsen": model.coarsen,
            "dx": model.dx,
            "periodic": model.periodic,
            "fd_scheme": model.fd_scheme,
        }
        arrays = {"alpha": model.alpha}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    _write_container(path, header, arrays)


def load_model(path):
    """Load a model container; returns a RockModel or PdeModel."""
    header, arrays = _read_container(path)
    if header.get("format") != MODEL_FORMAT:
        raise DataError(
            f"{path}: expected format {MODEL_FORMAT!r}, got {header.get('format')!r}"
        )
    if header["kind"] == "ode":
        p = int(header["p"])
        offsets = tuple(
            (int(lo), int(hi)) for lo, hi in arrays["block_offsets"]
        )
        total = int(offsets[-1][1]) if offsets else 0
        n = len(offsets)
        qphi = np.zeros((n * p, total))
        qphid = np.zeros((n * p, total))
        for i, (lo, hi) in enumerate(offsets):
            qphi[i * p : (i + 1) * p, lo:hi] = arrays["qphi_rows"][:, lo:hi]
            qphid[i * p : (i + 1) * p, lo:hi] = arrays["qphid_rows"][:, lo:hi]
        tb = TestBlock(qphi=qphi, qphid=qphid, p=p, block_offsets=offsets)
        return RockModel(
            kernel=kernel_from_dict(header["kernel"]),
            lam=float(header["lambda"]),
            train_points=arrays["train_points"],
            test_block=tb,
            coeffs=arrays["coeffs"],
        )
    if header["kind"] == "pde":
        return PdeModel(
            feature_spec=features_from_dict(header["features"]),
            alpha=arrays["alpha"],
            lam=float(header["lambda"]),
            coarsen=int(header["coarsen"]),
            dx=float(header["dx"]),
            periodic=bool(header["periodic"]),
            fd_scheme=int(header.get("fd_scheme", 2)),
        )
    raise DataError(f"{path}: unknown model kind {header.get('kind')!r}")


def save_field(path, grid: FieldGrid):
    """Serialize a field grid to the shared binary container."""
    header = {"format": FIELD_FORMAT, "periodic": bool(grid.periodic)}
    _write_container(path, header, {"ts": grid.ts, "xs": grid.xs, "u": grid.u})


def load_field(path) -> FieldGrid:
    header, arrays = _read_container(path)
    if header.get("format") != FIELD_FORMAT:
        raise DataError(
            f"{path}: expected format {FIELD_FORMAT!r}, got {header.get('format')!r}"
        )
    return FieldGrid(
        u=arrays["u"],
        ts=arrays["ts"],
        xs=arrays["xs"],
        periodic=bool(header["periodic"]),
    )
