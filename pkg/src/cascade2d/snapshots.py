"""Binary snapshot files and integrator checkpoints.

Snapshot format "C2DS", version 1, little-endian throughout: a fixed
66-byte header (magic, format version u16, box size f64, grid n u32, γ ν α
f64, simulation time f64, step count u64, seed i64) followed by the n²
real-space vorticity samples as row-major f64.  Real space rather than
spectral so that other tools can read the payload directly; for band-limited
data the spectral reconstruction is exact.

Checkpoints are a JSON sidecar (trajectory position, timestep state, the
Philox generator state, and the accumulated sample series) next to an .npy
file holding the exact spectral coefficients; together they resume a run
bit-exactly.

All writes go through a temp file in the target directory plus an atomic
rename, so a killed process never leaves a partial file that parses.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .integrator import FlowParams, ResumePoint, RunConfig, RunResult, SimState, Snapshot
from .spectral import SpectralScalarField

__all__ = [
    "SNAPSHOT_MAGIC",
    "SNAPSHOT_VERSION",
    "save_snapshot",
    "load_snapshot",
    "save_checkpoint",
    "load_checkpoint",
    "atomic_write_bytes",
    "atomic_write_text",
]

SNAPSHOT_MAGIC = b"C2DS"
SNAPSHOT_VERSION = 1
CHECKPOINT_VERSION = 1

_HEADER = struct.Struct("<4sHdIddddQq")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write bytes so the path either has the old content or all of the new."""
    target = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=target.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, target)
    except BaseException:
        os.unlink(tmp_name)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def save_snapshot(snapshot: Snapshot, path) -> None:
    """Serialize one emitted sample; see the module docstring for layout."""
    payload = np.ascontiguousarray(snapshot.payload, dtype="<f8")
    n = payload.shape[0]
    if payload.shape != (n, n):
        raise ValueError(f"payload must be square, got {payload.shape}")
    header = _HEADER.pack(
        SNAPSHOT_MAGIC,
        SNAPSHOT_VERSION,
        snapshot.box_size,
        n,
        snapshot.params.gamma,
        snapshot.params.nu,
        snapshot.params.alpha,
        snapshot.t,
        snapshot.step_count,
        snapshot.seed,
    )
    atomic_write_bytes(path, header + payload.tobytes())


def load_snapshot(path) -> Snapshot:
    """Read a C2DS file back into a Snapshot, bit-exactly.

    Raises:
        ValueError: wrong magic, unsupported version, or truncated payload.
        FileNotFoundError: missing file.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, box_size, n, gamma, nu, alpha, t, step_count, seed = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a C2DS snapshot file (magic {magic!r})")
    if version != SNAPSHOT_VERSION:
        raise ValueError(
            f"{path}: unsupported snapshot format version {version} "
            f"(this build reads version {SNAPSHOT_VERSION})"
        )
    expected = _HEADER.size + 8 * n * n
    if len(data) != expected:
        raise ValueError(
            f"{path}: truncated payload ({len(data)} bytes, expected {expected})"
        )
    payload = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(n, n).copy()
    return Snapshot(
        payload=payload,
        box_size=box_size,
        t=t,
        step_count=step_count,
        params=FlowParams(nu=nu, alpha=alpha, gamma=gamma),
        seed=seed,
    )


def _rng_state_to_json(state: dict) -> dict:
    if state.get("bit_generator") != "Philox":
        raise ValueError(
            f"can only checkpoint Philox generator state, got {state.get('bit_generator')!r}"
        )
    inner = state["state"]
    return {
        "bit_generator": "Philox",
        "counter": [int(x) for x in inner["counter"]],
        "key": [int(x) for x in inner["key"]],
        "buffer": [int(x) for x in state["buffer"]],
        "buffer_pos": int(state["buffer_pos"]),
        "has_uint32": int(state["has_uint32"]),
        "uinteger": int(state["uinteger"]),
    }


def _rng_state_from_json(doc: dict) -> dict:
    return {
        "bit_generator": "Philox",
        "state": {
            "counter": np.array(doc["counter"], dtype=np.uint64),
            "key": np.array(doc["key"], dtype=np.uint64),
        },
        "buffer": np.array(doc["buffer"], dtype=np.uint64),
        "buffer_pos": int(doc["buffer_pos"]),
        "has_uint32": int(doc["has_uint32"]),
        "uinteger": int(doc["uinteger"]),
    }


def _coeffs_path(path) -> Path:
    return Path(path).with_suffix(".npy")


def save_checkpoint(result: RunResult, config: RunConfig, path) -> None:
    """Persist everything run() needs to continue this trajectory.

    Writes the JSON document at ``path`` and the spectral coefficients at
    the same name with an .npy suffix.  The coefficients go first so an
    interrupted save never leaves a JSON file pointing at stale state.
    """
    target = Path(path)
    coeffs = result.final.omega.coeffs
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, suffix=".npy")
    try:
        with os.fdopen(fd, "wb") as handle:
            np.save(handle, coeffs)
        os.replace(tmp_name, _coeffs_path(target))
    except BaseException:
        os.unlink(tmp_name)
        raise
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "lambda": config.box_size,
        "grid_n": config.n,
        "nu": config.nu,
        "alpha": config.alpha,
        "gamma": config.gamma,
        "seed": config.seed,
        "t": result.final.t,
        "step_count": result.final.step_count,
        "dt": result.dt,
        "next_emit": result.next_emit,
        "since_adapt": result.since_adapt,
        "rng_state": _rng_state_to_json(result.rng_state),
        "sample_times": result.sample_times,
        "sample_series": result.sample_series,
    }
    atomic_write_text(target, json.dumps(doc, indent=2))


def load_checkpoint(path, config: RunConfig) -> ResumePoint:
    """Rebuild a ResumePoint; the config must match the checkpoint header.

    Raises:
        ValueError: version mismatch or checkpoint/config disagreement.
        FileNotFoundError: missing JSON or coefficient file.
    """
    target = Path(path)
    doc = json.loads(target.read_text())
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(
            f"{path}: unsupported checkpoint version {version!r} "
            f"(this build reads version {CHECKPOINT_VERSION})"
        )
    recorded = {
        "lambda": config.box_size,
        "grid_n": config.n,
        "nu": config.nu,
        "alpha": config.alpha,
        "gamma": config.gamma,
        "seed": config.seed,
    }
    mismatched = [
        f"{key} (checkpoint {doc[key]!r}, config {value!r})"
        for key, value in recorded.items()
        if doc[key] != value
    ]
    if mismatched:
        raise ValueError(f"{path}: checkpoint does not match the config: " + ", ".join(mismatched))
    coeffs = np.load(_coeffs_path(target))
    expected = (config.n, config.n // 2 + 1)
    if coeffs.shape != expected:
        raise ValueError(
            f"{_coeffs_path(target)}: coefficient array has shape {coeffs.shape}, "
            f"expected {expected}"
        )
    # Deliberately no layout normalization here: the running state carries
    # last-bit asymmetries in the ky=0 column, and symmetrizing them away
    # would break the resumed-equals-uninterrupted bitwise guarantee.
    omega = SpectralScalarField(config.grid, coeffs)
    state = SimState(
        omega=omega,
        t=doc["t"],
        params=config.params,
        step_count=doc["step_count"],
    )
    return ResumePoint(
        state=state,
        rng_state=_rng_state_from_json(doc["rng_state"]),
        dt=doc["dt"],
        next_emit=doc["next_emit"],
        since_adapt=doc["since_adapt"],
        sample_times=list(doc["sample_times"]),
        sample_series={key: list(val) for key, val in doc["sample_series"].items()},
    )
