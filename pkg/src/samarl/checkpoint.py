"""Checkpoint serialization: plain-text manifest plus one raw float32 blob.

A checkpoint is a directory holding ``manifest.txt`` and ``params.bin``. The
manifest records run metadata and, per tensor, its name, shape, dtype, and
byte offset into the blob. The blob is the concatenation of all tensors in
manifest order as little-endian IEEE-754 single precision, C order. Saving
and re-loading is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MANIFEST_FILE = "manifest.txt"
BLOB_FILE = "params.bin"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


@dataclass
class CheckpointManifest:
    version: int
    algo: str
    scenario: str
    agents: int
    episode: int
    entries: list[tuple[str, tuple[int, ...], str, int]]


def _shape_str(shape: tuple[int, ...]) -> str:
    return "x".join(str(d) for d in shape) if shape else "scalar"


def _parse_shape(text: str) -> tuple[int, ...]:
    if text == "scalar":
        return ()
    return tuple(int(d) for d in text.split("x"))


def save_checkpoint(directory, named_tensors, *, algo: str, scenario: str,
                    agents: int, episode: int) -> Path:
    """Write ``named_tensors`` (iterable of (name, tensor-or-array)) to ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    entries = []
    chunks = []
    offset = 0
    for name, tensor in named_tensors:
        arr = np.asarray(getattr(tensor, "data", tensor))
        if arr.dtype != np.float32:
            raise CheckpointError(
                f"checkpoint blob is single precision; tensor '{name}' has dtype {arr.dtype}")
        if " " in name:
            raise CheckpointError(f"tensor name may not contain spaces: '{name}'")
        raw = np.ascontiguousarray(arr).astype("<f4", copy=False).tobytes()
        entries.append((name, arr.shape, "float32", offset))
        chunks.append(raw)
        offset += len(raw)

    lines = [
        f"format-version {FORMAT_VERSION}",
        f"algo {algo}",
        f"scenario {scenario}",
        f"agents {agents}",
        f"episode {episode}",
    ]
    for name, shape, dtype, off in entries:
        lines.append(f"tensor {name} {_shape_str(shape)} {dtype} {off}")
    (directory / MANIFEST_FILE).write_text("\n".join(lines) + "\n")
    (directory / BLOB_FILE).write_bytes(b"".join(chunks))
    return directory


def load_checkpoint(directory) -> tuple[CheckpointManifest, dict[str, np.ndarray]]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    blob_path = directory / BLOB_FILE
    if not manifest_path.exists() or not blob_path.exists():
        raise CheckpointError(f"no checkpoint at {directory}")

    header: dict[str, str] = {}
    entries: list[tuple[str, tuple[int, ...], str, int]] = []
    for lineno, line in enumerate(manifest_path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "tensor":
            if len(parts) != 5:
                raise CheckpointError(f"malformed tensor line {lineno}: '{line}'")
            entries.append((parts[1], _parse_shape(parts[2]), parts[3], int(parts[4])))
        elif len(parts) == 2:
            header[parts[0]] = parts[1]
        else:
            raise CheckpointError(f"malformed manifest line {lineno}: '{line}'")

    version = int(header.get("format-version", "-1"))
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}")

    blob = blob_path.read_bytes()
    tensors: dict[str, np.ndarray] = {}
    for name, shape, dtype, off in entries:
        if dtype != "float32":
            raise CheckpointError(f"tensor '{name}' has unsupported dtype {dtype}")
        count = int(np.prod(shape)) if shape else 1
        end = off + 4 * count
        if end > len(blob):
            raise CheckpointError(
                f"tensor '{name}' extends past blob end ({end} > {len(blob)})")
        if name in tensors:
            raise CheckpointError(f"duplicate tensor name '{name}'")
        flat = np.frombuffer(blob, dtype="<f4", count=count, offset=off)
        tensors[name] = flat.reshape(shape).copy()

    manifest = CheckpointManifest(
        version=version,
        algo=header.get("algo", ""),
        scenario=header.get("scenario", ""),
        agents=int(header.get("agents", "0")),
        episode=int(header.get("episode", "0")),
        entries=entries,
    )
    return manifest, tensors


def restore_into(net, tensors: dict[str, np.ndarray], prefix: str = "") -> None:
    """Copy checkpoint arrays into a network's parameters by name."""
    for name, param in net.named_parameters():
        key = prefix + name
        if key not in tensors:
            raise CheckpointError(f"checkpoint is missing tensor '{key}'")
        arr = tensors[key]
        if arr.shape != param.data.shape:
            raise CheckpointError(
                f"tensor '{key}' shape {arr.shape} does not match parameter "
                f"shape {param.data.shape}")
        param.data[...] = arr.astype(param.data.dtype)
