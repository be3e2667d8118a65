"""Binary file formats: interference frame files and weight containers.

Frame file (little-endian)::

    offset  size  field
    0       4     magic b"RFCH"
    4       4     version (uint32, currently 1)
    8       8     frame_len (uint64, complex samples per frame)
    16      8     num_frames (uint64)
    24      ...   num_frames * frame_len interleaved float32 (re, im) pairs

Weight container: a JSON manifest ``<stem>.json`` listing every tensor's
name, shape, dtype and byte offset into the blob ``<stem>.bin``, which holds
the tensors back to back in little-endian order.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mixtures import InterferenceFrame, normalize_power, power

FRAME_MAGIC = b"RFCH"
FRAME_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")
HEADER_SIZE = _HEADER.size  # 24

WEIGHT_FORMAT = "rfsep-weights"
WEIGHT_VERSION = 1


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class FrameFileHeader:
    frame_len: int
    num_frames: int
    version: int = FRAME_VERSION
    magic: bytes = FRAME_MAGIC

    def pack(self) -> bytes:
        return _HEADER.pack(self.magic, self.version, self.frame_len, self.num_frames)

    @classmethod
    def unpack(cls, raw: bytes) -> "FrameFileHeader":
        if len(raw) < HEADER_SIZE:
            raise FormatError(f"file too short for a {HEADER_SIZE}-byte header")
        magic, version, frame_len, num_frames = _HEADER.unpack(raw[:HEADER_SIZE])
        if magic != FRAME_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {FRAME_MAGIC!r}")
        if version != FRAME_VERSION:
            raise FormatError(f"unsupported frame-file version {version}")
        return cls(frame_len, num_frames, version, magic)

    @property
    def file_size(self) -> int:
        return HEADER_SIZE + self.num_frames * self.frame_len * 8


def write_frames(path, frames) -> FrameFileHeader:
    """Write a ``(num_frames, frame_len)`` complex array as float32 pairs."""
    frames = np.atleast_2d(np.asarray(frames))
    header = FrameFileHeader(frame_len=frames.shape[1], num_frames=frames.shape[0])
    data = np.empty(frames.shape + (2,), dtype="<f4")
    data[..., 0] = frames.real
    data[..., 1] = frames.imag
    with open(path, "wb") as fh:
        fh.write(header.pack())
        fh.write(data.tobytes())
    return header


def read_frame_header(path) -> FrameFileHeader:
    with open(path, "rb") as fh:
        return FrameFileHeader.unpack(fh.read(HEADER_SIZE))


def read_frames(path) -> np.ndarray:
    """Frames as a complex64 ``(num_frames, frame_len)`` array."""
    raw = Path(path).read_bytes()
    header = FrameFileHeader.unpack(raw)
    if len(raw) != header.file_size:
        raise FormatError(
            f"{path}: size {len(raw)} does not match header ({header.num_frames} x {header.frame_len} -> {header.file_size})"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE)
    pairs = data.reshape(header.num_frames, header.frame_len, 2)
    return (pairs[..., 0] + 1j * pairs[..., 1]).astype(np.complex64)


def load_interference_frames(path, source_name: str | None = None) -> list[InterferenceFrame]:
    name = source_name or Path(path).stem
    return [
        InterferenceFrame(samples=f.astype(complex), source_name=name, frame_index=i)
        for i, f in enumerate(read_frames(path))
    ]


def ingest_raw_iq(raw_path, frame_len: int, out_path, truncate: bool = False) -> tuple[FrameFileHeader, list[float]]:
    """Convert raw interleaved float32 IQ into a unit-power frame file.

    Returns the header and the per-frame power measured before normalisation.
    """
    raw = np.fromfile(raw_path, dtype="<f4")
    frame_bytes = 8 * frame_len
    n_bytes = raw.size * 4
    if n_bytes % frame_bytes:
        if not truncate:
            raise FormatError(
                f"{raw_path}: {n_bytes} bytes is not a multiple of {frame_bytes} (8 * frame_len); "
                "pass truncate=True to drop the tail"
            )
    num_frames = n_bytes // frame_bytes
    if num_frames == 0:
        raise FormatError(f"{raw_path}: shorter than one frame of {frame_len} samples")
    pairs = raw[: num_frames * frame_len * 2].reshape(num_frames, frame_len, 2).astype(np.float64)
    frames = pairs[..., 0] + 1j * pairs[..., 1]
    powers = []
    out = np.empty_like(frames)
    for i, f in enumerate(frames):
        p = power(f)
        if p == 0:
            raise FormatError(f"frame {i}: zero-power frame")
        powers.append(p)
        out[i] = normalize_power(f)
    return write_frames(out_path, out), powers


def weight_stem(path) -> Path:
    """``model.json`` / ``model.bin`` / ``model`` all name the container ``model``."""
    path = Path(path)
    return path.with_suffix("") if path.suffix in (".json", ".bin") else path


def _weight_paths(path) -> tuple[Path, Path]:
    stem = weight_stem(path)
    return Path(f"{stem}.json"), Path(f"{stem}.bin")


def save_weights(path, tensors: dict[str, np.ndarray], metadata: dict | None = None) -> Path:
    """Write ``<stem>.json`` and ``<stem>.bin``; returns the manifest path."""
    manifest_path, blob_path = _weight_paths(path)
    entries = []
    offset = 0
    chunks = []
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        if arr.dtype not in (np.float32, np.float64):
            raise TypeError(f"{name}: only float32/float64 tensors are supported, got {arr.dtype}")
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        data = np.ascontiguousarray(le).tobytes()
        entries.append(
            {"name": name, "shape": list(arr.shape), "dtype": f"<f{arr.dtype.itemsize}", "offset": offset, "nbytes": len(data)}
        )
        chunks.append(data)
        offset += len(data)
    manifest = {
        "format": WEIGHT_FORMAT,
        "version": WEIGHT_VERSION,
        "blob": blob_path.name,
        "blob_size": offset,
        "tensors": entries,
        "metadata": metadata or {},
    }
    with open(blob_path, "wb") as fh:
        for c in chunks:
            fh.write(c)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path


def load_weights(path) -> tuple[dict[str, np.ndarray], dict]:
    manifest_path, _ = _weight_paths(path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != WEIGHT_FORMAT:
        raise FormatError(f"{manifest_path}: not a weight manifest")
    blob = (manifest_path.parent / manifest["blob"]).read_bytes()
    if len(blob) != manifest["blob_size"]:
        raise FormatError(f"blob size {len(blob)} != manifest blob_size {manifest['blob_size']}")
    spans = sorted((e["offset"], e["offset"] + e["nbytes"], e["name"]) for e in manifest["tensors"])
    for (a0, a1, an), (b0, _, bn) in zip(spans, spans[1:]):
        if b0 < a1:
            raise FormatError(f"tensors {an} and {bn} overlap")
    tensors = {}
    for e in manifest["tensors"]:
        end = e["offset"] + e["nbytes"]
        if e["offset"] < 0 or end > len(blob):
            raise FormatError(f"tensor {e['name']} out of bounds")
        dt = np.dtype(e["dtype"])
        arr = np.frombuffer(blob, dtype=dt, count=e["nbytes"] // dt.itemsize, offset=e["offset"])
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(dt.newbyteorder("="))
    return tensors, manifest.get("metadata", {})


def save_model(path, model, extra: dict | None = None) -> Path:
    from .neural.models import model_config_dict

    meta = {"kind": model.kind, "config": model_config_dict(model)}
    meta.update(extra or {})
    return save_weights(path, model.state_dict(), meta)


def load_model(path):
    from .neural.models import build_model

    tensors, meta = load_weights(path)
    model = build_model(meta["kind"], meta["config"], dtype=next(iter(tensors.values())).dtype)
    model.load_state_dict(tensors)
    return model, meta


def data_root(explicit=None) -> Path:
    """Dataset root: explicit path, else ``$RFSEP_DATA_DIR``, else the working directory."""
    if explicit:
        return Path(explicit)
    env = os.environ.get("RFSEP_DATA_DIR")
    return Path(env) if env else Path.cwd()
