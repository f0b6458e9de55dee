"""Frame-sequence and tensor persistence.

Frame sequences are numpy arrays of shape ``(height, width, frames)`` with
intensities in ``[0, 1]``. On disk they are directories of lossless
grayscale images named ``frame_0000.png`` (or ``.pgm``), one per frame.

Tensors (shutters, filter banks, dictionaries, feature maps, coded images)
use a small binary container::

    offset  size        field
    0       4           magic b"CVT1"
    4       4           dtype code, uint32 LE (0=float32, 1=float64, 2=uint8)
    8       4           ndim, uint32 LE
    12      8*ndim      dims, uint64 LE
    ...     prod*size   payload, C order, little-endian
"""

from __future__ import annotations

import os
import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import FormatError, IngestError, IoError, ParamError

MAGIC = b"CVT1"
DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1")}
_CODE_OF = {np.dtype(v).str: k for k, v in DTYPE_CODES.items()}
_HEADER = struct.Struct("<4sII")

LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)
_FRAME_RE = re.compile(r"^frame_(\d+)\.(png|pgm)$", re.IGNORECASE)


# --------------------------------------------------------------------------
# tensor container
# --------------------------------------------------------------------------

def write_tensor(path, tensor) -> None:
    arr = np.asarray(tensor)
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8)
    key = arr.dtype.newbyteorder("<").str if arr.dtype.kind == "f" else arr.dtype.str
    if key not in _CODE_OF:
        raise FormatError(f"unsupported tensor dtype {arr.dtype}")
    code = _CODE_OF[key]
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ParamError("tensor contains non-finite values")
    payload = np.ascontiguousarray(arr, dtype=DTYPE_CODES[code]).tobytes()
    header = _HEADER.pack(MAGIC, code, arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_tensor(path) -> np.ndarray:
    """Read a tensor file; the shape of the returned array carries the dims."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, code, ndim = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if code not in DTYPE_CODES:
        raise FormatError(f"{path}: unknown dtype code {code}")
    off = _HEADER.size
    if len(raw) < off + 8 * ndim:
        raise FormatError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{ndim}Q", raw, off)
    off += 8 * ndim
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(dims, dtype=np.uint64)) * dtype.itemsize
    if len(raw) - off != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - off} bytes, header implies {expected}"
        )
    return np.frombuffer(raw, dtype=dtype, offset=off).reshape(dims).copy()


def payload_nbytes(dims, code: int) -> int:
    return int(np.prod(dims)) * DTYPE_CODES[code].itemsize


# --------------------------------------------------------------------------
# image files
# --------------------------------------------------------------------------

def _read_pgm(path: Path) -> tuple[np.ndarray, int]:
    data = path.read_bytes()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval separated by whitespace and comments
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise IngestError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P5":
        raise IngestError(f"{path}: only binary PGM (P5) is supported")
    width, height, maxval = (int(t) for t in tokens[1:])
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    count = width * height
    if len(data) - pos < count * dtype.itemsize:
        raise IngestError(f"{path}: truncated PGM payload")
    img = np.frombuffer(data, dtype=dtype, count=count, offset=pos).reshape(height, width)
    return img.astype(np.float64), maxval


def _write_pgm(path: Path, codes: np.ndarray, maxval: int) -> None:
    h, w = codes.shape
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(codes.astype(dtype).tobytes())


def read_image(path) -> np.ndarray:
    """Read one grayscale (or color, converted by luminance) image into [0, 1]."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        img, maxval = _read_pgm(path)
        return img / maxval
    try:
        with Image.open(path) as im:
            mode = im.mode
            arr = np.asarray(im)
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    if mode in ("RGB", "RGBA"):
        rgb = arr[..., :3].astype(np.float64) / 255.0
        return rgb @ np.asarray(LUMA_WEIGHTS)
    if mode in ("L", "P"):
        return arr.astype(np.float64) / 255.0
    if mode.startswith("I;16") or mode == "I":
        return arr.astype(np.float64) / 65535.0
    raise IngestError(f"{path}: unsupported image mode {mode}")


def quantize(values, bit_depth: int) -> np.ndarray:
    """Clamp to [0, 1] and quantize with round-half-up."""
    if bit_depth not in (8, 16):
        raise ParamError(f"bit depth must be 8 or 16, got {bit_depth}")
    maxcode = (1 << bit_depth) - 1
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    codes = np.floor(v * maxcode + 0.5)
    return codes.astype(np.uint8 if bit_depth == 8 else np.uint16)


def write_image(path, image, bit_depth: int = 8) -> None:
    path = Path(path)
    codes = quantize(image, bit_depth)
    try:
        if path.suffix.lower() == ".pgm":
            _write_pgm(path, codes, (1 << bit_depth) - 1)
        else:
            Image.fromarray(codes).save(path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# frame directories
# --------------------------------------------------------------------------

def list_frame_files(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"{directory} is not a directory")
    indexed = []
    for entry in directory.iterdir():
        m = _FRAME_RE.match(entry.name)
        if m:
            indexed.append((int(m.group(1)), entry))
    indexed.sort()
    return [p for _, p in indexed]


def load_frames(directory, expected_count: int | None = None) -> np.ndarray:
    """Load ``frame_XXXX`` images from ``directory`` as an (H, W, T) volume."""
    files = list_frame_files(directory)
    if not files:
        raise IngestError(f"no frame_XXXX.png/.pgm files in {directory}")
    if expected_count is not None and len(files) < expected_count:
        raise IngestError(
            f"{directory}: found {len(files)} frames, expected {expected_count}"
        )
    frames = []
    for f in files:
        img = read_image(f)
        if frames and img.shape != frames[0].shape:
            raise IngestError(
                f"{f.name} has shape {img.shape}, expected {frames[0].shape}"
            )
        frames.append(img)
    return np.clip(np.stack(frames, axis=-1), 0.0, 1.0)


def save_frames(seq, directory, bit_depth: int = 8, fmt: str = "png") -> list[Path]:
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 3:
        raise ParamError(f"frame sequence must be (H, W, T), got shape {seq.shape}")
    directory = Path(directory)
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {directory}: {exc}") from exc
    paths = []
    for t in range(seq.shape[2]):
        p = directory / f"frame_{t:04d}.{fmt}"
        write_image(p, seq[:, :, t], bit_depth)
        paths.append(p)
    return paths
