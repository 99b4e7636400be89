"""16-bit portable graymap/pixmap and packed bitmap IO.

Intensities map affinely onto ``0..65535``: ``lo`` goes to 0 and ``hi`` to
65535, values outside the range are clipped.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

MAXVAL = 65535
DEFAULT_RANGE = (-2.0, 2.0)


def quantize(img: np.ndarray, lo: float, hi: float) -> np.ndarray:
    scaled = (np.asarray(img, dtype=np.float64) - lo) / (hi - lo) * MAXVAL
    return np.clip(np.rint(scaled), 0, MAXVAL).astype(">u2")


def dequantize(q: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return lo + q.astype(np.float64) / MAXVAL * (hi - lo)


def write_pnm(path: str | Path, img: np.ndarray, lo: float = DEFAULT_RANGE[0], hi: float = DEFAULT_RANGE[1]) -> Path:
    """Write ``(H, W)``/``(H, W, 1)`` as P5 or ``(H, W, 3)`` as P6."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot write image of shape {img.shape} as PGM/PPM")
    h, w = img.shape[:2]
    path = Path(path)
    with path.open("wb") as f:
        f.write(b"%s\n%d %d\n%d\n" % (magic, w, h, MAXVAL))
        f.write(quantize(img, lo, hi).tobytes())
    return path


def _read_header(data: bytes, n_fields: int) -> tuple[list[bytes], int]:
    """Split the whitespace-separated header fields, skipping ``#`` comments."""
    fields = []
    i = 0
    while len(fields) < n_fields:
        while data[i : i + 1].isspace():
            i += 1
        if data[i : i + 1] == b"#":
            while data[i : i + 1] not in (b"\n", b""):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        fields.append(data[i:j])
        i = j
    # Exactly one whitespace byte separates the header from the raster.
    return fields, i + 1


def read_pnm(path: str | Path, lo: float = DEFAULT_RANGE[0], hi: float = DEFAULT_RANGE[1]) -> np.ndarray:
    """Read a binary P5/P6 file back to float intensities, ``(H, W)`` or ``(H, W, 3)``."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: not a binary PGM/PPM file")
    (_, w, h, maxval), offset = _read_header(data, 4)
    w, h, maxval = int(w), int(h), int(maxval)
    channels = 3 if magic == b"P6" else 1
    dtype = ">u2" if maxval > 255 else "u1"
    raster = np.frombuffer(data, dtype=dtype, count=w * h * channels, offset=offset)
    raster = raster.reshape((h, w, channels) if channels == 3 else (h, w))
    if maxval != MAXVAL:
        raster = raster.astype(np.float64) * (MAXVAL / maxval)
    return dequantize(np.asarray(raster), lo, hi)


def write_pbm(path: str | Path, bits: np.ndarray) -> Path:
    """Write a boolean ``(H, W)`` map as a packed P4 bitmap (True -> 1, drawn black)."""
    bits = np.asarray(bits, dtype=bool)
    if bits.ndim != 2:
        raise ValueError("bitmap must be 2-D")
    h, w = bits.shape
    path = Path(path)
    with path.open("wb") as f:
        f.write(b"P4\n%d %d\n" % (w, h))
        f.write(np.packbits(bits, axis=1).tobytes())
    return path


def read_pbm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P4":
        raise ValueError(f"{path}: not a binary PBM file")
    (_, w, h), offset = _read_header(data, 3)
    w, h = int(w), int(h)
    row_bytes = (w + 7) // 8
    packed = np.frombuffer(data, dtype=np.uint8, count=row_bytes * h, offset=offset).reshape(h, row_bytes)
    return np.unpackbits(packed, axis=1)[:, :w].astype(bool)


def contact_sheet(tiles: list[list[np.ndarray]], gap: int = 1, fill: float = 0.0) -> np.ndarray:
    """Arrange equally shaped ``(H, W, C)`` tiles in a grid separated by ``gap`` pixels."""
    if not tiles or not tiles[0]:
        raise ValueError("contact sheet needs at least one tile")
    h, w, c = tiles[0][0].shape
    rows, cols = len(tiles), max(len(r) for r in tiles)
    sheet = np.full((rows * h + (rows - 1) * gap, cols * w + (cols - 1) * gap, c), fill)
    for i, row in enumerate(tiles):
        for j, tile in enumerate(row):
            y, x = i * (h + gap), j * (w + gap)
            sheet[y : y + h, x : x + w] = tile
    return sheet
