"""Readers and writers for PGM (P5), PPM (P6), and PFM image files.

PGM/PPM are 8-bit with intensities mapped linearly between [0, 1] and
[0, 255]. PFM is 32-bit float, written little-endian with rows stored
bottom-to-top per convention; the float payload round-trips bit-exactly.
"""

from __future__ import annotations

import os

import numpy as np

from .grid import ColorImage, ScalarGrid


def _read_token(f) -> bytes:
    """Next whitespace-delimited header token, skipping '#' comments."""
    tok = b""
    while True:
        c = f.read(1)
        if c == b"":
            raise ValueError("unexpected end of file in header")
        if c == b"#":
            while c not in (b"\n", b""):
                c = f.read(1)
            continue
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def _read_netpbm(path, expected_magic: str):
    with open(path, "rb") as f:
        magic = _read_token(f).decode("ascii")
        if magic != expected_magic:
            raise ValueError(f"{path}: expected {expected_magic} file, found magic {magic!r}")
        width = int(_read_token(f))
        height = int(_read_token(f))
        maxval = int(_read_token(f))
        if maxval != 255:
            raise ValueError(f"{path}: only 8-bit files are supported (maxval {maxval})")
        nch = 3 if expected_magic == "P6" else 1
        raw = f.read(width * height * nch)
    if len(raw) != width * height * nch:
        raise ValueError(f"{path}: truncated pixel data")
    data = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, nch)
    return data.astype(np.float64) / 255.0


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values * 255.0), 0, 255).astype(np.uint8)


def read_pgm(path) -> ScalarGrid:
    data = _read_netpbm(path, "P5")
    return ScalarGrid(data[..., 0])


def write_pgm(path, grid: ScalarGrid) -> None:
    """Write a [0, 1] scalar grid as 8-bit grayscale."""
    payload = _quantize(grid.values)
    with open(path, "wb") as f:
        f.write(f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii"))
        f.write(payload.tobytes())


def read_ppm(path) -> ColorImage:
    data = _read_netpbm(path, "P6")
    return ColorImage.from_array(data)


def write_ppm(path, img: ColorImage) -> None:
    payload = _quantize(img.stacked())
    with open(path, "wb") as f:
        f.write(f"P6\n{img.width} {img.height}\n255\n".encode("ascii"))
        f.write(payload.tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into an (H, W) or (H, W, 3) float32 array, row 0 on top."""
    with open(path, "rb") as f:
        magic = _read_token(f).decode("ascii")
        if magic not in ("Pf", "PF"):
            raise ValueError(f"{path}: not a PFM file (magic {magic!r})")
        width = int(_read_token(f))
        height = int(_read_token(f))
        scale = float(_read_token(f))
        nch = 3 if magic == "PF" else 1
        count = width * height * nch
        dtype = "<f4" if scale < 0 else ">f4"
        raw = f.read(count * 4)
    if len(raw) != count * 4:
        raise ValueError(f"{path}: truncated pixel data")
    data = np.frombuffer(raw, dtype=dtype).astype(np.float32)
    data = data.reshape(height, width, nch)
    data = data[::-1, :, :]  # stored bottom-to-top
    return data[..., 0] if nch == 1 else data


def write_pfm(path, values: np.ndarray) -> None:
    """Write an (H, W) or (H, W, 3) array as little-endian float32 PFM."""
    values = np.asarray(values)
    if values.ndim == 2:
        magic, arr = "Pf", values[:, :, None]
    elif values.ndim == 3 and values.shape[2] == 3:
        magic, arr = "PF", values
    else:
        raise ValueError(f"expected (H, W) or (H, W, 3) data, got shape {values.shape}")
    height, width = arr.shape[:2]
    payload = arr[::-1, :, :].astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(f"{magic}\n{width} {height}\n-1.0\n".encode("ascii"))
        f.write(payload)


def read_mask_pfm(path) -> np.ndarray:
    """Read a 0/1-encoded PFM mask as a boolean array."""
    return read_pfm(path) > 0.5


def write_mask_pfm(path, mask: np.ndarray) -> None:
    write_pfm(path, np.asarray(mask, dtype=np.float32))


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
