"""Raster ingestion and emission.

The grid container is a minimal binary format: magic "PTFG", a uint16
version, a dtype code (0 = little-endian float32, 1 = 8-bit boolean), a
rank byte, rank uint32 little-endian dims, then the row-major payload.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .model import FireState, Landscape

MAGIC = b"PTFG"
FORMAT_VERSION = 1
_DTYPE_FLOAT32 = 0
_DTYPE_BOOL = 1

PathLike = Union[str, Path]


class GridFileError(ValueError):
    """Base error for grid container problems."""


class BadMagicError(GridFileError):
    pass


class TruncatedPayloadError(GridFileError):
    pass


class UnsupportedDtypeError(GridFileError):
    pass


def write_grid(grid: np.ndarray, path: PathLike) -> None:
    """Serialize a float or boolean array (rank >= 1). Floats are stored
    as little-endian float32, booleans as one byte per cell."""
    arr = np.asarray(grid)
    if arr.ndim < 1:
        raise GridFileError("grid must have rank >= 1")
    if arr.dtype == bool:
        code = _DTYPE_BOOL
        payload = arr.astype(np.uint8).tobytes(order="C")
    elif np.issubdtype(arr.dtype, np.floating) or np.issubdtype(arr.dtype, np.integer):
        code = _DTYPE_FLOAT32
        payload = arr.astype("<f4").tobytes(order="C")
    else:
        raise UnsupportedDtypeError(f"cannot store dtype {arr.dtype}")
    header = MAGIC + struct.pack(
        "<HBB", FORMAT_VERSION, code, arr.ndim
    ) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + payload)


def read_grid(path: PathLike) -> np.ndarray:
    """Read a grid file back; bit-exact inverse of write_grid."""
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a PTFG grid file")
    version, code, rank = struct.unpack("<HBB", blob[4:8])
    if version != FORMAT_VERSION:
        raise GridFileError(f"{path}: unsupported version {version}")
    if code not in (_DTYPE_FLOAT32, _DTYPE_BOOL):
        raise UnsupportedDtypeError(f"{path}: unknown dtype code {code}")
    header_end = 8 + 4 * rank
    if len(blob) < header_end:
        raise TruncatedPayloadError(f"{path}: truncated header")
    dims = struct.unpack(f"<{rank}I", blob[8:header_end])
    count = 1
    for d in dims:
        count *= d
    itemsize = 4 if code == _DTYPE_FLOAT32 else 1
    expected = count * itemsize
    payload = blob[header_end:]
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload {len(payload)} bytes, expected {expected}"
        )
    if code == _DTYPE_FLOAT32:
        return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims).astype(bool)


def slope_from_altitude(
    altitude: np.ndarray, cell_side: float, slope_sign: str = "downhill-positive"
) -> np.ndarray:
    """Per-neighbor slope grid (degrees) from an altitude raster.

    Entry [r, c, 1+dr, 1+dc] = degrees(arctan((E[r,c] - E[r+dr,c+dc]) /
    (k * cell_side))), k = sqrt(2) on diagonals. Boundary neighbors and
    the center are 0. Antisymmetry across shared edges is exact by
    construction (each pair computed once, negated for the reverse).

    The default orientation follows the altitude-difference formula
    literally: positive toward a LOWER neighbor, so downhill spread is
    accelerated by the exponential slope factor. Classical fire behavior
    is the opposite (upslope runs faster); slope_sign="uphill-positive"
    negates the grid for that convention.
    """
    e = np.asarray(altitude, dtype=np.float64)
    if e.ndim != 2:
        raise ValueError(f"altitude must be 2-D, got shape {e.shape}")
    if not np.all(np.isfinite(e)):
        raise ValueError("altitude contains non-finite values")
    if cell_side <= 0:
        raise ValueError("cell_side must be > 0")
    if slope_sign not in ("downhill-positive", "uphill-positive"):
        raise ValueError(f"unknown slope_sign {slope_sign!r}")

    h, w = e.shape
    out = np.zeros((h, w, 3, 3), dtype=np.float64)
    # Forward half of the offsets; the mirrored entries are exact negations.
    for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
        k = math.sqrt(2.0) if dr != 0 and dc != 0 else 1.0
        src_r = slice(max(-dr, 0), h - max(dr, 0))
        src_c = slice(max(-dc, 0), w - max(dc, 0))
        dst_r = slice(max(dr, 0), h + min(dr, 0))
        dst_c = slice(max(dc, 0), w + min(dc, 0))
        theta = np.degrees(np.arctan((e[src_r, src_c] - e[dst_r, dst_c]) / (k * cell_side)))
        out[src_r, src_c, 1 + dr, 1 + dc] = theta
        out[dst_r, dst_c, 1 - dr, 1 - dc] = -theta
    if slope_sign == "uphill-positive":
        out = -out
    return out


def wind_from_uv(u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Wind (speed, direction) from eastward/northward components.

    Direction is degrees from East counterclockwise, in [0, 360)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    speed = np.hypot(u, v)
    direction = np.degrees(np.arctan2(v, u)) % 360.0
    return speed, direction


def pad_nonburnable(land: Landscape, pad: int) -> Landscape:
    """Add a border of permanently non-burnable cells (factor -1) to avoid
    edge effects; wind and slope in the border are zero."""
    if pad < 0:
        raise ValueError("pad must be >= 0")
    if pad == 0:
        return land

    def pad2(grid, value):
        return np.pad(grid, pad, constant_values=value)

    slope = np.pad(
        land.slope, ((pad, pad), (pad, pad), (0, 0), (0, 0)), constant_values=0.0
    )
    return Landscape(
        wind_speed=pad2(land.wind_speed, 0.0),
        wind_direction=pad2(land.wind_direction, 0.0),
        slope=slope,
        canopy=pad2(land.canopy, -1.0),
        density=pad2(land.density, -1.0),
        cell_side=land.cell_side,
    )


# Landscape bundle: one grid file per raster plus a key=value manifest.
_BUNDLE_GRIDS = ("wind_speed", "wind_direction", "slope", "canopy", "density")


def write_manifest(entries: Dict[str, str], path: PathLike) -> None:
    lines = [f"{key}={value}" for key, value in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: PathLike) -> Dict[str, str]:
    entries: Dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def write_landscape(land: Landscape, directory: PathLike) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name in _BUNDLE_GRIDS:
        write_grid(getattr(land, name), out / f"{name}.ptfg")
    write_manifest({"cell_side": repr(land.cell_side)}, out / "manifest.txt")


def read_landscape(directory: PathLike) -> Landscape:
    src = Path(directory)
    grids = {}
    for name in _BUNDLE_GRIDS:
        path = src / f"{name}.ptfg"
        if not path.exists():
            raise FileNotFoundError(f"landscape bundle missing grid: {path}")
        grids[name] = read_grid(path).astype(np.float64)
    manifest = read_manifest(src / "manifest.txt") if (src / "manifest.txt").exists() else {}
    cell_side = float(manifest.get("cell_side", 30.0))
    return Landscape(cell_side=cell_side, **grids)


# Snapshot rendering: burnable background shades from purple (sparse
# vegetation, gentle slopes) to green (dense vegetation, steep slopes);
# burning cells are pure red, burned cells pure black.
_COLOR_BURNING = (255, 0, 0)
_COLOR_BURNED = (0, 0, 0)
_COLOR_SPARSE = np.array((150, 40, 170), dtype=np.float64)
_COLOR_DENSE = np.array((40, 170, 60), dtype=np.float64)


def render_state(state: FireState, land: Landscape) -> np.ndarray:
    """(H, W, 3) uint8 image of the state over the landscape."""
    veg = np.clip(((land.canopy + land.density) / 2.0 + 1.0) / 2.0, 0.0, 1.0)
    steep = np.clip(np.mean(np.abs(land.slope), axis=(2, 3)) / 45.0, 0.0, 1.0)
    mix = np.clip(0.5 * veg + 0.5 * steep, 0.0, 1.0)[..., None]
    img = np.clip(_COLOR_SPARSE + mix * (_COLOR_DENSE - _COLOR_SPARSE), 1, 254)
    img = img.astype(np.uint8)
    img[state.burned] = _COLOR_BURNED
    img[state.burning] = _COLOR_BURNING
    return img


def write_snapshot(state: FireState, land: Landscape, path: PathLike) -> None:
    """Binary PPM (P6) snapshot; byte output is deterministic for a given
    state and landscape."""
    img = render_state(state, land)
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes(order="C"))


def write_series_csv(
    series: Sequence,
    path: PathLike,
    jaccard: Optional[Sequence[float]] = None,
) -> None:
    """Per-step counts CSV: step,burning,burned,affected[,jaccard]."""
    if jaccard is not None and len(jaccard) != len(series):
        raise ValueError("jaccard series length mismatch")
    lines: List[str] = []
    header = "step,burning,burned,affected"
    if jaccard is not None:
        header += ",jaccard"
    lines.append(header)
    for i, stats in enumerate(series):
        row = f"{stats.t},{stats.burning},{stats.burned},{stats.affected}"
        if jaccard is not None:
            row += f",{jaccard[i]:.6f}"
        lines.append(row)
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))
