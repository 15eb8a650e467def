"""Binary file contracts: "PXOM" observation-map datasets and "PXNM"
normal maps.

PXOM: magic "PXOM", uint32 version (1), uint32 d, uint32 channels (4),
uint64 record count; then per record d*d*4 float32 map values
(row-major, channel-interleaved) followed by 3 float32 normal
components.  All values little-endian.

PXNM: magic "PXNM", uint32 version (1), uint32 H, uint32 W; then
H*W*3 float32 components, NaN triplets for masked-out pixels.
"""

import struct

import numpy as np

from .errors import BadMagic, TruncatedFile, VersionUnsupported

PXOM_MAGIC = b"PXOM"
PXNM_MAGIC = b"PXNM"
VERSION = 1

_PXOM_HEADER = struct.Struct("<4sIIIQ")
_PXNM_HEADER = struct.Struct("<4sIII")


class DatasetWriter:
    """Streams observation-map records to a PXOM file.

    The record count is patched into the header on close, so the target
    must be seekable.
    """

    def __init__(self, path, d, channels=4):
        self.d = int(d)
        self.channels = int(channels)
        self.count = 0
        self._fh = open(path, "wb")
        self._fh.write(_PXOM_HEADER.pack(PXOM_MAGIC, VERSION, self.d, self.channels, 0))

    def append(self, grid, normal):
        grid = np.ascontiguousarray(grid, dtype="<f4")
        if grid.shape != (self.d, self.d, self.channels):
            raise ValueError(f"record shape {grid.shape} != {(self.d, self.d, self.channels)}")
        normal = np.ascontiguousarray(normal, dtype="<f4")
        self._fh.write(grid.tobytes())
        self._fh.write(normal.tobytes())
        self.count += 1

    def append_batch(self, grids, normals):
        for grid, normal in zip(grids, normals):
            self.append(grid, normal)

    def close(self):
        self._fh.seek(0)
        self._fh.write(_PXOM_HEADER.pack(PXOM_MAGIC, VERSION, self.d, self.channels, self.count))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_pxom(path, grids, normals):
    """Write a full dataset in one call; grids (n, d, d, 4), normals (n, 3)."""
    grids = np.asarray(grids)
    with DatasetWriter(path, grids.shape[1], grids.shape[3]) as writer:
        writer.append_batch(grids, normals)


def read_pxom(path):
    """Read a PXOM dataset to (maps (n, d, d, c) float32, normals (n, 3) float32)."""
    with open(path, "rb") as fh:
        header = fh.read(_PXOM_HEADER.size)
        if len(header) < _PXOM_HEADER.size:
            raise TruncatedFile("header too short")
        magic, version, d, channels, count = _PXOM_HEADER.unpack(header)
        if magic != PXOM_MAGIC:
            raise BadMagic(f"expected {PXOM_MAGIC!r}, got {magic!r}")
        if version != VERSION:
            raise VersionUnsupported(f"version {version}")
        rec_floats = d * d * channels + 3
        payload = fh.read(count * rec_floats * 4)
        if len(payload) < count * rec_floats * 4:
            raise TruncatedFile(
                f"header declares {count} records, payload holds "
                f"{len(payload) // (rec_floats * 4)}")
    flat = np.frombuffer(payload, dtype="<f4").reshape(count, rec_floats)
    maps = flat[:, : d * d * channels].reshape(count, d, d, channels)
    normals = flat[:, d * d * channels:]
    return np.ascontiguousarray(maps), np.ascontiguousarray(normals)


def pxom_info(path):
    """Header fields of a PXOM file without reading the payload."""
    with open(path, "rb") as fh:
        header = fh.read(_PXOM_HEADER.size)
    if len(header) < _PXOM_HEADER.size:
        raise TruncatedFile("header too short")
    magic, version, d, channels, count = _PXOM_HEADER.unpack(header)
    if magic != PXOM_MAGIC:
        raise BadMagic(f"expected {PXOM_MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise VersionUnsupported(f"version {version}")
    return {"d": d, "channels": channels, "count": count}


def write_pxnm(path, normals, mask=None):
    """Write an H x W x 3 normal map; pixels outside the mask become NaN."""
    normals = np.asarray(normals, dtype=np.float64)
    h, w = normals.shape[:2]
    out = normals.astype("<f4").copy()
    if mask is not None:
        out[~np.asarray(mask, dtype=bool)] = np.nan
    with open(path, "wb") as fh:
        fh.write(_PXNM_HEADER.pack(PXNM_MAGIC, VERSION, h, w))
        fh.write(np.ascontiguousarray(out).tobytes())


def read_pxnm(path):
    """Read a PXNM file to (normals (H, W, 3) float32 with NaN outside,
    mask (H, W) bool)."""
    with open(path, "rb") as fh:
        header = fh.read(_PXNM_HEADER.size)
        if len(header) < _PXNM_HEADER.size:
            raise TruncatedFile("header too short")
        magic, version, h, w = _PXNM_HEADER.unpack(header)
        if magic != PXNM_MAGIC:
            raise BadMagic(f"expected {PXNM_MAGIC!r}, got {magic!r}")
        if version != VERSION:
            raise VersionUnsupported(f"version {version}")
        payload = fh.read(h * w * 3 * 4)
        if len(payload) < h * w * 3 * 4:
            raise TruncatedFile("payload shorter than H*W*3 floats")
    normals = np.frombuffer(payload, dtype="<f4").reshape(h, w, 3).copy()
    mask = np.all(np.isfinite(normals), axis=-1)
    return normals, mask
