"""Cloud file I/O: PLY (ascii and binary little-endian) and XYZ text.

Only the x, y, z vertex properties are read; color, normal, and other
scalar properties are skipped.  The volume method is geometry-only, so
RGB attributes are deliberately never surfaced.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import (
    InvalidParameter,
    MalformedHeader,
    NonFiniteCoordinate,
    UnsupportedProperty,
)

FORMAT_PLY_ASCII = "ply-ascii"
FORMAT_PLY_BINARY = "ply-binary-le"
FORMAT_XYZ = "xyz"

# PLY scalar property type -> struct code and byte size
_PLY_SCALAR_TYPES = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}
_FLOAT_TYPES = {"float", "float32", "double", "float64"}


def _detect_format(path: Path) -> str:
    if path.suffix.lower() == ".ply":
        with open(path, "rb") as fh:
            head = fh.read(512)
        return FORMAT_PLY_BINARY if b"binary_little_endian" in head else FORMAT_PLY_ASCII
    return FORMAT_XYZ


def load_cloud(path, format: str | None = None) -> PointCloud:
    """Load a point cloud, rejecting non-finite coordinates.

    Args:
        path: input file.
        format: one of "ply-ascii", "ply-binary-le", "xyz"; inferred from
            the file extension and header when omitted.

    Raises:
        FileNotFoundError, MalformedHeader, UnsupportedProperty,
        NonFiniteCoordinate (with the offending point row).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if format is None:
        format = _detect_format(path)
    if format == FORMAT_XYZ:
        return _load_xyz(path)
    if format in (FORMAT_PLY_ASCII, FORMAT_PLY_BINARY):
        return _load_ply(path, format)
    raise InvalidParameter(f"unknown cloud format {format!r}")


def save_cloud(cloud: PointCloud, path, format: str = FORMAT_PLY_BINARY,
               dtype: str = "float64") -> None:
    """Write a cloud; float64 formats round-trip coordinates exactly.

    ``dtype`` ("float64" or "float32") selects the stored precision for
    the PLY formats; XYZ always writes full-precision text.
    """
    path = Path(path)
    if dtype not in ("float64", "float32"):
        raise InvalidParameter(f"dtype must be float64 or float32, got {dtype!r}")
    if format == FORMAT_XYZ:
        _save_xyz(cloud, path)
    elif format == FORMAT_PLY_ASCII:
        _save_ply_ascii(cloud, path, dtype)
    elif format == FORMAT_PLY_BINARY:
        _save_ply_binary(cloud, path, dtype)
    else:
        raise InvalidParameter(f"unknown cloud format {format!r}")


# ---------------------------------------------------------------------------
# XYZ text
# ---------------------------------------------------------------------------

def _load_xyz(path: Path) -> PointCloud:
    rows = []
    with open(path, "r") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 3:
                raise MalformedHeader(f"XYZ line with fewer than 3 fields: {line!r}")
            try:
                rows.append([float(parts[0]), float(parts[1]), float(parts[2])])
            except ValueError as exc:
                raise MalformedHeader(f"unparseable XYZ line: {line!r}") from exc
    return _cloud_from_rows(np.asarray(rows, dtype=np.float64).reshape(-1, 3))


def _save_xyz(cloud: PointCloud, path: Path) -> None:
    with open(path, "w") as fh:
        for x, y, z in cloud.xyz:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")


# ---------------------------------------------------------------------------
# PLY
# ---------------------------------------------------------------------------

def _parse_ply_header(fh) -> tuple[str, int, list[tuple[str, str]]]:
    """Return (format, vertex_count, vertex_properties) from an open binary file.

    The file position is left at the first byte after "end_header".
    """
    magic = fh.readline().strip()
    if magic != b"ply":
        raise MalformedHeader("file does not start with 'ply'")
    fmt = None
    vertex_count = None
    properties: list[tuple[str, str]] = []
    in_vertex_element = False
    while True:
        raw = fh.readline()
        if not raw:
            raise MalformedHeader("header ended before 'end_header'")
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        if line == "end_header":
            break
        fields = line.split()
        if fields[0] == "format":
            if len(fields) < 2:
                raise MalformedHeader("format line missing encoding")
            if fields[1] == "ascii":
                fmt = FORMAT_PLY_ASCII
            elif fields[1] == "binary_little_endian":
                fmt = FORMAT_PLY_BINARY
            else:
                raise MalformedHeader(f"unsupported PLY encoding {fields[1]!r}")
        elif fields[0] == "element":
            if len(fields) != 3:
                raise MalformedHeader(f"bad element line: {line!r}")
            in_vertex_element = fields[1] == "vertex"
            if in_vertex_element:
                try:
                    vertex_count = int(fields[2])
                except ValueError as exc:
                    raise MalformedHeader(f"bad vertex count: {fields[2]!r}") from exc
        elif fields[0] == "property" and in_vertex_element:
            if fields[1] == "list":
                raise UnsupportedProperty("list property in vertex element")
            if len(fields) != 3:
                raise MalformedHeader(f"bad property line: {line!r}")
            ptype, pname = fields[1], fields[2]
            if ptype not in _PLY_SCALAR_TYPES:
                raise UnsupportedProperty(f"unknown property type {ptype!r}")
            properties.append((pname, ptype))
    if fmt is None:
        raise MalformedHeader("PLY header has no format line")
    if vertex_count is None:
        raise MalformedHeader("PLY header has no vertex element")
    names = [name for name, _ in properties]
    for coord in ("x", "y", "z"):
        if coord not in names:
            raise MalformedHeader(f"vertex element lacks property {coord!r}")
        if properties[names.index(coord)][1] not in _FLOAT_TYPES:
            raise UnsupportedProperty(f"property {coord!r} is not a float type")
    return fmt, vertex_count, properties


def _load_ply(path: Path, expected_format: str) -> PointCloud:
    with open(path, "rb") as fh:
        fmt, count, properties = _parse_ply_header(fh)
        if fmt != expected_format:
            raise MalformedHeader(
                f"file is {fmt}, but {expected_format} was requested"
            )
        names = [name for name, _ in properties]
        ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
        if fmt == FORMAT_PLY_ASCII:
            xyz = np.empty((count, 3))
            for row in range(count):
                line = fh.readline()
                if not line:
                    raise MalformedHeader(
                        f"expected {count} vertices, file ended at {row}"
                    )
                parts = line.split()
                if len(parts) < len(properties):
                    raise MalformedHeader(f"short vertex row {row}")
                try:
                    xyz[row, 0] = float(parts[ix])
                    xyz[row, 1] = float(parts[iy])
                    xyz[row, 2] = float(parts[iz])
                except ValueError as exc:
                    raise MalformedHeader(f"unparseable vertex row {row}") from exc
        else:
            dtype = np.dtype(
                [(f"p{i}", "<" + _PLY_SCALAR_TYPES[ptype][0])
                 for i, (_, ptype) in enumerate(properties)]
            )
            buf = fh.read(dtype.itemsize * count)
            if len(buf) < dtype.itemsize * count:
                raise MalformedHeader(
                    f"binary payload too short: expected {dtype.itemsize * count} "
                    f"bytes, got {len(buf)}"
                )
            table = np.frombuffer(buf, dtype=dtype, count=count)
            xyz = np.column_stack([
                table[f"p{ix}"].astype(np.float64),
                table[f"p{iy}"].astype(np.float64),
                table[f"p{iz}"].astype(np.float64),
            ])
    return _cloud_from_rows(xyz.reshape(-1, 3))


def _save_ply_ascii(cloud: PointCloud, path: Path, dtype: str) -> None:
    ply_type = "double" if dtype == "float64" else "float"
    data = cloud.xyz if dtype == "float64" else cloud.xyz.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(_ply_header(FORMAT_PLY_ASCII, len(cloud), ply_type))
        for x, y, z in data:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n".encode("ascii"))


def _save_ply_binary(cloud: PointCloud, path: Path, dtype: str) -> None:
    ply_type = "double" if dtype == "float64" else "float"
    code = "d" if dtype == "float64" else "f"
    data = cloud.xyz if dtype == "float64" else cloud.xyz.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(_ply_header(FORMAT_PLY_BINARY, len(cloud), ply_type))
        fh.write(data.astype("<" + ("f8" if code == "d" else "f4")).tobytes())


def _ply_header(fmt: str, count: int, ply_type: str) -> bytes:
    encoding = "ascii" if fmt == FORMAT_PLY_ASCII else "binary_little_endian"
    lines = [
        "ply",
        f"format {encoding} 1.0",
        f"element vertex {count}",
        f"property {ply_type} x",
        f"property {ply_type} y",
        f"property {ply_type} z",
        "end_header",
    ]
    return ("\n".join(lines) + "\n").encode("ascii")


def _cloud_from_rows(xyz: np.ndarray) -> PointCloud:
    finite = np.isfinite(xyz).all(axis=1)
    if not finite.all():
        raise NonFiniteCoordinate(int(np.flatnonzero(~finite)[0]))
    return PointCloud(xyz, validate=False)
