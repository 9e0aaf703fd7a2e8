"""Minimal PLY point reader/writer.

Reads ASCII and binary little-endian PLY files, extracting float32/float64
x, y, z vertex properties and ignoring everything else. Writes ASCII PLY
with double precision vertices; repr-formatted floats make the write/parse
round trip lossless for float64.
"""

from __future__ import annotations

import numpy as np

from .errors import PlyBodyError, PlyFormatError, PlyHeaderError

_SCALAR_SIZES = {
    "char": 1, "int8": 1, "uchar": 1, "uint8": 1,
    "short": 2, "int16": 2, "ushort": 2, "uint16": 2,
    "int": 4, "int32": 4, "uint": 4, "uint32": 4,
    "float": 4, "float32": 4, "double": 8, "float64": 8,
}
_FLOAT_DTYPES = {"float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8"}


class _Element:
    def __init__(self, name: str, count: int):
        self.name = name
        self.count = count
        self.properties: list[tuple[str, str, bool]] = []  # (name, type, is_list)


def _parse_header(data: bytes):
    end = data.find(b"end_header")
    if end < 0:
        raise PlyHeaderError("missing end_header", 0)
    nl = data.find(b"\n", end)
    if nl < 0:
        raise PlyHeaderError("no newline after end_header", 0)
    header_text = data[:nl].decode("latin-1")
    body = data[nl + 1:]

    lines = [ln.rstrip("\r") for ln in header_text.split("\n")]
    if not lines or lines[0].strip() != "ply":
        raise PlyHeaderError("file does not start with 'ply'", 1)
    fmt = None
    elements: list[_Element] = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2:
                raise PlyHeaderError("malformed format line", lineno)
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise PlyHeaderError("malformed element line", lineno)
            try:
                count = int(tokens[2])
            except ValueError:
                raise PlyHeaderError(f"bad element count {tokens[2]!r}", lineno) from None
            if count < 0:
                raise PlyHeaderError("negative element count", lineno)
            elements.append(_Element(tokens[1], count))
        elif tokens[0] == "property":
            if not elements:
                raise PlyHeaderError("property before any element", lineno)
            if tokens[1] == "list":
                if len(tokens) != 5:
                    raise PlyHeaderError("malformed list property", lineno)
                elements[-1].properties.append((tokens[4], tokens[3], True))
            else:
                if len(tokens) != 3:
                    raise PlyHeaderError("malformed property line", lineno)
                if tokens[1] not in _SCALAR_SIZES:
                    raise PlyHeaderError(f"unknown property type {tokens[1]!r}", lineno)
                elements[-1].properties.append((tokens[2], tokens[1], False))
        elif tokens[0] == "end_header":
            break
        else:
            raise PlyHeaderError(f"unrecognized header keyword {tokens[0]!r}", lineno)
    if fmt is None:
        raise PlyHeaderError("missing format line", 1)
    if fmt == "binary_big_endian":
        raise PlyFormatError("big-endian PLY is not supported")
    if fmt not in ("ascii", "binary_little_endian"):
        raise PlyFormatError(f"unsupported PLY format {fmt!r}")
    if not any(e.name == "vertex" for e in elements):
        raise PlyHeaderError("no vertex element", 1)
    return fmt, elements, body


def _vertex_layout(elem: _Element):
    """Offset/dtype of x, y, z in a fixed-stride vertex record."""
    offset = 0
    found: dict[str, tuple[int, str]] = {}
    for name, typ, is_list in elem.properties:
        if is_list:
            raise PlyFormatError("list properties in the vertex element are not supported")
        if name in ("x", "y", "z"):
            if typ not in _FLOAT_DTYPES:
                raise PlyFormatError(f"vertex property {name} has non-float type {typ!r}")
            found[name] = (offset, _FLOAT_DTYPES[typ])
        offset += _SCALAR_SIZES[typ]
    if set(found) != {"x", "y", "z"}:
        raise PlyHeaderError("vertex element lacks x, y, z properties", 1)
    return found, offset


def _parse_ascii(elements, body: bytes) -> np.ndarray:
    lines = [ln for ln in body.decode("latin-1").splitlines()]
    pos = 0
    pts = None
    for elem in elements:
        if elem.name == "vertex":
            found, _ = _vertex_layout(elem)
            names = [p[0] for p in elem.properties]
            ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
            pts = np.empty((elem.count, 3), dtype=np.float64)
            for k in range(elem.count):
                while pos < len(lines) and not lines[pos].split():
                    pos += 1
                if pos >= len(lines):
                    raise PlyBodyError(
                        f"expected {elem.count} vertices, body ended after {k}",
                        f"line {pos + 1} of body")
                tokens = lines[pos].split()
                pos += 1
                if len(tokens) != len(names):
                    raise PlyBodyError(
                        f"vertex line has {len(tokens)} values, expected {len(names)}",
                        f"line {pos} of body")
                try:
                    pts[k] = (float(tokens[ix]), float(tokens[iy]), float(tokens[iz]))
                except ValueError:
                    raise PlyBodyError("non-numeric vertex value", f"line {pos} of body") from None
            break  # later elements are irrelevant for point extraction
        # Skip a preceding element: one line per item.
        for k in range(elem.count):
            while pos < len(lines) and not lines[pos].split():
                pos += 1
            if pos >= len(lines):
                raise PlyBodyError(
                    f"element {elem.name!r} truncated at item {k}", f"line {pos + 1} of body")
            pos += 1
    return pts


def _parse_binary(elements, body: bytes) -> np.ndarray:
    offset = 0
    for elem in elements:
        if elem.name == "vertex":
            found, stride = _vertex_layout(elem)
            need = stride * elem.count
            if len(body) - offset < need:
                have = (len(body) - offset) // stride if stride else 0
                raise PlyBodyError(
                    f"expected {elem.count} vertices, body holds {have}",
                    f"byte offset {offset}")
            block = body[offset:offset + need]
            pts = np.empty((elem.count, 3), dtype=np.float64)
            for col, name in enumerate(("x", "y", "z")):
                off, dt = found[name]
                pts[:, col] = np.ndarray(
                    (elem.count,), dtype=np.dtype(dt), buffer=block, offset=off,
                    strides=(stride,)).astype(np.float64)
            return pts
        # Skip a preceding element; requires a fixed stride.
        stride = 0
        for name, typ, is_list in elem.properties:
            if is_list:
                raise PlyFormatError(
                    f"cannot skip list property in element {elem.name!r} before vertices")
            stride += _SCALAR_SIZES[typ]
        need = stride * elem.count
        if len(body) - offset < need:
            raise PlyBodyError(f"element {elem.name!r} truncated", f"byte offset {offset}")
        offset += need
    raise PlyHeaderError("no vertex element", 1)  # unreachable; header already checked


def parse_ply(path) -> np.ndarray:
    """Read vertex positions from an ASCII or binary little-endian PLY file."""
    with open(path, "rb") as fh:
        data = fh.read()
    fmt, elements, body = _parse_header(data)
    if fmt == "ascii":
        return _parse_ascii(elements, body)
    return _parse_binary(elements, body)


def write_ply(path, points) -> None:
    """Write points as an ASCII PLY with double-precision x, y, z."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {pts.shape[0]}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        fh.write("end_header\n")
        for p in pts:
            # repr of a Python float is the shortest digit string that
            # round-trips, which keeps parse(write(x)) bitwise exact
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
