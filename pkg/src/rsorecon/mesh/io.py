"""OBJ and PLY reading/writing.

Only the geometry is read: vertex positions, optional vertex normals and
faces (polygons are fan-triangulated).  PLY may be ascii or
binary_little_endian.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ..errors import DomainError, ParseError
from .core import TriangleMesh, clean

log = logging.getLogger(__name__)

PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def load_mesh(path, return_dropped: bool = False):
    """Read an OBJ or PLY triangle mesh and drop degenerate triangles.

    Raises
    ------
    ParseError
        Malformed file; the message carries the line number (OBJ, ascii
        PLY) or byte offset (binary PLY).
    DomainError
        The file holds no usable triangles.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        verts, tris, normals = _read_obj(path)
    elif suffix == ".ply":
        elements = read_ply(path)
        verts, tris, normals = _ply_geometry(elements, path)
    else:
        raise ParseError(f"{path}: unsupported mesh format {suffix!r}")
    if len(tris) == 0:
        raise DomainError(f"{path}: mesh has no triangles")
    mesh, dropped = clean(TriangleMesh(verts, tris, normals))
    if len(mesh.triangles) == 0 or mesh.area <= 0:
        raise DomainError(f"{path}: mesh has zero surface area")
    log.info("loaded %s: %d vertices, %d triangles (%d dropped)", path.name, len(mesh.vertices), len(mesh.triangles), dropped)
    return (mesh, dropped) if return_dropped else mesh


def _fan(poly):
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def _read_obj(path):
    verts, normals, tris = [], [], []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            try:
                if tag == "v":
                    verts.append([float(p) for p in parts[1:4]])
                    if len(verts[-1]) != 3:
                        raise ValueError("vertex needs 3 coordinates")
                elif tag == "vn":
                    normals.append([float(p) for p in parts[1:4]])
                elif tag == "f":
                    idx = []
                    for p in parts[1:]:
                        i = int(p.split("/")[0])
                        idx.append(i - 1 if i > 0 else len(verts) + i)
                    if len(idx) < 3:
                        raise ValueError("face needs at least 3 vertices")
                    if min(idx) < 0 or max(idx) >= len(verts):
                        raise ValueError("face index out of range")
                    tris.extend(_fan(idx))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}: {line.strip()!r}") from None
    v = np.array(verts, dtype=float).reshape(-1, 3)
    n = np.array(normals, dtype=float).reshape(-1, 3) if len(normals) == len(verts) and normals else None
    return v, np.array(tris, dtype=np.int64).reshape(-1, 3), n


def _parse_header(raw: bytes, path):
    end = raw.find(b"end_header")
    if not raw.startswith(b"ply") or end < 0:
        raise ParseError(f"{path}: byte 0: not a PLY file (missing 'ply' magic or 'end_header')")
    nl = raw.find(b"\n", end)
    body_start = len(raw) if nl < 0 else nl + 1
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    fmt = None
    elements = []
    for lineno, line in enumerate(header, 1):
        parts = line.split()
        if not parts or parts[0] in ("ply", "comment", "obj_info"):
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append({"name": parts[1], "count": int(parts[2]), "props": []})
        elif parts[0] == "property":
            if not elements:
                raise ParseError(f"{path}:{lineno}: property before any element")
            if parts[1] == "list":
                if parts[2] not in PLY_TYPES or parts[3] not in PLY_TYPES:
                    raise ParseError(f"{path}:{lineno}: unknown list type {parts[2:4]}")
                elements[-1]["props"].append((parts[4], "list", PLY_TYPES[parts[2]], PLY_TYPES[parts[3]]))
            else:
                if parts[1] not in PLY_TYPES:
                    raise ParseError(f"{path}:{lineno}: unknown property type {parts[1]!r}")
                elements[-1]["props"].append((parts[2], "scalar", PLY_TYPES[parts[1]], None))
        else:
            raise ParseError(f"{path}:{lineno}: unexpected header line {line!r}")
    if fmt not in ("ascii", "binary_little_endian"):
        raise ParseError(f"{path}: unsupported PLY format {fmt!r}")
    return fmt, elements, body_start, len(header) + 1


def read_ply(path) -> dict:
    """Read every element of a PLY file.

    Returns a dict mapping element name to a dict of property name to
    array (scalar properties) or list of arrays (list properties).
    """
    raw = Path(path).read_bytes()
    fmt, elements, pos, header_lines = _parse_header(raw, path)
    if fmt == "ascii":
        return _read_ply_ascii(raw[pos:].decode("ascii", errors="replace"), elements, path, header_lines)
    return _read_ply_binary(raw, pos, elements, path)


def _read_ply_ascii(text, elements, path, header_lines):
    lines = text.splitlines()
    out = {}
    i = 0
    for el in elements:
        data = {name: [] for name, *_ in el["props"]}
        for _ in range(el["count"]):
            lineno = header_lines + i + 1
            if i >= len(lines):
                raise ParseError(f"{path}:{lineno}: unexpected end of file in element {el['name']!r}")
            tokens = lines[i].split()
            i += 1
            k = 0
            try:
                for name, kind, t1, t2 in el["props"]:
                    if kind == "scalar":
                        data[name].append(float(tokens[k]) if t1[0] == "f" else int(tokens[k]))
                        k += 1
                    else:
                        cnt = int(tokens[k])
                        vals = tokens[k + 1:k + 1 + cnt]
                        if len(vals) != cnt:
                            raise IndexError
                        data[name].append(np.array(vals, dtype=float if t2[0] == "f" else np.int64))
                        k += 1 + cnt
            except (IndexError, ValueError):
                raise ParseError(f"{path}:{lineno}: malformed {el['name']} record {lines[i - 1]!r}") from None
        out[el["name"]] = {
            name: (np.array(v, dtype=np.float64 if t1[0] == "f" else np.int64) if kind == "scalar" else v)
            for (name, kind, t1, _), v in zip(el["props"], data.values())
        }
    return out


def _read_ply_binary(raw, pos, elements, path):
    out = {}
    for el in elements:
        props = el["props"]
        if all(kind == "scalar" for _, kind, _, _ in props):
            dtype = np.dtype([(name, "<" + t1) for name, _, t1, _ in props])
            need = dtype.itemsize * el["count"]
            if pos + need > len(raw):
                raise ParseError(
                    f"{path}: truncated at byte offset {len(raw)}: element {el['name']!r} needs bytes {pos}..{pos + need}")
            arr = np.frombuffer(raw, dtype=dtype, count=el["count"], offset=pos)
            out[el["name"]] = {name: arr[name].astype(arr[name].dtype.newbyteorder("=")) for name, *_ in props}
            pos += need
            continue
        data = {name: [] for name, *_ in props}
        fast = _try_fixed_lists(raw, pos, el, path)
        if fast is not None:
            out[el["name"]], pos = fast
            continue
        for _ in range(el["count"]):
            for name, kind, t1, t2 in props:
                size = np.dtype(t1).itemsize
                if pos + size > len(raw):
                    raise ParseError(f"{path}: truncated at byte offset {pos} in element {el['name']!r}")
                val = np.frombuffer(raw, dtype="<" + t1, count=1, offset=pos)[0]
                pos += size
                if kind == "scalar":
                    data[name].append(val)
                else:
                    size2 = np.dtype(t2).itemsize * int(val)
                    if pos + size2 > len(raw):
                        raise ParseError(f"{path}: truncated at byte offset {pos} in element {el['name']!r}")
                    data[name].append(np.frombuffer(raw, dtype="<" + t2, count=int(val), offset=pos).astype(t2))
                    pos += size2
        out[el["name"]] = {
            name: (np.array(v) if kind == "scalar" else v)
            for (name, kind, _, _), v in zip(props, data.values())
        }
    return out


def _try_fixed_lists(raw, pos, el, path):
    # fast path: a single list property whose every record has the same length
    props = el["props"]
    if len(props) != 1 or el["count"] == 0:
        return None
    name, _, t1, t2 = props[0]
    csize = np.dtype(t1).itemsize
    if pos + csize > len(raw):
        raise ParseError(f"{path}: truncated at byte offset {pos} in element {el['name']!r}")
    k = int(np.frombuffer(raw, dtype="<" + t1, count=1, offset=pos)[0])
    dtype = np.dtype([("n", "<" + t1), ("v", "<" + t2, (k,))])
    need = dtype.itemsize * el["count"]
    if pos + need > len(raw):
        return None  # let the slow path locate the truncation offset
    arr = np.frombuffer(raw, dtype=dtype, count=el["count"], offset=pos)
    if not np.all(arr["n"] == k):
        return None
    return {name: list(arr["v"].astype(t2))}, pos + need


def _ply_geometry(elements, path):
    if "vertex" not in elements:
        raise ParseError(f"{path}: no vertex element")
    v = elements["vertex"]
    try:
        verts = np.column_stack([v["x"], v["y"], v["z"]]).astype(float)
    except KeyError as exc:
        raise ParseError(f"{path}: vertex element lacks property {exc}") from None
    normals = None
    if all(k in v for k in ("nx", "ny", "nz")):
        normals = np.column_stack([v["nx"], v["ny"], v["nz"]]).astype(float)
    tris = []
    face = elements.get("face", {})
    polys = face.get("vertex_indices", face.get("vertex_index", []))
    for i, poly in enumerate(polys):
        poly = [int(p) for p in poly]
        if len(poly) < 3 or min(poly) < 0 or max(poly) >= len(verts):
            raise ParseError(f"{path}: face {i} has invalid indices {poly}")
        tris.extend(_fan(poly))
    return verts, np.array(tris, dtype=np.int64).reshape(-1, 3), normals


def save_obj(mesh: TriangleMesh, path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in (mesh.triangles + 1).tolist():
            fh.write(f"f {a} {b} {c}\n")
    return path


def save_ply(mesh: TriangleMesh, path, binary: bool = False) -> Path:
    path = Path(path)
    header = (
        "ply\n"
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0\n"
        f"element vertex {len(mesh.vertices)}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {len(mesh.triangles)}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    with path.open("wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(mesh.vertices.astype("<f8").tobytes())
            faces = np.zeros(len(mesh.triangles), dtype=[("n", "u1"), ("v", "<i4", (3,))])
            faces["n"] = 3
            faces["v"] = mesh.triangles
            fh.write(faces.tobytes())
        else:
            lines = [f"{x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
            lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
            fh.write(("\n".join(lines) + "\n").encode("ascii"))
    return path
