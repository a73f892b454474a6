"""CSV ingestion/serialisation of manifold-valued data and JSON helpers.

Sphere files
    ``id,x,y,z`` (direction cosines), or ``id,colatitude,longitude`` in radians.

SO(3) files
    ``id,format,v1,...,v9`` where ``format`` is ``matrix`` (nine row-major
    entries), ``quaternion`` (``a,b,c,d`` scalar first) or ``axis-angle``
    (``x,y,z,angle``). Unused value columns are left empty.

Parsing is strict by default: values that are off the manifold by more than
the input tolerance (1e-6) are rejected. With ``lenient=True`` they are
projected back with a warning instead. Errors carry the 1-based line number.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .dependence import PairedSample
from .errors import DataFormatError
from .geometry import ManifoldPoint, get_manifold
from .so3 import AxisAngle, axis_angle_matrices, polar_project, quaternion_matrix

INPUT_ATOL = 1e-6
INTERNAL_ATOL = 1e-12

SPHERE_HEADER = ("id", "x", "y", "z")
SPHERE_ANGLE_HEADER = ("id", "colatitude", "longitude")
SO3_HEADER = ("id", "format") + tuple(f"v{i}" for i in range(1, 10))
SO3_FORMATS = {"matrix": 9, "quaternion": 4, "axis-angle": 4}


class NormalizationWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PointRecords:
    manifold: str
    ids: tuple
    points: np.ndarray

    def __len__(self):
        return len(self.ids)

    def as_manifold_points(self) -> list[ManifoldPoint]:
        return [ManifoldPoint(self.manifold, p) for p in self.points]


def _read_rows(path):
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"{path}: file not found")
    with path.open(newline="") as fh:
        rows = [(i, row) for i, row in enumerate(csv.reader(fh), start=1)
                if row and any(c.strip() for c in row)]
    if not rows:
        raise DataFormatError(f"{path}: file is empty")
    header = tuple(c.strip().lower() for c in rows[0][1])
    body = rows[1:]
    if not body:
        raise DataFormatError(f"{path}: no data rows")
    return header, body


def _floats(cells, line):
    try:
        vals = [float(c) for c in cells]
    except ValueError:
        raise DataFormatError(f"non-numeric value in {cells}", row=line) from None
    if not all(math.isfinite(v) for v in vals):
        raise DataFormatError("non-finite value", row=line)
    return np.array(vals)


def _check_ids(ids, lines):
    seen = {}
    for i, line in zip(ids, lines):
        if not i:
            raise DataFormatError("empty id", row=line)
        if i in seen:
            raise DataFormatError(f"duplicate id {i!r} (first on line {seen[i]})", row=line)
        seen[i] = line


def _fix_unit(v, line, lenient, what):
    norm = float(np.linalg.norm(v))
    if norm == 0:
        raise DataFormatError(f"{what} is the zero vector", row=line)
    dev = abs(norm - 1.0)
    if dev > INPUT_ATOL:
        if not lenient:
            raise DataFormatError(f"{what} has norm {norm:.9g}, not 1 (use lenient mode to normalise)", row=line)
        warnings.warn(f"line {line}: {what} with norm {norm:.6g} normalised", NormalizationWarning, stacklevel=3)
    return v / norm if dev > INTERNAL_ATOL else v


def load_sphere_csv(path, *, lenient: bool = False) -> PointRecords:
    header, body = _read_rows(path)
    ids, pts, lines = [], [], []
    if header == SPHERE_HEADER:
        for line, row in body:
            if len(row) != 4:
                raise DataFormatError(f"expected 4 columns, got {len(row)}", row=line)
            v = _floats(row[1:], line)
            pts.append(_fix_unit(v, line, lenient, "direction"))
            ids.append(row[0].strip())
            lines.append(line)
    elif header == SPHERE_ANGLE_HEADER:
        for line, row in body:
            if len(row) != 3:
                raise DataFormatError(f"expected 3 columns, got {len(row)}", row=line)
            theta, lam = _floats(row[1:], line)
            pts.append(np.array([
                math.sin(theta) * math.cos(lam),
                math.sin(theta) * math.sin(lam),
                math.cos(theta),
            ]))
            ids.append(row[0].strip())
            lines.append(line)
    else:
        raise DataFormatError(
            f"{path}: header {','.join(header)!r} is not 'id,x,y,z' or 'id,colatitude,longitude'", row=1
        )
    _check_ids(ids, lines)
    return PointRecords("sphere", tuple(ids), np.array(pts))


def _decode_rotation(fmt, vals, line, lenient):
    if fmt == "matrix":
        M = vals.reshape(3, 3)
        det = np.linalg.det(M)
        dev = np.max(np.abs(M.T @ M - np.eye(3)))
        if det <= 0:
            raise DataFormatError("matrix is not a proper rotation (det <= 0)", row=line)
        if dev > INPUT_ATOL:
            if not lenient:
                raise DataFormatError(f"matrix is not orthogonal (max |MᵀM-I| = {dev:.3g})", row=line)
            warnings.warn(f"line {line}: matrix projected onto SO(3)", NormalizationWarning, stacklevel=3)
        return polar_project(M) if dev > 1e-10 or abs(det - 1) > 1e-10 else M
    if fmt == "quaternion":
        q = _fix_unit(vals, line, lenient, "quaternion")
        return quaternion_matrix(q)
    axis, angle = vals[:3], vals[3]
    if not np.any(axis):
        if angle == 0:
            return np.eye(3)
        raise DataFormatError("axis-angle with zero axis and nonzero angle", row=line)
    axis = _fix_unit(axis, line, lenient, "rotation axis")
    aa = AxisAngle(axis / np.linalg.norm(axis), angle)
    return axis_angle_matrices(aa.axis[None], aa.angle)[0]


def load_so3_csv(path, *, lenient: bool = False) -> PointRecords:
    header, body = _read_rows(path)
    if header[:2] != ("id", "format") or header != SO3_HEADER[: len(header)] or len(header) < 6:
        raise DataFormatError(f"{path}: header must be 'id,format,v1,...,v9'", row=1)
    ids, pts, lines = [], [], []
    for line, row in body:
        fmt = row[1].strip().lower() if len(row) > 1 else ""
        if fmt not in SO3_FORMATS:
            raise DataFormatError(f"unknown rotation format {fmt!r}", row=line)
        k = SO3_FORMATS[fmt]
        cells = [c.strip() for c in row[2:]]
        if len(cells) < k or any(not c for c in cells[:k]) or any(c for c in cells[k:]):
            raise DataFormatError(f"format {fmt} needs exactly {k} values", row=line)
        pts.append(_decode_rotation(fmt, _floats(cells[:k], line), line, lenient))
        ids.append(row[0].strip())
        lines.append(line)
    _check_ids(ids, lines)
    return PointRecords("so3", tuple(ids), np.array(pts))


def sniff_manifold(path) -> str:
    header, _ = _read_rows(path)
    if header in (SPHERE_HEADER, SPHERE_ANGLE_HEADER):
        return "sphere"
    if header[:2] == ("id", "format"):
        return "so3"
    raise DataFormatError(f"{path}: unrecognised header {','.join(header)!r}", row=1)


def load_points_csv(path, *, lenient: bool = False) -> PointRecords:
    if sniff_manifold(path) == "sphere":
        return load_sphere_csv(path, lenient=lenient)
    return load_so3_csv(path, lenient=lenient)


def _fmt(v: float) -> str:
    return repr(float(v))


def _default_ids(n):
    return [str(i + 1) for i in range(n)]


def save_sphere_csv(path_or_fh, points, ids=None) -> None:
    points = np.asarray(points, dtype=float)
    ids = list(ids) if ids is not None else _default_ids(len(points))
    with _open_out(path_or_fh) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPHERE_HEADER)
        for i, p in zip(ids, points):
            w.writerow([i, *map(_fmt, p)])


def save_so3_csv(path_or_fh, points, ids=None) -> None:
    points = np.asarray(points, dtype=float)
    ids = list(ids) if ids is not None else _default_ids(len(points))
    with _open_out(path_or_fh) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SO3_HEADER)
        for i, R in zip(ids, points):
            w.writerow([i, "matrix", *map(_fmt, R.reshape(-1))])


def save_points_csv(path_or_fh, manifold: str, points, ids=None) -> None:
    if manifold == "sphere":
        save_sphere_csv(path_or_fh, points, ids)
    else:
        save_so3_csv(path_or_fh, points, ids)


class _open_out:
    def __init__(self, target):
        self.target = target
        self.fh = None

    def __enter__(self):
        if hasattr(self.target, "write"):
            return self.target
        self.fh = open(self.target, "w", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not None:
            self.fh.close()


def pair_by_id(left: PointRecords, right: PointRecords, names=("x", "y")) -> PairedSample:
    """Pair two record sets by id, in the order of ``left``."""
    if left.manifold != right.manifold:
        raise DataFormatError(f"cannot pair {left.manifold} with {right.manifold} data")
    lid, rid = set(left.ids), set(right.ids)
    only_l = [i for i in left.ids if i not in rid]
    only_r = [i for i in right.ids if i not in lid]
    if only_l or only_r or len(left) != len(right):
        parts = [f"{len(left)} {names[0]} rows vs {len(right)} {names[1]} rows"]
        if only_l:
            parts.append(f"ids only in {names[0]}: {only_l}")
        if only_r:
            parts.append(f"ids only in {names[1]}: {only_r}")
        raise DataFormatError("id mismatch between files; " + "; ".join(parts))
    index = {i: k for k, i in enumerate(right.ids)}
    order = [index[i] for i in left.ids]
    return PairedSample(left.points, right.points[order], get_manifold(left.manifold))


def load_paired(path_x, path_y, *, lenient: bool = False, by_id: bool = True) -> PairedSample:
    x = load_points_csv(path_x, lenient=lenient)
    y = load_points_csv(path_y, lenient=lenient)
    if by_id:
        return pair_by_id(x, y)
    if len(x) != len(y):
        raise DataFormatError(f"files differ in length ({len(x)} vs {len(y)})")
    return PairedSample(x.points, y.points, get_manifold(x.manifold))


def load_vcg_dataset(path_f, path_mp, *, lenient: bool = False) -> PairedSample:
    """F-system and MP-system VCG directions, paired by subject id."""
    f = load_sphere_csv(path_f, lenient=lenient)
    mp = load_sphere_csv(path_mp, lenient=lenient)
    return pair_by_id(f, mp, names=("F-system", "MP-system"))


def dump_json(obj, fh) -> None:
    json.dump(obj, fh, indent=2, allow_nan=True)
    fh.write("\n")


def load_schema(name: str) -> dict:
    text = resources.files("riemann_dep").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
