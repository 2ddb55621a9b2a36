"""Minimal ASCII PLY reader/writer for xyz point clouds."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class PlyError(ValueError):
    pass


def read_ply(path) -> np.ndarray:
    """Return the ``(N, 3)`` vertex positions of an ASCII PLY file.

    Extra vertex properties (colour, normals, ...) are ignored; other
    elements are skipped.
    """
    path = Path(path)
    with path.open("r") as fh:
        if fh.readline().strip() != "ply":
            raise PlyError(f"{path}: missing 'ply' magic")
        elements = []  # (name, count, [property names])
        lineno = 1
        for line in fh:
            lineno += 1
            words = line.split()
            if not words or words[0] in ("comment", "obj_info"):
                continue
            if words[0] == "format":
                if len(words) < 2 or words[1] != "ascii":
                    raise PlyError(f"{path}:{lineno}: only ascii PLY is supported")
            elif words[0] == "element":
                try:
                    elements.append((words[1], int(words[2]), []))
                except (IndexError, ValueError):
                    raise PlyError(f"{path}:{lineno}: malformed element line") from None
            elif words[0] == "property":
                if not elements:
                    raise PlyError(f"{path}:{lineno}: property before element")
                if words[1] == "list":
                    elements[-1][2].append(("list", words[-1]))
                else:
                    elements[-1][2].append(("scalar", words[-1]))
            elif words[0] == "end_header":
                break
        else:
            raise PlyError(f"{path}: no end_header")

        points = None
        for name, count, props in elements:
            if name != "vertex":
                for _ in range(count):
                    fh.readline()
                    lineno += 1
                continue
            names = [p[1] for p in props]
            try:
                cols = [names.index(a) for a in ("x", "y", "z")]
            except ValueError:
                raise PlyError(f"{path}: vertex element lacks x/y/z") from None
            if any(kind == "list" for kind, _ in props):
                raise PlyError(f"{path}: list properties on vertices are unsupported")
            rows = []
            for k in range(count):
                line = fh.readline()
                lineno += 1
                parts = line.split()
                if len(parts) < len(props):
                    raise PlyError(f"{path}:{lineno}: truncated vertex row {k}")
                try:
                    rows.append([float(parts[c]) for c in cols])
                except ValueError:
                    raise PlyError(f"{path}:{lineno}: malformed number") from None
            points = np.array(rows, dtype=float).reshape(-1, 3)
            break
    if points is None:
        raise PlyError(f"{path}: no vertex element")
    return points


def write_ply(path, points) -> None:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    header = (
        "ply\nformat ascii 1.0\n"
        f"element vertex {len(points)}\n"
        "property float x\nproperty float y\nproperty float z\nend_header\n"
    )
    body = "".join(f"{x:.9g} {y:.9g} {z:.9g}\n" for x, y, z in points)
    Path(path).write_text(header + body)
