"""XYZ geometries and CSV datasets."""
from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .problems.mlp import Dataset

_ENERGY = re.compile(r"energy\s*=\s*(\S+)", re.IGNORECASE)


def write_xyz(path, coordinates, energy=None, element="Ar", comment=""):
    """Write a cluster; the comment line carries ``energy=<value>``."""
    pos = np.asarray(coordinates, dtype=float).reshape(-1, 3)
    head = f"energy={energy!r}" if energy is not None else ""
    if comment:
        head = f"{head} {comment}".strip()
    lines = [str(len(pos)), head]
    lines += [f"{element} {x:.12f} {y:.12f} {z:.12f}" for x, y, z in pos]
    Path(path).write_text("\n".join(lines) + "\n")


def read_xyz(path):
    """Return ``(elements, positions (N, 3), energy or None)``."""
    lines = Path(path).read_text().splitlines()
    count = int(lines[0].split()[0])
    m = _ENERGY.search(lines[1]) if len(lines) > 1 else None
    energy = float(m.group(1)) if m else None
    elements, pos = [], []
    for row in lines[2 : 2 + count]:
        parts = row.split()
        elements.append(parts[0])
        pos.append([float(v) for v in parts[1:4]])
    if len(pos) != count:
        raise ValueError(f"{path}: header says {count} atoms, found {len(pos)}")
    return elements, np.array(pos), energy


def write_dataset_csv(path, data: Dataset):
    m = data.inputs.shape[1]
    cols = ["u"] if m == 1 else [f"u{i + 1}" for i in range(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols + ["d"])
        for u, d in zip(data.inputs, data.targets):
            w.writerow([repr(float(v)) for v in u] + [repr(float(d))])


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [r for r in rows[1:] if r]
    if header[-1].strip() != "d" or not header[0].strip().startswith("u"):
        raise ValueError(f"{path}: expected header 'u,d', got {','.join(header)}")
    arr = np.array(body, dtype=float)
    return Dataset(arr[:, :-1], arr[:, -1])
