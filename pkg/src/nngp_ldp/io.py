"""CSV/JSON export and import.

Floats are written with 17 significant digits so that round trips are
exact. Kernel CSVs start with one ``# {json}`` line holding the grid.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .operators import Grid, KernelGrid

FLOAT = "%.17g"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT % float(x)
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_table(path, rows, columns) -> Path:
    """Long-format CSV; an empty ``rows`` gives a header-only file."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])
    return path


def read_table(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _write_matrix(fh, M):
    for row in np.atleast_2d(M):
        fh.write(",".join(FLOAT % v for v in row) + "\n")


def grid_header(grid: Grid) -> dict:
    h = {"nodes": grid.nodes.tolist(), "weights": grid.weights.tolist()}
    if grid.axes is not None:
        h["axes"] = [a.tolist() for a in grid.axes]
    return h


def grid_from_header(h: dict) -> Grid:
    axes = tuple(np.array(a) for a in h["axes"]) if "axes" in h else None
    return Grid(np.array(h["nodes"]), np.array(h["weights"]), axes)


def write_kernel_csv(path, kernel: KernelGrid) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# " + json.dumps(grid_header(kernel.grid), separators=(",", ":")) + "\n")
        _write_matrix(fh, kernel.values)
    return path


def read_kernel_csv(path) -> KernelGrid:
    with Path(path).open(encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise InvalidArgument(f"{path}: missing grid header line")
        grid = grid_from_header(json.loads(first[1:]))
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    return KernelGrid(grid, values)


def write_matrix_csv(path, M) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        _write_matrix(fh, M)
    return path


def write_field_csv(path, sample) -> Path:
    """Rows are samples, columns grid nodes."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(f"node{i}" for i in range(sample.grid.n)) + "\n")
        _write_matrix(fh, sample.values)
    return path


def write_chain(directory, chain) -> Path:
    """One kernel CSV per layer plus ``chain.json`` metadata."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for layer, K in enumerate(chain.operators, start=2):
        write_kernel_csv(d / f"kernel_layer{layer}.csv", K.kernel_grid())
    write_json(d / "chain.json", {"N": chain.N, "widths": list(chain.widths),
                                  "seed": chain.seed.to_dict(), "network": chain.config.to_dict()})
    return d


def write_rate(stem, est) -> tuple[Path, Path]:
    """``<stem>.json`` with the estimate and ``<stem>_dual.csv`` with the dual matrix."""
    stem = Path(stem)
    dual = stem.with_name(stem.name + "_dual.csv")
    d = est.to_dict()
    d["dual_csv"] = dual.name
    write_json(stem.with_suffix(".json"), d)
    write_matrix_csv(dual, est.dual.sym)
    return stem.with_suffix(".json"), dual


def write_posterior(stem, ens) -> tuple[Path, Path]:
    stem = Path(stem)
    weights = stem.with_name(stem.name + "_weights.csv")
    meta = ens.to_dict()
    meta["weights_csv"] = weights.name
    write_json(stem.with_suffix(".json"), meta)
    rows = [{"sample": i, "log_weight": lw, "weight": w}
            for i, (lw, w) in enumerate(zip(ens.log_weights, ens.weights))]
    write_table(weights, rows, ["sample", "log_weight", "weight"])
    return stem.with_suffix(".json"), weights
