"""On-disk formats for chains and reports.

Sample tables are delimited text with header ``lp,w0,w1,...``, one retained
sample per row, serialized with 17 significant digits so float64 values
round-trip bit-exact. Each table has a JSON metadata sidecar
(``<name>.meta.json``) carrying seed and acceptance bookkeeping. All files
are written atomically (temp file in the target directory, then rename),
and serialization never embeds timestamps, so identical runs produce
identical bytes.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import DataError
from .samplers import Chain

FLOAT_FORMAT = "%.17g"


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, dump_json(obj))


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def format_sample_table(chain: Chain) -> str:
    header = "lp," + ",".join(f"w{i}" for i in range(chain.dim))
    lines = [header]
    for lp, row in zip(chain.log_posts, chain.samples):
        lines.append(FLOAT_FORMAT % lp + "," + ",".join(FLOAT_FORMAT % v for v in row))
    return "\n".join(lines) + "\n"


def chain_meta(chain: Chain) -> dict:
    return {
        "seed": chain.seed,
        "n_proposed": chain.n_proposed,
        "n_accepted": chain.n_accepted,
        "n_divergent": chain.n_divergent,
        "n_retained": chain.n_retained,
        "dim": chain.dim,
    }


def meta_path(table_path) -> Path:
    table_path = Path(table_path)
    return table_path.with_name(table_path.stem + ".meta.json")


def write_chain(path, chain: Chain) -> None:
    """Write the sample table at ``path`` and its ``.meta.json`` sidecar."""
    atomic_write_text(path, format_sample_table(chain))
    write_json(meta_path(path), chain_meta(chain))


def read_chain(path) -> Chain:
    """Reconstruct a chain from a sample table plus metadata sidecar."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if not lines:
        raise DataError(f"{path}:1: empty sample table")
    header = lines[0].split(",")
    dim = len(header) - 1
    if dim < 1 or header != ["lp"] + [f"w{i}" for i in range(dim)]:
        raise DataError(f"{path}:1: header must be 'lp,w0,w1,...'")
    samples = np.empty((len(lines) - 1, dim))
    log_posts = np.empty(len(lines) - 1)
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != dim + 1:
            raise DataError(f"{path}:{i + 2}: expected {dim + 1} cells, got {len(cells)}")
        try:
            log_posts[i] = float(cells[0])
            samples[i] = [float(c) for c in cells[1:]]
        except ValueError:
            raise DataError(f"{path}:{i + 2}: non-numeric cell") from None
    meta = read_json(meta_path(path))
    required = {"seed", "n_proposed", "n_accepted", "n_divergent", "n_retained", "dim"}
    missing = required - set(meta)
    if missing:
        raise DataError(f"{meta_path(path)}: missing fields {sorted(missing)}")
    if meta["n_retained"] != samples.shape[0] or meta["dim"] != dim:
        raise DataError(
            f"{path}: table is {samples.shape[0]}x{dim} but metadata says "
            f"{meta['n_retained']}x{meta['dim']}"
        )
    return Chain(
        samples=samples,
        log_posts=log_posts,
        n_proposed=meta["n_proposed"],
        n_accepted=meta["n_accepted"],
        seed=meta["seed"],
        n_divergent=meta["n_divergent"],
    )


def chain_table_paths(run_dir) -> list[Path]:
    """Sorted chain sample tables inside ``<run_dir>/chains``."""
    chains_dir = Path(run_dir) / "chains"
    if not chains_dir.is_dir():
        raise DataError(f"{chains_dir}: not a directory")
    paths = sorted(p for p in chains_dir.glob("chain_*.csv"))
    if not paths:
        raise DataError(f"{chains_dir}: no chain tables (chain_*.csv) found")
    return paths
