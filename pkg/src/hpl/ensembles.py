"""Replica batches: generation across a worker pool, CSV/JSON persistence.

The batch format is shared by particle functionals and oracle generators:
a CSV with columns replica_id,t,value (values printed with 17 significant
digits) plus a .meta.json sidecar holding every config field, the master
seed, the truncation window, the step, and the package version.  Replica i
always draws from `replica_rng(seed, i)`, so outputs are byte-identical for
a given (config, seed) regardless of worker count or scheduling.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .rng import replica_rng

__all__ = ["ReplicaEnsemble", "generate_ensemble", "write_ensemble", "read_ensemble"]


@dataclass
class ReplicaEnsemble:
    t_grid: np.ndarray
    values: np.ndarray          # (replicas, len(t_grid))
    replica_ids: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.replica_ids = np.asarray(self.replica_ids, dtype=int)
        if self.values.shape != (len(self.replica_ids), len(self.t_grid)):
            raise ValueError("values must be (replicas, len(t_grid))")

    @property
    def n_replicas(self) -> int:
        return len(self.replica_ids)


def generate_ensemble(
    sample_fn,
    t_grid,
    replicas: int,
    seed: int,
    *,
    threads: int = 1,
    meta: dict | None = None,
) -> ReplicaEnsemble:
    """Run `sample_fn(replica_index, rng) -> values` across a thread pool.

    Results are gathered in replica order whatever the scheduling, and each
    replica uses its own counter-derived stream, so the ensemble is
    deterministic in (seed, replicas) alone.
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    threads = max(1, int(threads))

    def one(i: int):
        return np.asarray(sample_fn(i, replica_rng(seed, i)), dtype=float)

    if threads == 1:
        rows = [one(i) for i in range(replicas)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(replicas)))
    values = np.vstack(rows)
    info = {"seed": seed, "replicas": replicas, "version": __version__}
    if meta:
        info.update(meta)
    return ReplicaEnsemble(np.asarray(t_grid, float), values, np.arange(replicas), info)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_ensemble(ens: ReplicaEnsemble, path) -> Path:
    """CSV (replica_id,t,value) plus <path>.meta.json; returns the CSV path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["replica_id,t,value"]
    for i, rid in enumerate(ens.replica_ids):
        for j, t in enumerate(ens.t_grid):
            lines.append(f"{int(rid)},{_fmt(float(t))},{_fmt(float(ens.values[i, j]))}")
    path.write_text("\n".join(lines) + "\n")
    meta = dict(ens.meta)
    meta["t_grid"] = [float(t) for t in ens.t_grid]
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2, default=str) + "\n")
    return path


def read_ensemble(path) -> ReplicaEnsemble:
    path = Path(path)
    rows = path.read_text().strip().splitlines()
    if not rows or rows[0] != "replica_id,t,value":
        raise ValueError(f"{path} is not an ensemble CSV")
    rid, ts, vs = [], [], []
    for line in rows[1:]:
        a, b, c = line.split(",")
        rid.append(int(a))
        ts.append(float(b))
        vs.append(float(c))
    rid = np.asarray(rid)
    ts = np.asarray(ts)
    vs = np.asarray(vs)
    ids = np.unique(rid)
    t_grid = np.unique(ts)
    order_t = {t: j for j, t in enumerate(t_grid)}
    values = np.full((len(ids), len(t_grid)), np.nan)
    order_r = {r: i for i, r in enumerate(ids)}
    for r, t, v in zip(rid, ts, vs):
        values[order_r[r], order_t[t]] = v
    if np.any(np.isnan(values)):
        raise ValueError(f"{path} has missing (replica, t) cells")
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return ReplicaEnsemble(t_grid, values, ids, meta)
