"""Labeled RB corpora: generate, simulate, label with d-R², filter by depth, split, persist."""
from __future__ import annotations

import json
import os
import tempfile
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import rng
from .circuit import Circuit, depth, emit_circuit, parse_circuit
from .devices import Device, load_device
from .errors import ConfigError, InputFormatError
from .metrics import align, all_zero_counts, d_r2, expected_ideal_counts
from .noise import NoiseModel
from .rb import RBSpec, generate_rb_circuit
from .simulator import run_ideal, run_noisy
from .tokenizer import labelize
from .transpile import IBM_BASIS, Layout, decompose_to_basis

RECORD_FIELDS = ("id", "circuit", "device", "depth", "n_qubits_active", "placement", "seed", "shots", "label")


@dataclass(frozen=True)
class DatasetConfig:
    device: str = "nairobi"
    n_records: int = 2000
    seq_len: tuple = (1, 5)
    active_qubits: Optional[tuple] = None  # inclusive range, default (1, device width)
    shots: int = 1024
    depth_cutoff: int = 500
    seed: int = 0
    split: tuple = (0.7, 0.2, 0.1)
    gates_per_element: Optional[tuple] = None
    noise_multiplier: float = 1.0
    transpile: bool = True

    def __post_init__(self):
        if self.n_records < 1:
            raise ConfigError("n_records must be >= 1")
        if self.depth_cutoff < 1:
            raise ConfigError("depth_cutoff must be >= 1")
        if not np.isclose(sum(self.split), 1.0) or any(r < 0 for r in self.split) or len(self.split) != 3:
            raise ConfigError(f"split ratios {self.split} must be three non-negative numbers summing to 1")
        lo, hi = self.seq_len
        if not 1 <= lo <= hi:
            raise ConfigError("seq_len range must satisfy 1 <= lo <= hi")

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown dataset config keys {sorted(unknown)}")
        data = dict(data)
        for key in ("seq_len", "active_qubits", "split", "gates_per_element"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


def label_record(c: Circuit, nm: NoiseModel, shots: int, seed: int, identity: bool = False) -> float:
    """d-R² of one noisy run against the expected ideal counts.

    ``identity=True`` declares an RB circuit, whose ideal counts are all shots on
    ``0...0`` and need no simulation.
    """
    noisy = run_noisy(c, nm, shots, seed)
    if identity:
        ideal = all_zero_counts(noisy.width, shots)
    else:
        ideal = expected_ideal_counts(run_ideal(c), shots)
    return d_r2(align(ideal, noisy))


def _record_circuit(cfg: DatasetConfig, device: Device, index: int):
    seed_i = rng.derive_seed(cfg.seed, index)
    gen = np.random.default_rng(seed_i)
    lo, hi = cfg.active_qubits or (1, device.width)
    k = int(gen.integers(lo, hi + 1))
    seq_len = int(gen.integers(cfg.seq_len[0], cfg.seq_len[1] + 1))
    placement = tuple(int(q) for q in gen.choice(device.width, size=k, replace=False))
    spec = RBSpec(
        n_active=k,
        seq_len=seq_len,
        seed=rng.derive_seed(seed_i, 1),
        gates_per_element=cfg.gates_per_element,
        placement=Layout.from_sequence(placement),
        device_width=device.width,
        coupling_edges=tuple(device.coupling.sorted_edges()),
    )
    circuit = generate_rb_circuit(spec)
    if cfg.transpile:
        circuit = decompose_to_basis(circuit, IBM_BASIS)
    return circuit, k, placement, rng.derive_seed(seed_i, 2)


def generate_records(cfg: DatasetConfig, device: Optional[Device] = None, progress=None) -> list[dict]:
    device = load_device(device or cfg.device)
    nm = device.noise.scaled(cfg.noise_multiplier)
    records = []
    for i in range(cfg.n_records):
        circuit, k, placement, sim_seed = _record_circuit(cfg, device, i)
        d = depth(circuit)
        if d <= cfg.depth_cutoff:
            label = label_record(circuit, nm, cfg.shots, sim_seed, identity=True)
            records.append({
                "id": i,
                "circuit": emit_circuit(circuit),
                "device": device.name,
                "depth": d,
                "n_qubits_active": k,
                "placement": list(placement),
                "seed": sim_seed,
                "shots": cfg.shots,
                "label": label,
            })
        if progress is not None:
            progress(i + 1, cfg.n_records)
    return records


def dataset_stats(records: Sequence[dict], n_generated: int, device_width: int, n_bins: int = 10) -> dict:
    """Gate-label histogram and mean label per depth decile."""
    hist: Counter = Counter()
    for rec in records:
        for lane in labelize(parse_circuit(rec["circuit"]), device_width).labels:
            hist.update(lane)
    depths = np.array([r["depth"] for r in records])
    labels = np.array([r["label"] for r in records])
    bins = []
    if len(records):
        order = np.argsort(depths, kind="stable")
        for chunk in np.array_split(order, min(n_bins, len(records))):
            bins.append({
                "depth_min": int(depths[chunk].min()),
                "depth_max": int(depths[chunk].max()),
                "mean_label": float(labels[chunk].mean()),
                "n": int(chunk.size),
            })
    return {
        "n_generated": n_generated,
        "n_retained": len(records),
        "label_histogram": dict(sorted(hist.items(), key=lambda kv: (-kv[1], kv[0]))),
        "depth_vs_fidelity": bins,
    }


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def dumps_records(records: Sequence[dict]) -> str:
    return "".join(json.dumps({k: rec[k] for k in RECORD_FIELDS}) + "\n" for rec in records)


def save_records(records: Sequence[dict], path) -> None:
    _atomic_write(path, dumps_records(records))


def load_records(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"{path}:{lineno}: {exc}") from None
            missing = set(RECORD_FIELDS) - set(rec)
            if missing:
                raise InputFormatError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            records.append(rec)
    return records


def build_dataset(cfg: DatasetConfig, out_path, stats_path=None, device: Optional[Device] = None, progress=None) -> dict:
    """Write the JSON-lines dataset (and optionally its stats) and return the stats."""
    device = load_device(device or cfg.device)
    records = generate_records(cfg, device, progress)
    if not records:
        raise InputFormatError(f"no record survived the depth cutoff of {cfg.depth_cutoff}")
    stats = dataset_stats(records, cfg.n_records, device.width)
    save_records(records, out_path)
    if stats_path is not None:
        _atomic_write(stats_path, json.dumps(stats, indent=1) + "\n")
    return stats


def _partition_sizes(n: int, ratios) -> list[int]:
    exact = [r * n for r in ratios]
    sizes = [int(np.floor(x)) for x in exact]
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split(records: Sequence, ratios=(0.7, 0.2, 0.1), seed: int = 0):
    """Shuffle with ``seed`` and cut into (train, val, test)."""
    if not np.isclose(sum(ratios), 1.0):
        raise ConfigError("split ratios must sum to 1")
    sizes = _partition_sizes(len(records), ratios)
    if any(s == 0 for s in sizes):
        raise ConfigError(f"split of {len(records)} records by {tuple(ratios)} leaves an empty partition")
    perm = np.random.default_rng(seed).permutation(len(records))
    parts, start = [], 0
    for s in sizes:
        parts.append([records[i] for i in perm[start:start + s]])
        start += s
    return tuple(parts)


def circuits_and_labels(records: Sequence[dict]):
    return [parse_circuit(r["circuit"]) for r in records], np.array([r["label"] for r in records], dtype=np.float64)
