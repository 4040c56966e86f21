"""Spike-raster datasets: a synthetic frequency-discrimination task, channel
binning, a plain-text raster format and deterministic splits."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, RasterParseError

__all__ = [
    "SpikeRaster",
    "Dataset",
    "splitmix64",
    "sample_seeds",
    "generate_synthetic",
    "bin_channels",
    "write_raster",
    "read_raster",
    "format_raster",
    "parse_raster",
    "save_dataset",
    "load_dataset",
    "HEADER_MAGIC",
]

HEADER_MAGIC = "FITS-RASTER v1"
_MASK64 = (1 << 64) - 1


@dataclass
class SpikeRaster:
    """Binary ``T x N`` spike matrix with its step size and class label.

    ``dt_text`` keeps the decimal spelling of ``dt`` read from a file so that
    it is written back unchanged.
    """

    spikes: np.ndarray
    dt: float
    label: int = 0
    dt_text: str | None = field(default=None, compare=False)

    def __post_init__(self):
        self.spikes = np.asarray(self.spikes)
        if self.spikes.ndim != 2:
            raise ConfigurationError("spikes must be a T x N matrix")
        if not np.all((self.spikes == 0) | (self.spikes == 1)):
            raise ConfigurationError("spikes must be binary")
        self.spikes = self.spikes.astype(np.uint8)
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")

    @property
    def t_bins(self):
        return self.spikes.shape[0]

    @property
    def channels(self):
        return self.spikes.shape[1]

    def __eq__(self, other):
        return (isinstance(other, SpikeRaster) and self.dt == other.dt and self.label == other.label
                and np.array_equal(self.spikes, other.spikes))


def splitmix64(state):
    """One step of SplitMix64; returns ``(next_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def sample_seeds(seed, count):
    """Per-sample seeds drawn from a SplitMix64 stream started at ``seed``."""
    state = int(seed) & _MASK64
    out = []
    for _ in range(count):
        state, z = splitmix64(state)
        out.append(z)
    return out


@dataclass
class Dataset:
    """In-memory dataset. ``x`` has shape ``(S, T, N)``; ``splits`` maps split
    names to index arrays into ``x``."""

    x: np.ndarray
    y: np.ndarray
    dt: float
    n_classes: int
    splits: dict
    generator: dict = field(default_factory=dict)

    def split(self, name):
        idx = self.splits[name]
        return self.x[idx], self.y[idx]

    def manifest(self):
        return {
            "classes": self.n_classes,
            "counts": {k: int(len(v)) for k, v in self.splits.items()},
            "dt": self.dt,
            "T": int(self.x.shape[1]),
            "channels": int(self.x.shape[2]),
            "generator": self.generator,
        }


def generate_synthetic(classes, channels, t_bins, dt, base_rate, depth, seed,
                       samples_per_class=None, split_counts=(64, 16, 16)):
    """Rate-modulated spike trains whose modulation frequency is the label.

    Channel ``n`` of a class-``c`` sample fires at step ``k`` with
    probability ``clip(base_rate * (1 + depth * sin(2 pi f_c k dt + phi_n)), 0, 1)``.
    The channel phases ``phi_n`` are fixed by ``seed``; every sample draws its
    spikes from its own SplitMix64-derived seed.

    ``split_counts`` gives samples per class for train/val/test. Splits are
    disjoint by construction.
    """
    classes = [float(f) for f in classes]
    nyquist = 1.0 / (2.0 * dt)
    for f in classes:
        if not 0 <= f < nyquist:
            raise ConfigurationError(f"class frequency {f} Hz is not below Nyquist {nyquist} Hz")
    if not 0 <= depth <= 1:
        raise ConfigurationError("depth must lie in [0, 1]")
    if samples_per_class is not None:
        split_counts = (samples_per_class, 0, 0)
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=channels)
    k = np.arange(t_bins)[:, None]
    probs = [np.clip(base_rate * (1 + depth * np.sin(2 * math.pi * f * k * dt + phases[None, :])), 0, 1)
             for f in classes]

    names = ("train", "val", "test")
    labels = []
    split_of = []
    for si, count in enumerate(split_counts):
        for c in range(len(classes)):
            labels.extend([c] * count)
            split_of.extend([si] * count)
    total = len(labels)
    seeds = sample_seeds(seed, total)
    x = np.empty((total, t_bins, channels), dtype=np.uint8)
    for i, (c, s) in enumerate(zip(labels, seeds)):
        x[i] = np.random.default_rng(s).random((t_bins, channels)) < probs[c]
    split_of = np.array(split_of)
    splits = {n: np.flatnonzero(split_of == si) for si, n in enumerate(names) if split_counts[si] > 0}
    gen = dict(kind="synthetic", classes=classes, channels=channels, T=t_bins, dt=dt,
               base_rate=base_rate, depth=depth, seed=int(seed), split_counts=list(split_counts))
    return Dataset(x, np.array(labels, dtype=np.int64), dt, len(classes), splits, gen)


def bin_channels(r: SpikeRaster, group, reduction="or"):
    """Merge consecutive groups of ``group`` channels.

    ``"or"`` marks a bin active if any member spiked; ``"clip"`` sums and
    clips to 1 (identical for binary input, kept for configurability).
    Remainder channels are dropped with a warning.
    """
    if group <= 0:
        raise ConfigurationError("group must be positive")
    n_out = r.channels // group
    rem = r.channels - n_out * group
    if rem:
        warnings.warn(f"dropping {rem} trailing channels not divisible by group {group}")
    blocks = r.spikes[:, : n_out * group].reshape(r.t_bins, n_out, group)
    if reduction == "or":
        out = blocks.any(axis=2)
    elif reduction == "clip":
        out = np.minimum(blocks.sum(axis=2), 1)
    else:
        raise ConfigurationError(f"unknown reduction {reduction!r}")
    return SpikeRaster(out.astype(np.uint8), r.dt, r.label, r.dt_text)


def format_raster(r: SpikeRaster):
    dt_text = r.dt_text if r.dt_text is not None else repr(float(r.dt))
    lines = [f"{HEADER_MAGIC} T={r.t_bins} N={r.channels} dt={dt_text} label={int(r.label)}"]
    lines.extend("".join("1" if b else "0" for b in row) for row in r.spikes)
    return "\n".join(lines) + "\n"


def parse_raster(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise RasterParseError("empty file", 1)
    head = lines[0]
    if not head.startswith(HEADER_MAGIC + " "):
        raise RasterParseError(f"expected header starting with {HEADER_MAGIC!r}", 1)
    fields = {}
    for tok in head[len(HEADER_MAGIC) + 1:].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise RasterParseError(f"malformed header field {tok!r}", 1)
        fields[key] = val
    if set(fields) != {"T", "N", "dt", "label"}:
        raise RasterParseError(f"header needs T, N, dt, label; got {sorted(fields)}", 1)
    try:
        t_bins, n = int(fields["T"]), int(fields["N"])
        dt = float(fields["dt"])
        label = int(fields["label"])
    except ValueError as exc:
        raise RasterParseError(f"bad header value: {exc}", 1) from None
    if t_bins < 0 or n < 0:
        raise RasterParseError("T and N must be nonnegative", 1)
    if not (math.isfinite(dt) and dt > 0):
        raise RasterParseError("dt must be a positive decimal", 1)
    body = lines[1:]
    if len(body) < t_bins:
        raise RasterParseError(f"missing row {len(body) + 1} of {t_bins}", len(body) + 2)
    if len(body) > t_bins:
        raise RasterParseError(f"unexpected extra row after {t_bins} rows", t_bins + 2)
    spikes = np.zeros((t_bins, n), dtype=np.uint8)
    for i, row in enumerate(body):
        if len(row) != n:
            raise RasterParseError(f"row has {len(row)} characters, expected {n}", i + 2)
        if row.strip("01"):
            raise RasterParseError("row contains characters other than 0 and 1", i + 2)
        spikes[i] = np.frombuffer(row.encode(), dtype=np.uint8) - ord("0")
    return SpikeRaster(spikes, dt, label, fields["dt"])


def write_raster(r: SpikeRaster, path):
    Path(path).write_text(format_raster(r))


def read_raster(path):
    return parse_raster(Path(path).read_text())


def save_dataset(ds: Dataset, directory):
    """Write rasters, ``labels.csv`` and ``manifest.json`` under ``directory``."""
    root = Path(directory)
    (root / "rasters").mkdir(parents=True, exist_ok=True)
    rows = []
    for name, idx in ds.splits.items():
        for j, i in enumerate(idx):
            fname = f"rasters/{name}_{j:05d}.txt"
            write_raster(SpikeRaster(ds.x[i], ds.dt, int(ds.y[i])), root / fname)
            rows.append((fname, name, int(ds.y[i])))
    with open(root / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["file", "split", "label"])
        w.writerows(rows)
    (root / "manifest.json").write_text(json.dumps(ds.manifest(), indent=2, sort_keys=True) + "\n")


def load_dataset(directory):
    root = Path(directory)
    man = json.loads((root / "manifest.json").read_text())
    with open(root / "labels.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    xs, ys, split_of = [], [], []
    for row in rows:
        r = read_raster(root / row["file"])
        if int(row["label"]) != r.label:
            raise ConfigurationError(f"label mismatch for {row['file']}")
        xs.append(r.spikes)
        ys.append(r.label)
        split_of.append(row["split"])
    split_of = np.array(split_of)
    splits = {name: np.flatnonzero(split_of == name) for name in dict.fromkeys(split_of)}
    for name, count in man["counts"].items():
        if len(splits.get(name, ())) != count:
            raise ConfigurationError(f"manifest lists {count} {name} samples, found {len(splits.get(name, ()))}")
    x = np.stack(xs) if xs else np.zeros((0, man["T"], man["channels"]), np.uint8)
    return Dataset(x, np.array(ys, dtype=np.int64), float(man["dt"]), int(man["classes"]), splits,
                   man.get("generator", {}))
