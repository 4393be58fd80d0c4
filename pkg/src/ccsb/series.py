"""Uniformly recorded observable series and their CSV/JSON serialisation.

CSV layout: a header row, ``t`` first, then one column per real observable
and a ``name_re``/``name_im`` pair per complex observable.  Numbers are
written with ``repr`` so they round-trip bit-exactly and never depend on
locale.  Run metadata goes into a JSON sidecar next to the CSV.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


@dataclass
class TimeSeries:
    t: np.ndarray
    columns: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.columns = {k: np.asarray(v) for k, v in self.columns.items()}
        for name, col in self.columns.items():
            if col.shape[0] != self.t.size:
                raise ConfigurationError(
                    f"column {name!r} has {col.shape[0]} rows, expected {self.t.size}")
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ConfigurationError("sample times must be strictly increasing")

    def __len__(self):
        return self.t.size

    def __getitem__(self, name):
        return self.columns[name]

    @property
    def uniform(self):
        if self.t.size < 3:
            return True
        d = np.diff(self.t)
        return bool(np.all(np.abs(d - d.mean()) <= 1e-9 * max(abs(d.mean()), 1e-300)))

    @property
    def spacing(self):
        return float(np.mean(np.diff(self.t))) if self.t.size > 1 else 0.0

    def to_csv(self, path):
        path = Path(path)
        header = ["t"]
        cols = [self.t]
        for name, col in self.columns.items():
            if np.iscomplexobj(col):
                header += [f"{name}_re", f"{name}_im"]
                cols += [col.real, col.imag]
            else:
                header.append(name)
                cols.append(col)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in zip(*cols):
                writer.writerow([repr(float(v)) for v in row])
        return path

    def write(self, csv_path, extra_metadata=None):
        """Write the CSV and its JSON sidecar (same stem, ``.json``)."""
        csv_path = Path(csv_path)
        self.to_csv(csv_path)
        meta = dict(self.metadata)
        if extra_metadata:
            meta.update(extra_metadata)
        meta["columns"] = list(self.columns)
        csv_path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        return csv_path

    @classmethod
    def from_csv(cls, path, column_map=None):
        """Read a series; ``column_map`` renames source columns (after re/im pairing)."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
        data = np.array(rows, dtype=float).reshape(-1, len(header))
        if "t" not in header:
            raise ConfigurationError(f"{path}: no 't' column")
        t = data[:, header.index("t")]
        columns = {}
        for i, name in enumerate(header):
            if name == "t" or name.endswith("_im"):
                continue
            if name.endswith("_re") and name[:-3] + "_im" in header:
                j = header.index(name[:-3] + "_im")
                columns[name[:-3]] = data[:, i] + 1j * data[:, j]
            else:
                columns[name] = data[:, i]
        if column_map:
            columns = {column_map.get(k, k): v for k, v in columns.items()}
        meta_path = path.with_suffix(".json")
        metadata = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(t, columns, metadata)
