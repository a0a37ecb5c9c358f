"""Labeled feature tables for training and evaluation.

A dataset row is one video pair: its aggregated feature vector, the mean
opinion score, and a content-group id used to keep all variants of one
source clip on the same side of a train/test split.

On disk a dataset is two CSV files joined on video_id: a feature table
(header: video_id plus one column per feature) and a label table
(header: video_id, mos, content_id).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dataset:
    schema: tuple
    features: np.ndarray
    mos: np.ndarray
    content_ids: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.schema = tuple(self.schema)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.mos = np.asarray(self.mos, dtype=np.float64)
        self.content_ids = np.asarray(self.content_ids)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D (rows x features) array")
        n, d = self.features.shape
        if d != len(self.schema):
            raise ValueError(f"{d} feature columns but schema has {len(self.schema)} names")
        if self.mos.shape != (n,) or self.content_ids.shape != (n,):
            raise ValueError("mos/content_ids length must match the number of rows")

    def __len__(self):
        return self.features.shape[0]

    def select_features(self, schema) -> "Dataset":
        """Project onto a feature subset (order taken from `schema`)."""
        schema = tuple(schema)
        try:
            cols = [self.schema.index(name) for name in schema]
        except ValueError as err:
            raise KeyError(f"feature not in dataset: {err}") from None
        return Dataset(schema, self.features[:, cols], self.mos, self.content_ids, self.name)

    def select_rows(self, index) -> "Dataset":
        return Dataset(
            self.schema, self.features[index], self.mos[index], self.content_ids[index], self.name
        )


def _read_csv_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        return [h.strip() for h in header], [row for row in reader if row]


def load_dataset(features_csv, mos_csv, name: str = "") -> Dataset:
    """Join a per-video feature CSV with a MOS CSV on video_id."""
    fheader, frows = _read_csv_rows(features_csv)
    if not fheader or fheader[0] != "video_id":
        raise ValueError(f"{features_csv}: first column must be video_id, got {fheader[:1]}")
    schema = tuple(fheader[1:])
    if not schema:
        raise ValueError(f"{features_csv}: no feature columns")

    mheader, mrows = _read_csv_rows(mos_csv)
    expected = ["video_id", "mos", "content_id"]
    if [h.lower() for h in mheader[:3]] != expected:
        raise ValueError(f"{mos_csv}: header must start with {expected}, got {mheader}")
    labels = {}
    for i, row in enumerate(mrows, start=2):
        if len(row) < 3:
            raise ValueError(f"{mos_csv}: line {i}: expected 3 columns, got {len(row)}")
        labels[row[0].strip()] = (float(row[1]), row[2].strip())

    feats = []
    mos = []
    contents = []
    for i, row in enumerate(frows, start=2):
        if len(row) != len(fheader):
            raise ValueError(
                f"{features_csv}: line {i}: expected {len(fheader)} columns, got {len(row)}"
            )
        video_id = row[0].strip()
        if video_id not in labels:
            raise ValueError(f"{features_csv}: line {i}: no MOS entry for {video_id!r}")
        try:
            feats.append([float(v) for v in row[1:]])
        except ValueError as err:
            raise ValueError(f"{features_csv}: line {i}: {err}") from None
        score, content = labels[video_id]
        mos.append(score)
        contents.append(content)
    if not feats:
        raise ValueError(f"{features_csv}: no data rows")
    return Dataset(
        schema=schema,
        features=np.array(feats, dtype=np.float64),
        mos=np.array(mos, dtype=np.float64),
        content_ids=np.array(contents),
        name=name or str(features_csv),
    )
