"""Class-per-directory dataset catalogs with train/val/test splits.

Layout on disk: root/<split>/<class_name>/<index>.ppm. Class labels come
from directory names sorted lexicographically, which fixes the
label-to-index map independently of scan order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyDataset
from .imaging import ChannelMode, extract_channel, read_image

SPLITS = ("train", "val", "test")


def worker_count() -> int:
    """Image-loading worker cap from SPECKLE_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("SPECKLE_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ImageRecord:
    path: Path
    class_name: str
    label: int
    split: str


@dataclass
class DatasetIndex:
    root: Path
    classes: list[str]
    records: list[ImageRecord]

    def __len__(self):
        return len(self.records)

    def split(self, name: str) -> "DatasetIndex":
        recs = [r for r in self.records if r.split == name]
        return DatasetIndex(root=self.root, classes=self.classes, records=recs)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)


def load_dataset(root) -> DatasetIndex:
    """Scan a dataset tree; records come back in (split, class, name) order."""
    root = Path(root)
    class_names: set[str] = set()
    for split in SPLITS:
        base = root / split
        if base.is_dir():
            class_names.update(p.name for p in base.iterdir() if p.is_dir())
    classes = sorted(class_names)
    if not classes:
        raise EmptyDataset(f"no class directories under {root}")
    label = {name: i for i, name in enumerate(classes)}
    records = []
    for split in SPLITS:
        for name in classes:
            class_dir = root / split / name
            if not class_dir.is_dir():
                continue
            for path in sorted(class_dir.iterdir()):
                if path.suffix.lower() in (".ppm", ".pgm", ".png"):
                    records.append(ImageRecord(path=path, class_name=name,
                                               label=label[name], split=split))
    if not records:
        raise EmptyDataset(f"no images under {root}")
    return DatasetIndex(root=root, classes=classes, records=records)


def load_plane(record: ImageRecord, mode: ChannelMode) -> np.ndarray:
    """Decode one record and extract its channel plane, float32 in [0, 1]."""
    return extract_channel(read_image(record.path), mode)


def load_planes(index: DatasetIndex, mode: ChannelMode) -> np.ndarray:
    """Stack every record's plane into one (n, h, w, c) float32 batch.

    Decoding may run on SPECKLE_THREADS workers; results are collected in
    record order, so the batch is identical for any worker count.
    """
    if not index.records:
        raise EmptyDataset("dataset split holds no records")
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            planes = list(pool.map(lambda r: load_plane(r, mode),
                                   index.records))
    else:
        planes = [load_plane(r, mode) for r in index.records]
    return np.stack(planes)
