"""Dataset manifest CSV handling.

Format: header ``id,path,label,split``, UTF-8, LF line endings, image paths
relative to the manifest's own directory.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path

HEADER = ["id", "path", "label", "split"]
VALID_SPLITS = {"train", "test", "all"}


@dataclass
class ManifestEntry:
    id: str
    path: str  # relative to the manifest file
    label: str
    split: str = "all"


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = Path(".")  # directory the relative paths resolve against

    def __len__(self) -> int:
        return len(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.root / entry.path

    def validate(self) -> None:
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest ids are not unique")
        for e in self.entries:
            if e.split not in VALID_SPLITS:
                raise ValueError(f"bad split {e.split!r} for id {e.id!r}")


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HEADER)
        for e in manifest.entries:
            w.writerow([e.id, e.path, e.label, e.split])


def read_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header != HEADER:
            raise ValueError(f"bad manifest header {header!r}, expected {HEADER!r}")
        entries = [ManifestEntry(*row) for row in r]
    m = DatasetManifest(entries=entries, root=path.parent if path.parent != Path("") else Path("."))
    m.validate()
    return m


def relpath_for(out_dir: Path, file_path: Path) -> str:
    return os.path.relpath(file_path, out_dir).replace(os.sep, "/")
