"""Loading and normalizing UCR-format univariate classification datasets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DatasetFormatError, EmptyDatasetError, LabelError

TRAIN = "train"
TEST = "test"


@dataclass(frozen=True)
class TimeSeriesDataset:
    """N labelled series of a common length.

    ``labels`` are contiguous integers ``1..class_count``; ``raw_labels``
    holds the original label values in the order of their assigned codes, so
    ``raw_labels[c - 1]`` is the raw label of class ``c``.
    """

    series: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = ""
    split: str = TRAIN
    raw_labels: tuple = field(default=())
    normalized: bool = False

    @property
    def n_samples(self) -> int:
        return self.series.shape[0]

    @property
    def series_length(self) -> int:
        return self.series.shape[1]

    @property
    def label_map(self) -> dict:
        return {raw: code for code, raw in enumerate(self.raw_labels, start=1)}

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count + 1)[1:]


def _detect_delimiter(line: str):
    if "\t" in line:
        return "\t"
    if "," in line:
        return ","
    return None  # whitespace


def _parse_label(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DatasetFormatError(f"label {token!r} is not numeric", line_no) from None
    if not math.isfinite(value):
        raise DatasetFormatError(f"label {token!r} is not finite", line_no)
    # 1.0 and 1 are the same class
    return int(value) if value.is_integer() else value


def read_ucr_file(path):
    """Parse a UCR flat file into ``(raw_labels, values)`` without remapping."""
    path = Path(path)
    text = path.read_text(encoding="utf-8-sig")
    lines = [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), start=1)]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines:
        raise EmptyDatasetError(f"{path} contains no examples")

    delimiter = _detect_delimiter(lines[0][1])
    raw_labels = []
    rows = []
    width = None
    for line_no, line in lines:
        tokens = [t.strip() for t in line.split(delimiter)]
        if len(tokens) < 2:
            raise DatasetFormatError("expected a label followed by at least one value", line_no)
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise DatasetFormatError(
                f"ragged row: {len(tokens) - 1} values, expected {width - 1}", line_no
            )
        raw_labels.append(_parse_label(tokens[0], line_no))
        try:
            values = [float(t) for t in tokens[1:]]
        except ValueError:
            raise DatasetFormatError("non-numeric value", line_no) from None
        if not all(math.isfinite(v) for v in values):
            raise DatasetFormatError("missing or non-finite value", line_no)
        rows.append(values)
    return raw_labels, np.asarray(rows, dtype=np.float64)


def znormalize(dataset: TimeSeriesDataset) -> TimeSeriesDataset:
    """Scale each series to zero mean and unit population standard deviation.

    Constant series become all zeros.
    """
    x = dataset.series
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    std = np.sqrt((centered**2).mean(axis=1, keepdims=True))
    flat = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    out = np.divide(centered, std, out=np.zeros_like(centered), where=~flat)
    out[flat[:, 0]] = 0.0
    return replace(dataset, series=out, normalized=True)


def load_ucr_dataset(
    path,
    split: str = TRAIN,
    *,
    label_map: dict | None = None,
    normalize: bool = True,
    name: str | None = None,
) -> TimeSeriesDataset:
    """Load one split of a UCR dataset.

    For a test split pass the training set's ``label_map`` so codes agree
    across splits; labels absent from it raise :class:`LabelError`.  Without
    a map, codes are assigned in ascending order of the distinct raw labels.
    """
    if split not in (TRAIN, TEST):
        raise ValueError(f"split must be {TRAIN!r} or {TEST!r}, got {split!r}")
    raw, values = read_ucr_file(path)

    if label_map is None:
        distinct = sorted(set(raw))
        label_map = {r: c for c, r in enumerate(distinct, start=1)}
    unseen = sorted({r for r in raw if r not in label_map}, key=float)
    if unseen:
        raise LabelError(f"labels {unseen} in {path} are not in the training label map")

    labels = np.array([label_map[r] for r in raw], dtype=np.int64)
    raw_labels = tuple(sorted(label_map, key=label_map.__getitem__))
    if name is None:
        name = Path(path).stem
        for suffix in ("_TRAIN", "_TEST"):
            if name.upper().endswith(suffix):
                name = name[: -len(suffix)]

    dataset = TimeSeriesDataset(
        series=values,
        labels=labels,
        class_count=len(label_map),
        name=name,
        split=split,
        raw_labels=raw_labels,
    )
    if split == TRAIN:
        missing = np.flatnonzero(dataset.class_counts() == 0)
        if missing.size:
            raise LabelError(f"classes {list(missing + 1)} have no training examples")
    return znormalize(dataset) if normalize else dataset


def find_ucr_pair(root, name: str | None = None):
    """Locate ``<name>_TRAIN`` / ``<name>_TEST`` files.

    ``root`` may be a directory holding the pair (optionally in a ``<name>/``
    subdirectory) or a path prefix such as ``data/GunPoint``.
    """
    root = Path(root)
    if root.is_dir():
        if name is None:
            trains = sorted(root.glob("*_TRAIN.*"))
            name = trains[0].name.split("_TRAIN")[0] if len(trains) == 1 else root.name
        prefixes = [root / name, root / name / name]
    else:
        prefixes = [root]
    for prefix in prefixes:
        for ext in (".tsv", ".txt", ".csv", ""):
            train = prefix.with_name(prefix.name + "_TRAIN" + ext)
            test = prefix.with_name(prefix.name + "_TEST" + ext)
            if train.is_file() and test.is_file():
                return train, test
    raise FileNotFoundError(f"no *_TRAIN/*_TEST pair found for {root}")


def load_ucr_pair(root, *, normalize: bool = True, name: str | None = None):
    """Load the train and test splits of a dataset with a shared label map."""
    train_path, test_path = find_ucr_pair(root, name)
    train = load_ucr_dataset(train_path, TRAIN, normalize=normalize)
    test = load_ucr_dataset(
        test_path, TEST, label_map=train.label_map, normalize=normalize, name=train.name
    )
    return train, test
