from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from hiervar.data import TEST, TRAIN, TimeSeriesDataset

# reproducible property runs
settings.register_profile("repo", derandomize=True, print_blob=True)
settings.load_profile("repo")

ROOT = Path(__file__).resolve().parents[1]
UCR_DIR = ROOT / "data" / "ucr"
UCR_NAMES = ("GunPoint", "ItalyPowerDemand", "ArrowHead", "Trace")

# filled by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


def ucr_prefixes(names=UCR_NAMES):
    return [UCR_DIR / n for n in names if (UCR_DIR / f"{n}_TRAIN.tsv").is_file()]


def bump_dataset(n_per_class=20, length=60, n_classes=2, seed=0, noise=0.3, split=TRAIN):
    """Class c carries a Gaussian bump at its own position, plus white noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    centers = np.linspace(0.2, 0.8, n_classes) * length
    rows, labels = [], []
    for c in range(n_classes):
        for _ in range(n_per_class):
            shift = rng.integers(-2, 3)
            rows.append(np.exp(-0.5 * ((t - centers[c] - shift) / 3.0) ** 2)
                        + noise * rng.standard_normal(length))
            labels.append(c + 1)
    order = rng.permutation(len(labels))
    return TimeSeriesDataset(
        series=np.asarray(rows)[order], labels=np.asarray(labels)[order],
        class_count=n_classes, name="bumps", split=split,
        raw_labels=tuple(range(1, n_classes + 1)),
    )


def bump_pair(n_train=20, n_test=30, **kw):
    seed = kw.pop("seed", 0)
    return (bump_dataset(n_train, seed=seed, **kw),
            bump_dataset(n_test, seed=seed + 1000, split=TEST, **kw))


def write_ucr(path, dataset, delimiter="\t"):
    with open(path, "w") as fh:
        for label, row in zip(dataset.labels, dataset.series):
            fh.write(delimiter.join([str(int(label))] + [repr(float(v)) for v in row]) + "\n")
    return path


@pytest.fixture
def bumps():
    return bump_pair()


@pytest.fixture
def ucr_files(tmp_path):
    train, test = bump_pair(n_train=15, n_test=20, length=40)
    return (write_ucr(tmp_path / "bumps_TRAIN.tsv", train),
            write_ucr(tmp_path / "bumps_TEST.tsv", test))
