"""
Data loading utilities: CSV and IDX ingestion, standardization, splitting,
domain statistics, and synthetic benchmark datasets
"""
import csv
import logging
import struct
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from scipy.special import expit

from src.constants import FLOAT_FORMAT
from src.dataset import Dataset, DatasetSplit, DomainStats, Scaler, SplitSpec
from src.errors import InvalidArgumentError, ParseError

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def load_csv(path, target: Union[str, int]) -> Dataset:
    """Load a headered numeric CSV; every non-target column becomes a feature"""
    path = Path(path)
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        try:
            header = [name.strip() for name in next(reader)]
        except StopIteration:
            raise ParseError("file is empty", 1, str(path)) from None
        target_index = _target_index(header, target)
        rows = []
        for row_number, row in enumerate(reader, start=1):
            line = row_number + 1
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"row {row_number} has {len(row)} cells, header has {len(header)}",
                                 line, str(path))
            values = []
            for column, cell in zip(header, row):
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"row {row_number}, column '{column}': not a number: {cell!r}",
                                     line, str(path)) from None
                if not np.isfinite(value):
                    raise ParseError(f"row {row_number}, column '{column}': non-finite value {cell!r}",
                                     line, str(path))
                values.append(value)
            rows.append(values)
    if not rows:
        raise ParseError("no data rows", 2, str(path))

    table = np.array(rows)
    feature_columns = [i for i in range(len(header)) if i != target_index]
    dataset = Dataset(table[:, feature_columns], table[:, target_index],
                      [header[i] for i in feature_columns], header[target_index])
    logger.info("Loaded %d rows x %d features from %s", dataset.n_samples, dataset.n_features, path)
    return dataset


def _target_index(header: Sequence[str], target: Union[str, int]) -> int:
    if isinstance(target, int) or (isinstance(target, str) and target.lstrip("-").isdigit()
                                   and target not in header):
        index = int(target)
        if not -len(header) <= index < len(header):
            raise InvalidArgumentError(f"target index {index} out of range for {len(header)} columns")
        return index % len(header)
    if target not in header:
        raise InvalidArgumentError(f"target column '{target}' not found; available: {', '.join(header)}")
    return header.index(target)


def save_csv(dataset: Dataset, path):
    """Write features then the target column, 17 significant digits"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(list(dataset.feature_names) + [dataset.target_name])
        for features, target in zip(dataset.features, dataset.targets[:, 0]):
            writer.writerow([FLOAT_FORMAT % v for v in features] + [FLOAT_FORMAT % target])


def _read_idx(path: Path, magic: int, dims: int) -> np.ndarray:
    raw = path.read_bytes()
    header_size = 4 + 4 * dims
    if len(raw) < header_size:
        raise ParseError("truncated IDX header", path=str(path))
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise ParseError(f"bad magic number 0x{found:08x}, expected 0x{magic:08x}", path=str(path))
    shape = struct.unpack(">" + "I" * dims, raw[4:header_size])
    expected = int(np.prod(shape))
    if len(raw) - header_size < expected:
        raise ParseError(f"truncated IDX data: need {expected} bytes, found {len(raw) - header_size}",
                         path=str(path))
    return np.frombuffer(raw, dtype=np.uint8, count=expected, offset=header_size).reshape(shape)


def load_idx(images_path, labels_path, size: Optional[int] = None) -> Dataset:
    """Digit images scaled to [0, 1] with labels as real targets; optional size x size downsampling"""
    images = _read_idx(Path(images_path), IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(Path(labels_path), IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise ParseError(f"{images.shape[0]} images but {labels.shape[0]} labels", path=str(labels_path))
    if size is not None:
        images = np.stack([_downsample(image, size) for image in images])
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    dataset = Dataset(features, labels.astype(np.float64), target_name="digit")
    logger.info("Loaded %d images of %d pixels", dataset.n_samples, dataset.n_features)
    return dataset


def _downsample(image: np.ndarray, size: int) -> np.ndarray:
    picture = Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8))
    return np.asarray(picture.resize((size, size), Image.Resampling.BOX))


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path):
    """Write uint8 images (n x h x w) and labels in IDX layout"""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    Path(images_path).write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", IDX_LABELS_MAGIC, labels.size) + labels.tobytes())


def _column_stats(values: np.ndarray):
    return values.mean(axis=0), values.std(axis=0)  # population (ddof=0)


def standardize(dataset: Dataset, scale_targets: bool = True,
                fit_rows: Optional[np.ndarray] = None) -> Dataset:
    """Standardize features (and targets) with population statistics.

    Statistics come from the whole dataset unless fit_rows selects the rows
    to fit on (train-only scaling).
    """
    reference = dataset if fit_rows is None else dataset.subset(fit_rows)
    mean, std = _column_stats(reference.features)
    for name, value in zip(dataset.feature_names, std):
        if value == 0.0:
            raise InvalidArgumentError(f"column '{name}' has zero variance")
    target_mean, target_std = 0.0, 1.0
    if scale_targets:
        target_mean = float(reference.targets.mean())
        target_std = float(reference.targets.std())
        if target_std == 0.0:
            raise InvalidArgumentError(f"column '{dataset.target_name}' has zero variance")
    scaler = Scaler(mean, std, target_mean, target_std, scale_targets)
    return Dataset(scaler.transform_features(dataset.features), scaler.transform_targets(dataset.targets),
                   list(dataset.feature_names), dataset.target_name, scaler)


def split(dataset: Dataset, spec: SplitSpec) -> DatasetSplit:
    """Seeded shuffle; first spec.train rows train, floor(fraction * rest) validation, rest test"""
    n = dataset.n_samples
    spec.validate(n)
    order = np.random.default_rng(spec.seed).permutation(n)
    n_val = int(np.floor(spec.val_fraction * (n - spec.train)))
    train_index = order[:spec.train]
    validation_index = order[spec.train:spec.train + n_val]
    test_index = order[spec.train + n_val:]
    logger.info("Split %d rows: %d train, %d validation, %d test",
                n, train_index.size, validation_index.size, test_index.size)
    return DatasetSplit(dataset.subset(train_index), dataset.subset(validation_index),
                        dataset.subset(test_index), train_index, validation_index, test_index)


def domain_stats(dataset: Dataset) -> DomainStats:
    """Per-feature population mean/std, plus observed min/max"""
    if dataset.n_samples < 1:
        raise InvalidArgumentError("dataset is empty")
    mean, std = _column_stats(dataset.features)
    return DomainStats(mean, std, dataset.features.min(axis=0), dataset.features.max(axis=0))


def make_tabular_benchmark(n: int = 8192, d: int = 10, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Nonlinear regression on U[0,1]^d; five informative features, the rest are noise"""
    if d < 5:
        raise InvalidArgumentError("the tabular benchmark needs at least 5 features")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(n, d))
    y = (10.0 * np.sin(np.pi * x[:, 0] * x[:, 1]) + 20.0 * (x[:, 2] - 0.5) ** 2
         + 10.0 * x[:, 3] + 5.0 * x[:, 4])
    y = y + noise * rng.standard_normal(n)
    return Dataset(x, y, target_name="y")


def make_protein_benchmark(n: int = 3148, seed: int = 0) -> Dataset:
    """Amino-acid composition vectors (20 proportions summing to 1) with a solubility-like target in [0, 1]"""
    rng = np.random.default_rng(seed)
    concentration = rng.uniform(2.0, 12.0, size=20)
    x = rng.dirichlet(concentration, size=n)
    weights = rng.normal(0.0, 1.0, size=20)
    pairs = rng.normal(0.0, 0.5, size=(20, 20))
    centered = (x - x.mean(axis=0)) / x.std(axis=0)
    score = centered @ weights / np.sqrt(20) + np.einsum("ni,ij,nj->n", centered, pairs, centered) / 20
    y = expit(score + 0.1 * rng.standard_normal(n))
    names = list("ACDEFGHIKLMNPQRSTVWY")
    return Dataset(x, y, names, target_name="solubility")


def _digit_glyphs():
    font = ImageFont.load_default()
    glyphs = []
    for digit in range(10):
        canvas = Image.new("L", (16, 16), 0)
        draw = ImageDraw.Draw(canvas)
        left, top, right, bottom = draw.textbbox((0, 0), str(digit), font=font)
        origin = ((16 - (right - left)) / 2 - left, (16 - (bottom - top)) / 2 - top)
        draw.text(origin, str(digit), fill=255, font=font)
        glyphs.append(canvas.resize((20, 20), Image.Resampling.BILINEAR))
    return glyphs


def render_digits(labels: np.ndarray, seed: int = 0) -> np.ndarray:
    """28 x 28 uint8 renderings of each label with random shift and rotation"""
    rng = np.random.default_rng(seed)
    glyphs = _digit_glyphs()
    images = np.empty((len(labels), 28, 28), dtype=np.uint8)
    for index, label in enumerate(labels):
        canvas = Image.new("L", (28, 28), 0)
        dx, dy = rng.integers(-3, 4, size=2)
        canvas.paste(glyphs[int(label)], (4 + int(dx), 4 + int(dy)))
        canvas = canvas.rotate(float(rng.uniform(-15.0, 15.0)), resample=Image.Resampling.BILINEAR)
        pixels = np.asarray(canvas, dtype=np.float64) + rng.normal(0.0, 8.0, size=(28, 28))
        images[index] = np.clip(pixels, 0, 255).astype(np.uint8)
    return images


def make_digit_benchmark(n: int = 5000, size: int = 8, seed: int = 0) -> Dataset:
    """Rendered digits 0-9 downsampled to size x size, pixels in [0, 1], target = digit value"""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=n)
    images = render_digits(labels, seed=seed + 1)
    if size != 28:
        images = np.stack([_downsample(image, size) for image in images])
    features = images.reshape(n, -1).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.float64), target_name="digit")
