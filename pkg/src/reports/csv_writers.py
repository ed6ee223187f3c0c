"""
CSV writers for run artifacts: metrics, evaluations, synthetic-point dumps,
bound reports and split indices
"""
import csv
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from src.constants import (BOUNDS_HEADER, EVALUATE_HEADER, FLOAT_FORMAT, GEN_DUMP_COLUMNS, METRICS_HEADER,
                           SPLIT_HEADER)
from src.dataset import DatasetSplit
from src.systems.bounds import BoundReport
from src.systems.distillation import MetricsRow


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def _write(path, header: Sequence[str], rows: Iterable[Sequence], append: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "w" if fresh else "a", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if fresh:
            writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def write_metrics(path, rows: List[MetricsRow]) -> Path:
    """One row per epoch; blank cells for skipped branches and non-validation epochs"""
    return _write(path, METRICS_HEADER, ([r.epoch, r.loss_combined, r.loss_xg, r.loss_xp, r.alpha,
                                          r.val_rmse, r.wall_s] for r in rows))


def write_evaluation(path, model: str, split: str, metric: str, value: float) -> Path:
    """Append one evaluation row"""
    return _write(path, EVALUATE_HEADER, [[model, split, metric, float(value)]], append=True)


def gen_dump_header(d: int) -> List[str]:
    return [f"x{i}" for i in range(d)] + GEN_DUMP_COLUMNS


def gen_dump_rows(x: np.ndarray, teacher_pred: np.ndarray, student_pred: np.ndarray,
                  student_loss: np.ndarray, tag: str) -> List[list]:
    return [list(point) + [float(t), float(s), float(loss), tag]
            for point, t, s, loss in zip(x, teacher_pred[:, 0], student_pred[:, 0], student_loss[:, 0])]


def write_gen_dump(path, d: int, rows: Iterable[list]) -> Path:
    return _write(path, gen_dump_header(d), rows)


def write_bounds(path, reports: Iterable[BoundReport]) -> Path:
    return _write(path, BOUNDS_HEADER, ([r.trace, r.check, r.t, r.d, r.eta, r.k_hat, r.k_convention, r.bound,
                                         r.observed, r.exact_bound, r.satisfied, r.advisory] for r in reports))


def write_split(path, split: DatasetSplit) -> Path:
    """Original row index and the split it landed in"""
    rows = sorted([(int(i), name) for name, index in (("train", split.train_index),
                                                     ("validation", split.validation_index),
                                                     ("test", split.test_index)) for i in index])
    return _write(path, SPLIT_HEADER, rows)

