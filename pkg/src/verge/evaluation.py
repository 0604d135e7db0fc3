"""Leave-one-participant-out evaluation with weighted-F1 reporting.

Each fold holds one participant out, tunes tree depth on the remaining
training data, trains, and scores the held-out windows. Auxiliary rows
(e.g. instructed on-task recordings) can be pooled into every training fold
without ever being tested. The headline number is the unweighted mean of
per-participant weighted F1 scores; the pooled confusion is also reported.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import FeatureTable
from .forest import (
    DEFAULT_DEPTH_GRID,
    DEFAULT_N_TREES,
    train_forest,
    train_zeror,
    tune_depth,
)


def confusion_matrix(
    truth: Sequence[str], pred: Sequence[str], labels: Optional[Sequence[str]] = None
) -> tuple[np.ndarray, list[str]]:
    """Counts matrix with rows = true class, columns = predicted class."""
    if labels is None:
        labels = sorted(set(truth) | set(pred))
    else:
        labels = list(labels)
    index = {c: i for i, c in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(truth, pred):
        cm[index[t], index[p]] += 1
    return cm, labels


def weighted_f1(confusion: np.ndarray) -> float:
    """Per-class F1 averaged with weights proportional to true-class support.

    A class with zero precision and recall contributes F1 = 0.
    """
    cm = np.asarray(confusion, dtype=float)
    n = cm.sum()
    if n == 0:
        raise ValueError("empty confusion matrix")
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    out = 0.0
    for c in range(cm.shape[0]):
        tp = cm[c, c]
        denom_p = predicted[c]
        denom_r = support[c]
        precision = tp / denom_p if denom_p > 0 else 0.0
        recall = tp / denom_r if denom_r > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
        out += (support[c] / n) * f1
    return float(out)


@dataclass
class EvalConfig:
    window_size_ms: float = 1000.0
    feature_subset: str = "full"  # full | vergence | classic
    classifier: str = "forest"  # forest | zeror
    n_trees: int = DEFAULT_N_TREES
    depth_grid: tuple[Optional[int], ...] = DEFAULT_DEPTH_GRID
    seed: int = 0

    def as_dict(self) -> dict:
        return {
            "window_size_ms": self.window_size_ms,
            "feature_subset": self.feature_subset,
            "classifier": self.classifier,
            "n_trees": self.n_trees,
            "depth_grid": list(self.depth_grid),
            "seed": self.seed,
        }


@dataclass
class FoldResult:
    participant_id: str
    confusion: np.ndarray
    classes: list[str]
    weighted_f1: float
    n_test: int
    chosen_depth: Optional[int] = None


@dataclass
class EvalReport:
    config: EvalConfig
    folds: list[FoldResult]
    classes: list[str]
    mean_weighted_f1: float
    sd_weighted_f1: float
    pooled_confusion: np.ndarray
    pooled_weighted_f1: float

    def to_jsonable(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "classes": self.classes,
            "folds": [
                {
                    "participant_id": f.participant_id,
                    "confusion": f.confusion.tolist(),
                    "weighted_f1": f.weighted_f1,
                    "n_test": f.n_test,
                    "chosen_depth": f.chosen_depth,
                }
                for f in self.folds
            ],
            "mean_weighted_f1": self.mean_weighted_f1,
            "sd_weighted_f1": self.sd_weighted_f1,
            "pooled_confusion": self.pooled_confusion.tolist(),
            "pooled_weighted_f1": self.pooled_weighted_f1,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), sort_keys=True, indent=2)

    def fold_rows_csv(self) -> str:
        lines = ["participant_id,n_test,weighted_f1,chosen_depth"]
        for f in self.folds:
            depth = "" if f.chosen_depth is None else str(f.chosen_depth)
            lines.append(f"{f.participant_id},{f.n_test},{f.weighted_f1!r},{depth}")
        return "\n".join(lines) + "\n"


def fold_seed(base_seed: int, participant_id: str) -> int:
    """Deterministic per-fold seed, independent of participant order."""
    return (base_seed * 2654435761 + zlib.crc32(participant_id.encode("utf-8"))) % (2**63)


def lopo_eval(
    table: FeatureTable,
    config: EvalConfig,
    auxiliary: Optional[FeatureTable] = None,
) -> EvalReport:
    """Leave-one-participant-out evaluation over a labelled feature table.

    ``auxiliary`` rows join every training fold and are never tested.
    """
    all_participants = sorted(set(table.participant_ids))
    table = table.labeled()
    participants = sorted(set(table.participant_ids))
    missing = [p for p in all_participants if p not in participants]
    if missing:
        raise ValueError(f"participants with no labelled instances: {missing}")
    if len(participants) < 2:
        raise ValueError("need at least 2 participants")

    classes = sorted(set(lab for lab in table.labels if lab is not None))
    if auxiliary is not None:
        auxiliary = auxiliary.labeled()
        classes = sorted(set(classes) | set(auxiliary.labels))

    folds = []
    for pid in participants:
        test_mask = [p == pid for p in table.participant_ids]
        train_mask = [not m for m in test_mask]
        test = table.select(test_mask)
        train = table.select(train_mask)
        if auxiliary is not None and len(auxiliary):
            train = FeatureTable.concat([train, auxiliary])
        if len(test) == 0:
            raise ValueError(f"participant {pid} has no test instances")

        seed = fold_seed(config.seed, pid)
        y_train = [lab for lab in train.labels]
        chosen_depth: Optional[int] = None
        if config.classifier == "forest":
            grid = config.depth_grid
            if len(grid) > 1:
                chosen_depth = tune_depth(train.X, y_train, grid, seed=seed, n_trees=config.n_trees)
            else:
                chosen_depth = grid[0]
            model = train_forest(
                train.X,
                y_train,
                feature_names=train.feature_names,
                n_trees=config.n_trees,
                max_depth=chosen_depth,
                seed=seed,
            )
        elif config.classifier == "zeror":
            model = train_zeror(y_train, train.feature_names)
        else:
            raise ValueError(f"unknown classifier {config.classifier!r}")

        pred, _ = model.predict_rows(test.X)
        cm, _ = confusion_matrix(list(test.labels), pred, labels=classes)
        folds.append(
            FoldResult(
                participant_id=pid,
                confusion=cm,
                classes=classes,
                weighted_f1=weighted_f1(cm),
                n_test=len(test),
                chosen_depth=chosen_depth,
            )
        )

    folds.sort(key=lambda f: f.participant_id)
    scores = np.array([f.weighted_f1 for f in folds])
    pooled = np.sum([f.confusion for f in folds], axis=0)
    sd = float(np.std(scores, ddof=1)) if scores.size >= 2 else 0.0
    return EvalReport(
        config=config,
        folds=folds,
        classes=classes,
        mean_weighted_f1=float(np.mean(scores)),
        sd_weighted_f1=sd,
        pooled_confusion=pooled,
        pooled_weighted_f1=weighted_f1(pooled),
    )


# ---------------------------------------------------------------------------
# Grid over window sizes and feature subsets


@dataclass
class GridReport:
    reports: dict[tuple[float, str], EvalReport] = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            f"{int(size)}ms/{subset}": report.to_jsonable()
            for (size, subset), report in sorted(self.reports.items())
        }

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), sort_keys=True, indent=2)

    def to_text_table(self) -> str:
        sizes = sorted({size for size, _ in self.reports})
        subsets = sorted({sub for _, sub in self.reports})
        width = 12
        header = "window_ms".ljust(width) + "".join(s.ljust(width) for s in subsets)
        lines = [header]
        for size in sizes:
            row = f"{int(size)}".ljust(width)
            for sub in subsets:
                rep = self.reports.get((size, sub))
                row += (f"{rep.mean_weighted_f1:.3f}" if rep else "-").ljust(width)
            lines.append(row)
        return "\n".join(lines) + "\n"


def eval_grid(
    tables_by_size: dict[float, FeatureTable],
    config: EvalConfig,
    subsets: Sequence[str] = ("full", "vergence", "classic"),
    aux_by_size: Optional[dict[float, FeatureTable]] = None,
) -> GridReport:
    """Run lopo_eval for every window size x feature subset combination."""
    from dataclasses import replace

    grid = GridReport()
    for size, table in sorted(tables_by_size.items()):
        for subset in subsets:
            cfg = replace(config, window_size_ms=size, feature_subset=subset)
            aux = None
            if aux_by_size is not None and size in aux_by_size:
                aux = aux_by_size[size].subset(subset)
            grid.reports[(size, subset)] = lopo_eval(table.subset(subset), cfg, aux)
    return grid


# ---------------------------------------------------------------------------
# Dataset assembly from recordings and label segments


def build_feature_table(
    rec,
    segments,
    size_ms: float,
    step_divisor: int = 4,
    coverage: float = 0.8,
) -> FeatureTable:
    """Featurize one prepared recording and label its windows."""
    from .annotate import label_windows
    from .features import featurize

    vectors = featurize(rec, size_ms, step_ms=size_ms / step_divisor)
    labels = label_windows([v.window for v in vectors], segments, coverage)
    return FeatureTable.from_vectors(vectors, rec.participant_id, labels)


def load_dataset_dir(path: str, rate_hz: float = 60.0, smooth: bool = True) -> list[tuple]:
    """Load every participant in a dataset directory.

    Layout: ``screen.json`` plus ``<pid>.gaze.jsonl`` / ``<pid>.segments.json``
    pairs. Returns (pid, prepared Recording, segments, auxiliary) tuples
    ordered by pid; the auxiliary flag comes from the segments sidecar.
    """
    from pathlib import Path

    from .annotate import read_segments
    from .gaze import DEFAULT_SCREEN, ScreenConfig, parse_recording, prepare_recording

    root = Path(path)
    screen_path = root / "screen.json"
    screen = ScreenConfig.from_json(str(screen_path)) if screen_path.exists() else DEFAULT_SCREEN
    out = []
    for gaze_path in sorted(root.glob("*.gaze.jsonl")):
        pid = gaze_path.name[: -len(".gaze.jsonl")]
        rec = parse_recording(str(gaze_path), "jsonl", screen, participant_id=pid)
        rec = prepare_recording(rec, rate_hz=rate_hz, smooth=smooth)
        seg_path = root / f"{pid}.segments.json"
        if not seg_path.exists():
            raise FileNotFoundError(f"missing segments sidecar for {pid}: {seg_path}")
        segments, _, auxiliary = read_segments(str(seg_path))
        out.append((pid, rec, segments, auxiliary))
    if not out:
        raise FileNotFoundError(f"no *.gaze.jsonl recordings under {path}")
    return out


def dataset_tables(
    entries: Sequence[tuple],
    size_ms: float,
    step_divisor: int = 4,
    coverage: float = 0.8,
) -> tuple[FeatureTable, Optional[FeatureTable]]:
    """(main table, auxiliary table or None) for one window size."""
    main = []
    aux = []
    for pid, rec, segments, auxiliary in entries:
        table = build_feature_table(rec, segments, size_ms, step_divisor, coverage)
        (aux if auxiliary else main).append(table)
    if not main:
        raise ValueError("dataset holds only auxiliary recordings")
    return (
        FeatureTable.concat(main),
        FeatureTable.concat(aux) if aux else None,
    )
