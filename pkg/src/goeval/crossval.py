"""Repeated k-fold cross-validation with pooled RMSE and feature ablation tables."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import model as mdl
from .features import vocabulary_from_counts

DEFAULT_FOLDS = 10
DEFAULT_REPEATS = 5

MODEL_LABELS = {"mean": "mean regression", "bagged-nn": "bagged neural network"}


@dataclass(frozen=True)
class LabeledDataset:
    vectors: np.ndarray  # (n, dim)
    targets: np.ndarray  # (n,)
    segments: tuple[tuple[str, int, int], ...] = ()
    groups: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.vectors.ndim != 2 or len(self.vectors) != len(self.targets):
            raise ValueError("vectors and targets must align")
        if not (np.all(np.isfinite(self.vectors)) and np.all(np.isfinite(self.targets))):
            raise ValueError("non-finite dataset values")

    def __len__(self) -> int:
        return len(self.targets)

    def restrict(self, segment: str) -> "LabeledDataset":
        for name, off, length in self.segments:
            if name == segment:
                return LabeledDataset(
                    self.vectors[:, off : off + length], self.targets, ((name, 0, length),),
                    self.groups,
                )
        raise KeyError(f"unknown segment {segment!r}")


@dataclass(frozen=True)
class CVReport:
    repeat_rmses: tuple[float, ...]
    mean_rmse: float
    std_rmse: float
    model_label: str
    feature_label: str


def rmse(predictions: Sequence[float], targets: Sequence[float]) -> float:
    """Root of the mean squared prediction error."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape or len(p) == 0:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def kfold_split(n: int, k: int = DEFAULT_FOLDS, seed: mdl.Seed = 0) -> list[np.ndarray]:
    """Random partition of range(n) into k folds whose sizes differ by at most 1."""
    if n < k:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(perm[start : start + size]))
        start += size
    return folds


def grouped_kfold_split(groups: Sequence[str], k: int, seed: mdl.Seed = 0) -> list[np.ndarray]:
    """Partition rows into k folds keeping whole groups together.

    Shuffled groups are assigned to the currently smallest fold, so fold sizes
    stay balanced up to group granularity.
    """
    names = sorted(set(groups))
    if len(names) < k:
        raise ValueError(f"cannot split {len(names)} groups into {k} folds")
    rng = np.random.default_rng(seed)
    order = [names[i] for i in rng.permutation(len(names))]
    members: dict[str, list[int]] = {}
    for i, g in enumerate(groups):
        members.setdefault(g, []).append(i)
    folds: list[list[int]] = [[] for _ in range(k)]
    for name in order:
        smallest = min(range(k), key=lambda i: (len(folds[i]), i))
        folds[smallest].extend(members[name])
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def _fit_predict(model_spec: str, X_tr, y_tr, X_te, seed, nn_options) -> np.ndarray:
    if model_spec == "mean":
        return mdl.predict_mean(mdl.train_mean(y_tr), X_te)
    if model_spec == "bagged-nn":
        bag = mdl.train_bagged(X_tr, y_tr, seed, **nn_options)
        return mdl.predict_batch(bag, X_te)
    raise ValueError(f"unknown model spec {model_spec!r}")


def cross_validate(
    data: LabeledDataset,
    model_spec: str,
    k: int = DEFAULT_FOLDS,
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
    feature_label: str = "all",
    nn_options: Optional[dict] = None,
    group_aware: bool = False,
) -> CVReport:
    """Repeated k-fold CV; each repeat pools its squared errors into one RMSE.

    Scaler fitting happens inside each training fold (no leakage); every row
    is predicted exactly once per repeat. With group_aware, rows that share a
    group id stay in the same fold.
    """
    if model_spec not in MODEL_LABELS:
        raise ValueError(f"unknown model spec {model_spec!r}")
    if group_aware and data.groups is None:
        raise ValueError("group-aware splitting needs group ids on the dataset")
    nn_options = nn_options or {}
    X, y = data.vectors, data.targets
    repeat_rmses = []
    for r in range(repeats):
        seq = np.random.SeedSequence([seed, r])
        if group_aware:
            folds = grouped_kfold_split(data.groups, k, seq)
        else:
            folds = kfold_split(len(data), k, seq)
        preds = np.empty(len(data))
        seen = np.zeros(len(data), dtype=bool)
        for f, test_idx in enumerate(folds):
            train_mask = np.ones(len(data), dtype=bool)
            train_mask[test_idx] = False
            try:
                preds[test_idx] = _fit_predict(
                    model_spec, X[train_mask], y[train_mask], X[test_idx],
                    np.random.SeedSequence([seed, r, f]), nn_options,
                )
            except Exception as e:
                raise RuntimeError(f"repeat {r + 1}, fold {f + 1} failed: {e}") from e
            seen[test_idx] = True
        if not seen.all():
            raise AssertionError("fold coverage violated")
        repeat_rmses.append(rmse(preds, y))
    arr = np.array(repeat_rmses)
    return CVReport(
        tuple(repeat_rmses), float(arr.mean()), float(arr.std()),
        MODEL_LABELS[model_spec], feature_label,
    )


@dataclass(frozen=True)
class AblationRow:
    label: str
    report: CVReport
    mean_cmp: float


def feature_ablation(
    data: LabeledDataset,
    model_spec: str,
    segments: Optional[Sequence[str]] = None,
    k: int = DEFAULT_FOLDS,
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
    nn_options: Optional[dict] = None,
    group_aware: bool = False,
) -> list[AblationRow]:
    """Cross-validate each feature segment and the full vector.

    The Mean cmp column is the multiplicative improvement over mean
    regression: baseline RMSE divided by the row's RMSE.
    """
    names = [n for n, _, _ in data.segments]
    if segments is None:
        segments = names
    for s in segments:
        if s not in names:
            raise KeyError(f"unknown segment {s!r}")
    baseline = cross_validate(data, "mean", k, repeats, seed, "none",
                              group_aware=group_aware)
    rows = [AblationRow("none (mean regression)", baseline, 1.0)]
    for s in segments:
        rep = cross_validate(data.restrict(s), model_spec, k, repeats, seed, s,
                             nn_options, group_aware)
        rows.append(AblationRow(s, rep, baseline.mean_rmse / rep.mean_rmse))
    full = cross_validate(data, model_spec, k, repeats, seed, "all", nn_options,
                          group_aware)
    rows.append(AblationRow("all features combined", full, baseline.mean_rmse / full.mean_rmse))
    return rows


def cross_validate_fold_vocab(
    counts: Sequence[Counter],
    set_sizes: Sequence[int],
    rest_vectors: np.ndarray,
    targets: np.ndarray,
    vocab_size: int,
    model_spec: str = "bagged-nn",
    k: int = DEFAULT_FOLDS,
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
    nn_options: Optional[dict] = None,
) -> CVReport:
    """Leak-free variant: the pattern vocabulary is rebuilt from each repeat's
    training folds before the pattern features are derived."""
    nn_options = nn_options or {}
    n = len(targets)
    repeat_rmses = []
    for r in range(repeats):
        folds = kfold_split(n, k, np.random.SeedSequence([seed, r]))
        preds = np.empty(n)
        for f, test_idx in enumerate(folds):
            train_mask = np.ones(n, dtype=bool)
            train_mask[test_idx] = False
            pooled: Counter = Counter()
            for i in np.nonzero(train_mask)[0]:
                pooled.update(counts[i])
            vocab = vocabulary_from_counts(pooled, vocab_size)
            pat = np.zeros((n, len(vocab)))
            for i in range(n):
                for key, c in counts[i].items():
                    j = vocab.index.get(key)
                    if j is not None:
                        pat[i, j] = c / set_sizes[i]
            X = np.hstack([pat, rest_vectors])
            preds[test_idx] = _fit_predict(
                model_spec, X[train_mask], targets[train_mask], X[test_idx],
                np.random.SeedSequence([seed, r, f]), nn_options,
            )
        repeat_rmses.append(rmse(preds, targets))
    arr = np.array(repeat_rmses)
    return CVReport(
        tuple(repeat_rmses), float(arr.mean()), float(arr.std()),
        MODEL_LABELS[model_spec], "all (vocab from training folds)",
    )


# ---------------------------------------------------------------------------
# report rendering

def format_report_table(rows: Sequence[AblationRow]) -> str:
    """Aligned text table: feature, RMSE +- std over repeats, Mean cmp."""
    width = max(len(r.label) for r in rows) + 2
    lines = [f"{'Feature':<{width}}{'RMSE':>18}{'Mean cmp':>10}"]
    for r in rows:
        rms = f"{r.report.mean_rmse:.3f} ± {r.report.std_rmse:.3f}"
        lines.append(f"{r.label:<{width}}{rms:>18}{r.mean_cmp:>10.2f}")
    return "\n".join(lines) + "\n"


def format_report_delimited(rows: Sequence[AblationRow]) -> str:
    header = ["feature", "model", "rmse_mean", "rmse_std", "mean_cmp"]
    header += [f"rmse_repeat_{i + 1}" for i in range(len(rows[0].report.repeat_rmses))]
    lines = ["\t".join(header)]
    for r in rows:
        vals = [r.label, r.report.model_label,
                repr(r.report.mean_rmse), repr(r.report.std_rmse), repr(r.mean_cmp)]
        vals += [repr(v) for v in r.report.repeat_rmses]
        lines.append("\t".join(vals))
    return "\n".join(lines) + "\n"
