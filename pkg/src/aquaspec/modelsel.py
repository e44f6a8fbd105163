"""Fold construction, random hyperparameter search, nested cross-validation.

The evaluation protocol is a double k-fold: 5 outer folds estimate
generalization, and inside each outer-train set a 4-fold cross-validation
ranks randomly sampled hyperparameter configurations. Preprocessing (input
standardizer, optional PCA, score standardizer, target standardizer) is
refit on the training side of every split, so no statistic ever sees
held-out rows. The winning configuration of each outer fold is refit on the
full outer-train set, holding out a random quarter for early stopping, and
scored on the outer-test fold in original target units.

Trials are independent, so they may run in parallel (``n_jobs``); scores are
merged by trial index and the selection is order-free, which keeps results
identical for any job count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .metrics import mape, r2, rmse
from .pipeline import SoftSensorPipeline
from .seeding import derive_seed
from .spectra import Dataset, split_features_targets

METRIC_NAMES = ("rmse", "r2", "mape")


@dataclass(frozen=True)
class HyperRanges:
    """Random-search space; defaults follow the reference protocol."""

    hidden_layers: tuple[int, ...] = (1, 2)
    learning_rate: tuple[float, float] = (1e-4, 1e-3)
    hidden_units: tuple[int, int] = (350, 1300)
    weight_decay: tuple[float, float] = (1e-3, 2e-3)


@dataclass(frozen=True)
class TrialConfig:
    index: int
    hidden_layers: int
    hidden_units: int
    learning_rate: float
    weight_decay: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "hidden_layers": self.hidden_layers,
            "hidden_units": self.hidden_units,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
        }


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Partition of n samples into k folds whose sizes differ by at most 1."""

    n_samples: int
    k: int
    assignment: np.ndarray  # fold index per sample

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def fold_sizes(self) -> list[int]:
        return [int(np.sum(self.assignment == f)) for f in range(self.k)]


def make_folds(n: int, k: int, seed: int) -> FoldPlan:
    """Randomly split indices 0..n-1 into k nearly equal folds."""
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if n < k:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    base, extra = divmod(n, k)
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        assignment[perm[start : start + size]] = fold
        start += size
    return FoldPlan(n_samples=n, k=k, assignment=assignment)


def sample_configs(
    ranges: HyperRanges = HyperRanges(), n: int = 128, seed: int = 0
) -> list[TrialConfig]:
    """Draw n trial configurations uniformly from the search space."""
    if n < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    layers = rng.choice(np.asarray(ranges.hidden_layers), size=n)
    units = rng.integers(ranges.hidden_units[0], ranges.hidden_units[1] + 1, size=n)
    lr = rng.uniform(*ranges.learning_rate, size=n)
    wd = rng.uniform(*ranges.weight_decay, size=n)
    return [
        TrialConfig(
            index=i,
            hidden_layers=int(layers[i]),
            hidden_units=int(units[i]),
            learning_rate=float(lr[i]),
            weight_decay=float(wd[i]),
        )
        for i in range(n)
    ]


@dataclass(frozen=True)
class TrialScore:
    config: TrialConfig
    score: float  # mean standardized-target RMSE over inner folds; nan if failed
    failed: bool


def select_best_trial(scores: Sequence[TrialScore]) -> TrialScore:
    """Lowest score wins; ties break to fewer hidden units, then lower index."""
    viable = [s for s in scores if not s.failed]
    if not viable:
        raise ValueError("all trials failed; nothing to select")
    return min(
        viable, key=lambda s: (s.score, s.config.hidden_units, s.config.index)
    )


def _make_pipeline(
    trial: TrialConfig,
    use_pca: bool,
    k_components: int,
    max_epochs: int,
    patience: int,
    seed: int,
) -> SoftSensorPipeline:
    return SoftSensorPipeline(
        use_pca=use_pca,
        n_components=k_components,
        hidden_layers=trial.hidden_layers,
        hidden_units=trial.hidden_units,
        learning_rate=trial.learning_rate,
        weight_decay=trial.weight_decay,
        max_epochs=max_epochs,
        patience=patience,
        seed=seed,
    )


def _standardized_rmse(pipe: SoftSensorPipeline, X_val, Y_val) -> float:
    """Per-target RMSE on the standardized target scale, averaged over targets."""
    z_true = pipe.target_standardizer_.transform(Y_val)
    z_pred = pipe.target_standardizer_.transform(pipe.predict(X_val))
    per_target = np.sqrt(np.mean((z_true - z_pred) ** 2, axis=0))
    return float(np.mean(per_target))


def _score_trial(
    trial: TrialConfig,
    X: np.ndarray,
    Y: np.ndarray,
    inner_plan: FoldPlan,
    use_pca: bool,
    k_components: int,
    max_epochs: int,
    patience: int,
    root_seed: int,
    outer_fold: int,
) -> TrialScore:
    fold_scores = []
    for j in range(inner_plan.k):
        tr = inner_plan.train_indices(j)
        va = inner_plan.test_indices(j)
        pipe = _make_pipeline(
            trial,
            use_pca,
            k_components,
            max_epochs,
            patience,
            seed=derive_seed(root_seed, "train", outer_fold, trial.index, j),
        )
        try:
            pipe.fit(X[tr], Y[tr], X_val=X[va], Y_val=Y[va])
            score = _standardized_rmse(pipe, X[va], Y[va])
        except ArithmeticError:
            return TrialScore(config=trial, score=float("nan"), failed=True)
        if not np.isfinite(score):
            return TrialScore(config=trial, score=float("nan"), failed=True)
        fold_scores.append(score)
    return TrialScore(config=trial, score=float(np.mean(fold_scores)), failed=False)


@dataclass(frozen=True, eq=False)
class FoldOutcome:
    fold: int
    config: TrialConfig
    trial_configs: tuple[TrialConfig, ...]  # the sampled search space, for audit
    inner_scores: tuple[float, ...]  # nan entries mark failed trials
    n_failed_trials: int
    test_ids: tuple[str, ...]
    y_true: np.ndarray  # [n_test x n_targets]
    y_pred: np.ndarray
    metrics: dict  # target -> {"rmse": .., "r2": .., "mape": ..}


@dataclass(frozen=True, eq=False)
class CvReport:
    use_pca: bool
    k_components: int
    n_trials: int
    outer_k: int
    inner_k: int
    seed: int
    max_epochs: int
    patience: int
    target_names: tuple[str, ...]
    folds: tuple[FoldOutcome, ...]

    def to_dict(self) -> dict:
        return {
            "use_pca": self.use_pca,
            "k_components": self.k_components,
            "n_trials": self.n_trials,
            "outer_k": self.outer_k,
            "inner_k": self.inner_k,
            "seed": self.seed,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "target_names": list(self.target_names),
            "folds": [
                {
                    "fold": f.fold,
                    "chosen_config": f.config.to_dict(),
                    "trial_configs": [t.to_dict() for t in f.trial_configs],
                    "inner_scores": [
                        None if not np.isfinite(s) else s for s in f.inner_scores
                    ],
                    "n_failed_trials": f.n_failed_trials,
                    "test_ids": list(f.test_ids),
                    "y_true": f.y_true.tolist(),
                    "y_pred": f.y_pred.tolist(),
                    "metrics": f.metrics,
                }
                for f in self.folds
            ],
        }


def nested_cv(
    dataset: Dataset,
    ranges: HyperRanges = HyperRanges(),
    *,
    use_pca: bool = True,
    k_components: int = 15,
    n_trials: int = 128,
    seed: int = 0,
    outer_k: int = 5,
    inner_k: int = 4,
    max_epochs: int = 8000,
    patience: int = 200,
    refit_val_fraction: float = 0.25,
    n_jobs: int = 1,
) -> CvReport:
    """Run the double k-fold protocol and collect per-fold outcomes.

    Trial configurations are resampled per outer fold from ``ranges``
    (``n_trials`` each, seeded). A trial whose training diverges to a
    non-finite loss is marked failed and excluded from selection instead of
    aborting the run.
    """
    X, Y = split_features_targets(dataset)
    ids = dataset.ids()
    n = X.shape[0]
    outer = make_folds(n, outer_k, derive_seed(seed, "outer-folds"))

    outcomes = []
    for fold in range(outer_k):
        tr_idx = outer.train_indices(fold)
        te_idx = outer.test_indices(fold)
        Xo, Yo = X[tr_idx], Y[tr_idx]

        trials = sample_configs(ranges, n_trials, derive_seed(seed, "trials", fold))
        inner = make_folds(len(tr_idx), inner_k, derive_seed(seed, "inner-folds", fold))

        worker = delayed(_score_trial)
        scores: list[TrialScore] = Parallel(n_jobs=n_jobs)(
            worker(
                trial,
                Xo,
                Yo,
                inner,
                use_pca,
                k_components,
                max_epochs,
                patience,
                seed,
                fold,
            )
            for trial in trials
        )
        best = select_best_trial(scores)

        # Refit the winner on the full outer-train set with a held-out
        # quarter for early stopping, then score the untouched outer test.
        rng = np.random.default_rng(derive_seed(seed, "refit-split", fold))
        perm = rng.permutation(len(tr_idx))
        n_es = max(1, int(round(refit_val_fraction * len(tr_idx))))
        es, fit = perm[:n_es], perm[n_es:]
        pipe = _make_pipeline(
            best.config,
            use_pca,
            k_components,
            max_epochs,
            patience,
            seed=derive_seed(seed, "refit", fold),
        )
        pipe.fit(Xo[fit], Yo[fit], X_val=Xo[es], Y_val=Yo[es])

        y_pred = pipe.predict(X[te_idx])
        y_true = Y[te_idx]
        fold_metrics = {
            name: {
                "rmse": rmse(y_true[:, j], y_pred[:, j]),
                "r2": r2(y_true[:, j], y_pred[:, j]),
                "mape": mape(y_true[:, j], y_pred[:, j]),
            }
            for j, name in enumerate(dataset.target_names)
        }
        outcomes.append(
            FoldOutcome(
                fold=fold,
                config=best.config,
                trial_configs=tuple(trials),
                inner_scores=tuple(s.score for s in scores),
                n_failed_trials=sum(s.failed for s in scores),
                test_ids=tuple(ids[i] for i in te_idx),
                y_true=y_true,
                y_pred=y_pred,
                metrics=fold_metrics,
            )
        )

    return CvReport(
        use_pca=use_pca,
        k_components=k_components,
        n_trials=n_trials,
        outer_k=outer_k,
        inner_k=inner_k,
        seed=seed,
        max_epochs=max_epochs,
        patience=patience,
        target_names=dataset.target_names,
        folds=tuple(outcomes),
    )


# ---------------------------------------------------------------------------
# Summary tables


@dataclass(frozen=True)
class SummaryRow:
    target: str
    metric: str
    mean: float
    std: float


@dataclass(frozen=True)
class MetricSummary:
    """Mean and sample standard deviation per target and metric over outer folds.

    MAPE is rendered as percent here; the per-fold report keeps fractions.
    """

    rows: tuple[SummaryRow, ...]

    def to_csv(self) -> str:
        lines = ["target,metric,mean,std"]
        for row in self.rows:
            lines.append(f"{row.target},{row.metric},{row.mean!r},{row.std!r}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        out: dict = {}
        for row in self.rows:
            out.setdefault(row.target, {})[row.metric] = {
                "mean": row.mean,
                "std": row.std,
            }
        return out

    def lookup(self, target: str, metric: str) -> SummaryRow:
        for row in self.rows:
            if row.target == target and row.metric == metric.lower():
                return row
        raise KeyError(f"no summary row for ({target}, {metric})")


def summarize(report: CvReport) -> MetricSummary:
    """Aggregate a CvReport into the mean(+-std) table shape."""
    if len(report.folds) != report.outer_k:
        raise ValueError(
            f"report has {len(report.folds)} folds, expected {report.outer_k}"
        )
    for fold in report.folds:
        for target in report.target_names:
            got = fold.metrics.get(target, {})
            if not all(m in got for m in METRIC_NAMES):
                raise ValueError(
                    f"fold {fold.fold} is missing metrics for target '{target}'"
                )
    rows = []
    for target in report.target_names:
        for metric in METRIC_NAMES:
            values = np.array([fold.metrics[target][metric] for fold in report.folds])
            if metric == "mape":
                values = values * 100.0
            rows.append(
                SummaryRow(
                    target=target,
                    metric=metric,
                    mean=float(values.mean()),
                    std=float(values.std(ddof=1)),
                )
            )
    return MetricSummary(rows=tuple(rows))
