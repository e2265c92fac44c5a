"""Adam optimization, batching, early stopping, and grid search.

One training run: per epoch, seeded shuffle, fixed-size batches (the
last partial batch is kept), one tape per batch, loss per setting,
backward, Adam step.  After each epoch the dev split is scored with its
metric; the best-epoch checkpoint is returned.  Training stops after
``patience`` epochs without dev improvement or at ``max_epochs``.

The hyperparameter grid defaults to batch sizes {32, 64}, learning rates
{0.1, 0.01, 0.001, 0.0001} and epoch budgets {10, 30, 50}; every cell is
scored by dev correlation of its early-stopped model.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import InferenceTape, Tape, Tensor, backward, concat, cosine, mean_over_axis, zero_grads
from .data import DatasetSplit, ScoredPair
from .errors import ContractError, NumericError
from .metrics import pearson, spearman
from .transfer import (
    SimilarityModel,
    TransferConfig,
    classifier_forward,
    dnt_loss,
    embed_sentence,
    ft_loss,
    normalize_score,
    predict,
    rescale_to_bins,
    sparse_target_distribution,
    trainable_parameter_sets,
)

DEFAULT_BATCH_SIZES = (32, 64)
DEFAULT_LEARNING_RATES = (0.1, 0.01, 0.001, 0.0001)
DEFAULT_EPOCH_BUDGETS = (10, 30, 50)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

UNDEFINED_CORRELATION = -1.0  # early-stopping sentinel for constant predictions


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 32
    learning_rate: float = 0.001
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if min(self.batch_size, self.max_epochs, self.patience) <= 0 or self.learning_rate <= 0:
            raise ContractError("training config values must be positive")


class AdamState:
    """First/second moment accumulators per parameter plus a step counter."""

    def __init__(self, params: list[Tensor]):
        self.m = {p: np.zeros_like(p.values) for p in params}
        self.v = {p: np.zeros_like(p.values) for p in params}
        self.t = 0


def adam_step(params: list[Tensor], grads: list[np.ndarray | None] | None,
              state: AdamState, lr: float) -> None:
    """Standard Adam update with bias correction.

    Only trainable tensors move; frozen tensors are untouched even with a
    populated gradient slot.  ``grads=None`` reads each tensor's own grad.
    """
    if lr <= 0:
        raise ContractError("learning rate must be positive")
    if grads is None:
        grads = [p.grad for p in params]
    if len(grads) != len(params):
        raise ContractError("params and grads differ in length")
    state.t += 1
    bias1 = 1.0 - ADAM_BETA1 ** state.t
    bias2 = 1.0 - ADAM_BETA2 ** state.t
    for p, g in zip(params, grads):
        if not p.trainable or g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {p.name or p!r}")
        m = state.m[p]
        v = state.v[p]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p.values -= lr * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)


@dataclass
class TrainingHistory:
    train_losses: list[float] = field(default_factory=list)
    dev_correlations: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_dev_correlation: float = -np.inf
    best_checkpoint: dict[str, np.ndarray] | None = None

    @property
    def epochs_run(self) -> int:
        return len(self.train_losses)


class _EmbeddingCache:
    """Precomputed sentence embeddings for settings that freeze wem and enc."""

    def __init__(self, model: SimilarityModel):
        self.model = model
        self.cache: dict[str, np.ndarray] = {}

    def get(self, sentence: str) -> Tensor:
        values = self.cache.get(sentence)
        if values is None:
            with InferenceTape():
                values = embed_sentence(self.model, sentence).values
            self.cache[sentence] = values
        return Tensor(values)


def _pair_embeddings(model: SimilarityModel, pair: ScoredPair,
                     cache: _EmbeddingCache | None) -> tuple[Tensor, Tensor]:
    if cache is not None:
        return cache.get(pair.sentence_a), cache.get(pair.sentence_b)
    return embed_sentence(model, pair.sentence_a), embed_sentence(model, pair.sentence_b)


def batch_loss(model: SimilarityModel, config: TransferConfig, pairs: list[ScoredPair],
               cache: _EmbeddingCache | None = None) -> Tensor:
    """Batch training loss on the active tape (mean over the m pairs)."""
    if config.setting == "UE":
        raise ContractError("UE has no training loss")
    if config.setting == "DNT":
        cosines, targets = [], []
        for pair in pairs:
            h_left, h_right = _pair_embeddings(model, pair, cache)
            cosines.append(cosine(h_left, h_right))
            targets.append(normalize_score(pair.score, pair.score_range, config.norm_range))
        return dnt_loss(cosines, targets, norm_range=config.norm_range)
    losses = []
    for pair in pairs:
        h_left, h_right = _pair_embeddings(model, pair, cache)
        p_hat, _ = classifier_forward(h_left, h_right, model.classifier)
        target = sparse_target_distribution(
            rescale_to_bins(pair.score, pair.score_range, config.bins), config.bins)
        losses.append(ft_loss(target, p_hat, config.loss_kind))
    return mean_over_axis(concat(losses), axis=0)


def evaluate_split(model: SimilarityModel, config: TransferConfig,
                   pairs: list[ScoredPair], metric: str) -> float:
    """Correlation of raw predictions against raw annotated scores."""
    predictions = [predict(config, model, pair) for pair in pairs]
    gold = [pair.score for pair in pairs]
    if metric == "pearson":
        return pearson(predictions, gold)
    if metric == "spearman":
        return spearman(predictions, gold)
    raise ContractError(f"unknown metric {metric!r}")


def _trainable_tensors(model: SimilarityModel, config: TransferConfig) -> list[Tensor]:
    names = trainable_parameter_sets(config)
    out: list[Tensor] = []
    for name, tensors in model.parameter_sets().items():
        if name in names:
            out.extend(tensors)
    return out


def train(model: SimilarityModel, transfer_config: TransferConfig,
          train_split: DatasetSplit, dev_split: DatasetSplit,
          training_config: TrainingConfig) -> tuple[SimilarityModel, TrainingHistory]:
    """Train in place and restore the best-dev-epoch checkpoint at the end.

    A dev correlation that is undefined (constant predictions) counts as
    -1 for the early-stopping comparison and the run continues.
    """
    if transfer_config.setting == "UE":
        raise ContractError("UE performs no training")
    if transfer_config.setting in ("FT", "NT") and model.classifier is None:
        raise ContractError(f"{transfer_config.setting} training requires a classifier head")
    model.apply_freeze_policy(transfer_config)
    params = _trainable_tensors(model, transfer_config)
    if not params:
        raise ContractError("freeze policy leaves nothing to train")
    frozen_embedding = not model.embedding.trainable and not any(
        t.trainable for t in model.encoder_params.tensors())
    cache = _EmbeddingCache(model) if frozen_embedding else None

    state = AdamState(params)
    rng = np.random.default_rng(training_config.seed)
    history = TrainingHistory()
    epochs_since_best = 0
    for _ in range(training_config.max_epochs):
        order = rng.permutation(len(train_split.pairs))
        shuffled = [train_split.pairs[i] for i in order]
        epoch_losses = []
        for start in range(0, len(shuffled), training_config.batch_size):
            batch = shuffled[start : start + training_config.batch_size]
            zero_grads(params)
            with Tape() as tape:
                loss = batch_loss(model, transfer_config, batch, cache)
            backward(tape, loss)
            adam_step(params, None, state, training_config.learning_rate)
            epoch_losses.append(float(loss.values))
        history.train_losses.append(float(np.mean(epoch_losses)))
        try:
            dev_corr = evaluate_split(model, transfer_config, dev_split.pairs, dev_split.metric)
        except NumericError:
            dev_corr = UNDEFINED_CORRELATION
        history.dev_correlations.append(dev_corr)
        if dev_corr > history.best_dev_correlation:
            history.best_dev_correlation = dev_corr
            history.best_epoch = len(history.dev_correlations) - 1
            history.best_checkpoint = model.snapshot()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= training_config.patience:
                break
    if history.best_checkpoint is not None:
        model.restore(history.best_checkpoint)
    return model, history


@dataclass(frozen=True)
class HyperGrid:
    batch_sizes: tuple[int, ...] = DEFAULT_BATCH_SIZES
    learning_rates: tuple[float, ...] = DEFAULT_LEARNING_RATES
    epoch_budgets: tuple[int, ...] = DEFAULT_EPOCH_BUDGETS
    patience: int = 5
    seed: int = 0

    def cells(self) -> list[TrainingConfig]:
        """Cells enumerated in tie-break priority order:
        smaller lr, then smaller batch, then fewer epochs."""
        if not (self.batch_sizes and self.learning_rates and self.epoch_budgets):
            raise ContractError("grid must be nonempty")
        return [
            TrainingConfig(batch_size=b, learning_rate=lr, max_epochs=e,
                           patience=self.patience, seed=self.seed)
            for lr, b, e in itertools.product(
                sorted(self.learning_rates), sorted(self.batch_sizes),
                sorted(self.epoch_budgets))
        ]


@dataclass
class CellResult:
    config: TrainingConfig
    dev_correlation: float
    best_epoch: int
    epochs_run: int
    error: str | None = None


@dataclass
class GridSearchResult:
    best_config: TrainingConfig
    best_model: SimilarityModel
    best_history: TrainingHistory
    cells: list[CellResult]


def select_best_cell(results: list[CellResult]) -> int:
    """Argmax dev correlation; differences below 1e-12 count as ties and
    fall back to (smaller lr, smaller batch, fewer epochs)."""
    best = -1
    for i, cell in enumerate(results):
        if cell.error is not None:
            continue
        if best < 0 or cell.dev_correlation > results[best].dev_correlation + 1e-12:
            best = i
        elif abs(cell.dev_correlation - results[best].dev_correlation) <= 1e-12:
            key = (cell.config.learning_rate, cell.config.batch_size, cell.config.max_epochs)
            best_key = (results[best].config.learning_rate, results[best].config.batch_size,
                        results[best].config.max_epochs)
            if key < best_key:
                best = i
    if best < 0:
        raise NumericError("all grid cells failed: " +
                           "; ".join(c.error or "?" for c in results))
    return best


def grid_search(model_factory: Callable[[], SimilarityModel], transfer_config: TransferConfig,
                train_split: DatasetSplit, dev_split: DatasetSplit,
                grid: HyperGrid, threads: int = 1) -> GridSearchResult:
    """Evaluate every grid cell on a fresh identically-initialized model.

    Cells are independent; ``threads > 1`` runs them concurrently.  The
    winner is re-selected deterministically regardless of completion order.
    """
    cells = grid.cells()

    def run_cell(cfg: TrainingConfig):
        model = model_factory()
        try:
            model, history = train(model, transfer_config, train_split, dev_split, cfg)
            corr = (history.best_dev_correlation
                    if history.best_dev_correlation > -np.inf else UNDEFINED_CORRELATION)
            return CellResult(cfg, corr, history.best_epoch, history.epochs_run), model, history
        except NumericError as exc:
            return CellResult(cfg, UNDEFINED_CORRELATION, -1, 0, error=str(exc)), None, None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(cfg) for cfg in cells]
    results = [o[0] for o in outcomes]
    winner = select_best_cell(results)
    _, best_model, best_history = outcomes[winner]
    if best_model is None:
        raise NumericError("selected grid cell has no model")
    return GridSearchResult(results[winner].config, best_model, best_history, results)
