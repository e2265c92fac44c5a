"""The four transfer settings and their prediction heads and losses.

UE  - unsupervised evaluation: cosine of the two embeddings, no training.
FT  - feature transfer: embeddings are fixed features for a small
      dense+softmax classifier head; only the head trains.
NT  - network transfer: the same head trained end to end through the
      encoder (and optionally the embedding matrix).
DNT - direct network transfer: no head at all; the encoder is trained so
      that embedding cosine matches the normalized annotated score.

FT and NT regress onto a sparse distribution over integer score bins
1..K; DNT regresses cosine onto scores normalized into [0,1] or [-1,1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    InferenceTape,
    Tensor,
    absolute,
    add,
    concat,
    cosine,
    elementwise_multiply,
    log,
    matmul,
    mean_over_axis,
    sigmoid,
    softmax,
    subtract,
)
from .embeddings import EmbeddingMatrix, Vocabulary, lookup, tokenize
from .encoders import EncoderConfig, EncoderParameters, encode
from .errors import ContractError, DataError, ShapeError

SETTINGS = ("UE", "FT", "NT", "DNT")
LOSS_KINDS = ("MSE", "KL")
NORM_RANGES = ((0.0, 1.0), (-1.0, 1.0))

DEFAULT_BINS = 5
DEFAULT_HIDDEN_WIDTH = 50


@dataclass(frozen=True)
class TransferConfig:
    """One experiment's independent variable.

    ``loss_kind`` and ``bins`` apply to FT/NT only; ``norm_range`` to DNT
    only; ``freeze_wem`` to NT/DNT (forced True for FT and UE, whose
    embedding matrix never trains).
    """

    setting: str
    loss_kind: str | None = None
    freeze_wem: bool = True
    norm_range: tuple[float, float] | None = None
    bins: int | None = None

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ContractError(f"unknown transfer setting {self.setting!r}")
        if self.setting in ("FT", "NT"):
            if self.loss_kind not in LOSS_KINDS:
                raise ContractError(f"{self.setting} requires loss_kind MSE or KL")
            if self.bins is None or self.bins < 2:
                raise ContractError(f"{self.setting} requires bins >= 2")
            if self.norm_range is not None:
                raise ContractError(f"{self.setting} does not use norm_range")
        if self.setting == "DNT":
            if self.loss_kind is not None or self.bins is not None:
                raise ContractError("DNT has a fixed loss; loss_kind/bins do not apply")
            if tuple(self.norm_range or ()) not in NORM_RANGES:
                raise ContractError("DNT requires norm_range (0,1) or (-1,1)")
        if self.setting == "UE":
            if self.loss_kind is not None or self.bins is not None or self.norm_range is not None:
                raise ContractError("UE admits no training-related fields")
        if self.setting in ("FT", "UE") and not self.freeze_wem:
            raise ContractError(f"{self.setting} always freezes the embedding matrix")


def trainable_parameter_sets(config: TransferConfig) -> frozenset[str]:
    """Which of {wem, enc, cla} receive gradient updates under the config."""
    if config.setting == "UE":
        return frozenset()
    if config.setting == "FT":
        return frozenset({"cla"})
    if config.setting == "NT":
        base = {"enc", "cla"}
    else:  # DNT
        base = {"enc"}
    if not config.freeze_wem:
        base.add("wem")
    return frozenset(base)


@dataclass
class ClassifierParameters:
    """Dense + softmax head over combined pair features."""

    w_times: Tensor  # k x e
    w_plus: Tensor  # k x e
    b_h: Tensor  # k
    w_p: Tensor  # K x k
    b_p: Tensor  # K

    def tensors(self) -> list[Tensor]:
        return [self.w_times, self.w_plus, self.b_h, self.w_p, self.b_p]

    def named_tensors(self) -> dict[str, Tensor]:
        return {t.name: t for t in self.tensors()}

    def set_trainable(self, flag: bool) -> None:
        for t in self.tensors():
            t.trainable = flag

    @property
    def bins(self) -> int:
        return self.w_p.shape[0]


def init_classifier(embedding_dim: int, bins: int = DEFAULT_BINS,
                    hidden_width: int = DEFAULT_HIDDEN_WIDTH, seed: int = 0) -> ClassifierParameters:
    """Seeded init: weights uniform in [-1/sqrt(e), 1/sqrt(e)], biases zero."""
    if embedding_dim <= 0 or bins < 2 or hidden_width <= 0:
        raise ContractError("classifier dimensions must be positive (bins >= 2)")
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(embedding_dim)

    def weight(shape, name):
        return Tensor(rng.uniform(-bound, bound, size=shape), trainable=True, name=name)

    return ClassifierParameters(
        w_times=weight((hidden_width, embedding_dim), "cla.w_times"),
        w_plus=weight((hidden_width, embedding_dim), "cla.w_plus"),
        b_h=Tensor(np.zeros(hidden_width), trainable=True, name="cla.b_h"),
        w_p=weight((bins, hidden_width), "cla.w_p"),
        b_p=Tensor(np.zeros(bins), trainable=True, name="cla.b_p"),
    )


@dataclass
class SimilarityModel:
    """Everything needed to score a sentence pair under one setting."""

    vocabulary: Vocabulary
    embedding: EmbeddingMatrix
    encoder_config: EncoderConfig
    encoder_params: EncoderParameters
    classifier: ClassifierParameters | None = None

    def parameter_sets(self) -> dict[str, list[Tensor]]:
        sets = {"wem": [self.embedding.matrix], "enc": self.encoder_params.tensors()}
        if self.classifier is not None:
            sets["cla"] = self.classifier.tensors()
        return sets

    def named_tensors(self) -> dict[str, Tensor]:
        out = {"wem.matrix": self.embedding.matrix}
        out.update(self.encoder_params.named_tensors())
        if self.classifier is not None:
            out.update(self.classifier.named_tensors())
        return out

    def apply_freeze_policy(self, config: TransferConfig) -> frozenset[str]:
        """Set every tensor's trainable flag from the freeze-policy matrix."""
        trainable = trainable_parameter_sets(config)
        for name, tensors in self.parameter_sets().items():
            for t in tensors:
                t.trainable = name in trainable
        return trainable

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.values.copy() for name, t in self.named_tensors().items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for name, t in self.named_tensors().items():
            t.values = snapshot[name].copy()


def embed_sentence(model: SimilarityModel, text: str) -> Tensor:
    """tokenize -> lookup -> encode, on the active tape."""
    tokens = tokenize(text)
    vectors = lookup(model.embedding, model.vocabulary, tokens)
    return encode(model.encoder_params, model.encoder_config, vectors)


def normalize_score(y: float, source_range: tuple[float, float],
                    target_range: tuple[float, float], context: str = "") -> float:
    """Affine, monotone-increasing map of y from source_range to target_range."""
    lo, hi = source_range
    tlo, thi = target_range
    if hi <= lo or thi <= tlo:
        raise ContractError("score ranges must have positive width")
    if y < lo - 1e-9 or y > hi + 1e-9:
        where = f" ({context})" if context else ""
        raise DataError(f"score {y} outside declared range [{lo}, {hi}]{where}")
    y = min(max(y, lo), hi)
    return tlo + (y - lo) * (thi - tlo) / (hi - lo)


def sparse_target_distribution(y: float, bins: int) -> np.ndarray:
    """Distribution p over bins 1..K with sum(p) = 1 and sum(i * p_i) = y.

    Mass splits between the two integer bins bracketing y; an integer y
    is a one-hot.
    """
    if bins < 2:
        raise ContractError("bins must be >= 2")
    if y < 1.0 - 1e-9 or y > bins + 1e-9:
        raise ContractError(f"target score {y} outside [1, {bins}]; rescale scores first")
    y = min(max(y, 1.0), float(bins))
    p = np.zeros(bins)
    low = int(math.floor(y))
    if low == bins:
        p[bins - 1] = 1.0
    else:
        p[low - 1] = low - y + 1.0
        p[low] = y - low
    return p


def classifier_forward(h_left: Tensor, h_right: Tensor,
                       params: ClassifierParameters) -> tuple[Tensor, Tensor]:
    """Head forward pass: returns (bin distribution, expected score).

    Features are the elementwise product and the absolute difference of
    the two embeddings; the expected score is sum(i * p_i) over bins
    1..K, so it always lies in [1, K].
    """
    if h_left.shape != h_right.shape or h_left.values.ndim != 1:
        raise ShapeError("classifier_forward", h_left.shape, h_right.shape)
    if params.w_times.shape[1] != h_left.shape[0]:
        raise ShapeError("classifier_forward", params.w_times.shape, h_left.shape,
                         detail="head width does not match embedding dim")
    h_times = elementwise_multiply(h_left, h_right)
    h_plus = absolute(subtract(h_left, h_right))
    hidden = sigmoid(add(add(matmul(params.w_times, h_times),
                             matmul(params.w_plus, h_plus)), params.b_h))
    p_hat = softmax(add(matmul(params.w_p, hidden), params.b_p))
    bin_values = Tensor(np.arange(1, params.bins + 1, dtype=np.float64))
    y_hat = matmul(bin_values, p_hat)
    return p_hat, y_hat


def ft_loss(p: np.ndarray, p_hat: Tensor, kind: str) -> Tensor:
    """Per-pair loss between a target distribution and the head output.

    MSE averages squared bin differences; KL is sum p_i ln(p_i / p_hat_i)
    with the 0 ln 0 terms dropped (natural log).
    """
    p = np.asarray(p, dtype=np.float64)
    if kind not in LOSS_KINDS:
        raise ContractError(f"unknown loss kind {kind!r}")
    if p.shape != p_hat.shape:
        raise ShapeError("ft_loss", p.shape, p_hat.shape)
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < -1e-12):
        raise ContractError("target p is not a distribution")
    if np.any(p_hat.values <= 0):
        raise ContractError("p_hat must be strictly positive (softmax output)")
    if kind == "MSE":
        diff = subtract(p_hat, Tensor(p))
        return mean_over_axis(elementwise_multiply(diff, diff), axis=0)
    mass = p[p > 0]
    entropy_term = float(np.dot(mass, np.log(mass)))  # constant in p_hat
    cross = matmul(Tensor(p), log(p_hat))
    return subtract(Tensor(entropy_term), cross)


def dnt_loss(cosines: list[Tensor], targets: list[float],
             norm_range: tuple[float, float] | None = None) -> Tensor:
    """Mean squared residual between pair cosines and normalized scores."""
    if len(cosines) != len(targets):
        raise ContractError(f"{len(cosines)} cosines vs {len(targets)} targets")
    if not cosines:
        raise ContractError("dnt_loss requires at least one pair")
    if norm_range is not None:
        lo, hi = norm_range
        for t in targets:
            if t < lo - 1e-9 or t > hi + 1e-9:
                raise ContractError(f"target {t} outside normalization range [{lo}, {hi}]")
    predictions = concat(cosines)
    residual = subtract(predictions, Tensor(np.asarray(targets, dtype=np.float64)))
    return mean_over_axis(elementwise_multiply(residual, residual), axis=0)


def predict(config: TransferConfig, model: SimilarityModel, pair) -> float:
    """Raw predicted score for one sentence pair.

    UE and DNT predict embedding cosine; FT and NT predict the head's
    expected bin score.
    """
    if config.setting in ("FT", "NT") and model.classifier is None:
        raise ContractError(f"{config.setting} prediction requires a classifier head")
    with InferenceTape():
        h_left = embed_sentence(model, pair.sentence_a)
        h_right = embed_sentence(model, pair.sentence_b)
        if config.setting in ("UE", "DNT"):
            return float(cosine(h_left, h_right).values)
        _, y_hat = classifier_forward(h_left, h_right, model.classifier)
        return float(y_hat.values)


def rescale_to_bins(score: float, score_range: tuple[float, float], bins: int,
                    context: str = "") -> float:
    """Affine map of an annotated score into the classifier's [1, K] range."""
    return normalize_score(score, score_range, (1.0, float(bins)), context=context)
