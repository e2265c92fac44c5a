"""Compositional sentence encoders: token-vector sequence -> one embedding.

Three kinds: ``word-average`` (arithmetic mean of the token vectors,
no parameters), ``bilstm-avg`` (bidirectional LSTM, mean over per-step
concatenated hidden states) and ``bilstm-max`` (same recurrence,
elementwise max over steps).  The LSTM cell is the standard one: input,
forget and output gates via sigmoid, candidate via tanh, hidden state =
output gate * tanh(cell state).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    add,
    concat,
    elementwise_multiply,
    matmul,
    max_over_axis,
    mean_over_axis,
    select_row,
    sigmoid,
    stack,
    tanh,
)
from .errors import ContractError, DataError

ENCODER_KINDS = ("word-average", "bilstm-avg", "bilstm-max")

GATES = ("input", "forget", "output", "candidate")


@dataclass(frozen=True)
class EncoderConfig:
    kind: str
    input_dim: int
    hidden_dim: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ContractError(f"unknown encoder kind {self.kind!r}")
        if self.input_dim <= 0:
            raise ContractError("input_dim must be positive")
        if self.kind != "word-average" and self.hidden_dim <= 0:
            raise ContractError(f"{self.kind} requires a positive hidden_dim")

    @property
    def output_dim(self) -> int:
        return self.input_dim if self.kind == "word-average" else 2 * self.hidden_dim


@dataclass
class LstmDirection:
    """Gate parameters for one direction, keyed by gate name."""

    w: dict[str, Tensor]  # input weights, h x d
    u: dict[str, Tensor]  # recurrent weights, h x h
    b: dict[str, Tensor]  # biases, h

    def tensors(self) -> list[Tensor]:
        return [*self.w.values(), *self.u.values(), *self.b.values()]


@dataclass
class EncoderParameters:
    """The encoder parameter set; empty for word-average."""

    forward: LstmDirection | None = None
    backward: LstmDirection | None = None

    def tensors(self) -> list[Tensor]:
        out: list[Tensor] = []
        if self.forward is not None:
            out.extend(self.forward.tensors())
        if self.backward is not None:
            out.extend(self.backward.tensors())
        return out

    def named_tensors(self) -> dict[str, Tensor]:
        return {t.name: t for t in self.tensors()}

    def set_trainable(self, flag: bool) -> None:
        for t in self.tensors():
            t.trainable = flag


def _init_direction(rng: np.random.Generator, tag: str, d: int, h: int) -> LstmDirection:
    bound = 1.0 / np.sqrt(h)
    w, u, b = {}, {}, {}
    for gate in GATES:
        w[gate] = Tensor(rng.uniform(-bound, bound, size=(h, d)), trainable=True,
                         name=f"enc.{tag}.w_{gate}")
        u[gate] = Tensor(rng.uniform(-bound, bound, size=(h, h)), trainable=True,
                         name=f"enc.{tag}.u_{gate}")
        bias = np.ones(h) if gate == "forget" else np.zeros(h)
        b[gate] = Tensor(bias, trainable=True, name=f"enc.{tag}.b_{gate}")
    return LstmDirection(w, u, b)


def init_encoder(config: EncoderConfig) -> EncoderParameters:
    """Seeded parameter init: weights uniform in [-1/sqrt(h), 1/sqrt(h)],
    forget-gate bias 1.0, other biases zero."""
    if config.kind == "word-average":
        return EncoderParameters()
    rng = np.random.default_rng(config.seed)
    return EncoderParameters(
        forward=_init_direction(rng, "fw", config.input_dim, config.hidden_dim),
        backward=_init_direction(rng, "bw", config.input_dim, config.hidden_dim),
    )


def _lstm_states(direction: LstmDirection, steps: list[Tensor], h: int) -> list[Tensor]:
    hidden = Tensor(np.zeros(h))
    cell = Tensor(np.zeros(h))
    states = []
    for x in steps:
        gates = {}
        for gate in GATES:
            pre = add(add(matmul(direction.w[gate], x), matmul(direction.u[gate], hidden)),
                      direction.b[gate])
            gates[gate] = tanh(pre) if gate == "candidate" else sigmoid(pre)
        cell = add(elementwise_multiply(gates["forget"], cell),
                   elementwise_multiply(gates["input"], gates["candidate"]))
        hidden = elementwise_multiply(gates["output"], tanh(cell))
        states.append(hidden)
    return states


def encode(params: EncoderParameters, config: EncoderConfig, token_vectors: Tensor) -> Tensor:
    """Encode a T x d token-vector matrix into one embedding vector."""
    if token_vectors.values.ndim != 2:
        raise ContractError(f"token_vectors must be T x d, got shape {token_vectors.shape}")
    n_steps = token_vectors.shape[0]
    if n_steps == 0:
        raise DataError("empty sentence: nothing to encode")
    if config.kind == "word-average":
        return mean_over_axis(token_vectors, axis=0)
    if params.forward is None or params.backward is None:
        raise ContractError(f"{config.kind} requires initialized parameters")
    rows = [select_row(token_vectors, t) for t in range(n_steps)]
    fwd = _lstm_states(params.forward, rows, config.hidden_dim)
    bwd = list(reversed(_lstm_states(params.backward, rows[::-1], config.hidden_dim)))
    per_step = stack([concat((f, b)) for f, b in zip(fwd, bwd)])
    if config.kind == "bilstm-avg":
        return mean_over_axis(per_step, axis=0)
    return max_over_axis(per_step, axis=0)
