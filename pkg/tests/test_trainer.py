"""Tests for Adam, the training loop, early stopping, and grid search."""

import numpy as np
import pytest

from synthetic import already_optimal_pairs, as_split, make_model, overlap_pairs, random_pairs

from simxfer.autodiff import Tape, Tensor, backward, zero_grads
from simxfer.errors import ContractError, NumericError
from simxfer.trainer import (
    AdamState,
    CellResult,
    HyperGrid,
    TrainingConfig,
    adam_step,
    batch_loss,
    evaluate_split,
    grid_search,
    select_best_cell,
    train,
)
from simxfer.transfer import TransferConfig

DNT = TransferConfig("DNT", norm_range=(0.0, 1.0), freeze_wem=False)
DNT_LOCKED = TransferConfig("DNT", norm_range=(0.0, 1.0), freeze_wem=True)


# --- adam -------------------------------------------------------------------


def test_adam_first_step_closed_form():
    p = Tensor(np.array(0.0), trainable=True, name="p")
    state = AdamState([p])
    adam_step([p], [np.array(1.0)], state, lr=0.001)
    # m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
    assert float(p.values) == pytest.approx(-0.001 / (1 + 1e-8), abs=1e-12)
    assert state.t == 1


def test_adam_zero_gradient_means_no_update():
    p = Tensor([1.0, -2.0], trainable=True, name="p")
    state = AdamState([p])
    adam_step([p], [np.zeros(2)], state, lr=0.1)
    assert p.values.tolist() == [1.0, -2.0]


def test_adam_skips_frozen_tensors():
    p = Tensor([1.0], trainable=False, name="frozen")
    state = AdamState([p])
    adam_step([p], [np.array([5.0])], state, lr=0.1)
    assert p.values.tolist() == [1.0]


def test_adam_rejects_non_finite_gradient():
    p = Tensor([1.0], trainable=True, name="theta")
    state = AdamState([p])
    with pytest.raises(NumericError) as err:
        adam_step([p], [np.array([np.nan])], state, lr=0.1)
    assert "theta" in str(err.value)


def test_adam_reads_grad_slots_when_grads_omitted():
    p = Tensor([0.0], trainable=True, name="p")
    with Tape() as tape:
        from simxfer.autodiff import matmul, subtract

        loss = matmul(subtract(p, Tensor([3.0])), subtract(p, Tensor([3.0])))
    backward(tape, loss)
    state = AdamState([p])
    adam_step([p], None, state, lr=0.01)
    assert p.values[0] > 0  # moved toward 3
    zero_grads([p])


# --- training loop ----------------------------------------------------------


def test_train_already_optimal_terminates_by_patience():
    # gold range (0,1) makes normalization the identity, so gold == initial
    # cosine exactly and the first-epoch loss is exactly zero
    model = make_model(kind="word-average", dim=4, seed=5)
    pairs = already_optimal_pairs(model, 50, seed=6, score_range=(0.0, 1.0))
    split = as_split("train", pairs)
    dev = as_split("dev", pairs[:20])
    cfg = TrainingConfig(batch_size=16, learning_rate=0.001, max_epochs=30, patience=3, seed=1)
    before = evaluate_split(model, DNT, split.pairs, "pearson")
    model, history = train(model, DNT, split, dev, cfg)
    assert history.train_losses[0] == 0.0
    assert history.epochs_run < 30  # stopped by patience
    after = evaluate_split(model, DNT, split.pairs, "pearson")
    assert after == before


def test_train_determinism():
    def run():
        model = make_model(kind="bilstm-avg", hidden=3, dim=3, seed=11)
        pairs = overlap_pairs(20, seed=12)
        cfg = TrainingConfig(batch_size=8, learning_rate=0.01, max_epochs=4, patience=5, seed=2)
        model, history = train(model, DNT, as_split("train", pairs),
                               as_split("dev", pairs[:10]), cfg)
        return history

    a, b = run(), run()
    assert a.train_losses == b.train_losses
    assert a.dev_correlations == b.dev_correlations
    assert a.best_epoch == b.best_epoch
    for name in a.best_checkpoint:
        assert np.array_equal(a.best_checkpoint[name], b.best_checkpoint[name])


def test_early_stopping_returns_best_epoch():
    """Dev gold is anti-correlated with train gold, so dev peaks early."""
    model = make_model(kind="word-average", dim=4, seed=21)
    train_pairs = overlap_pairs(30, seed=22)
    dev_pairs = [
        type(p)(p.sentence_a, p.sentence_b, 5.0 - p.score, p.score_range) for p in train_pairs
    ]
    cfg = TrainingConfig(batch_size=8, learning_rate=0.01, max_epochs=25, patience=4, seed=3)
    model, history = train(model, DNT, as_split("train", train_pairs),
                           as_split("dev", dev_pairs), cfg)
    assert history.epochs_run < 25
    best = history.best_dev_correlation
    assert best == max(history.dev_correlations)
    assert best >= history.dev_correlations[-1]
    restored = evaluate_split(model, DNT, dev_pairs, "pearson")
    assert restored == pytest.approx(best, abs=1e-9)


def test_freeze_conservation_smoke():
    model = make_model(kind="bilstm-avg", hidden=3, dim=3, bins=5, seed=31)
    before = model.snapshot()
    pairs = random_pairs(16, seed=32)
    cfg = TrainingConfig(batch_size=8, learning_rate=0.01, max_epochs=2, patience=5, seed=4)
    ft = TransferConfig("FT", loss_kind="KL", bins=5)
    model, _ = train(model, ft, as_split("train", pairs), as_split("dev", pairs[:8]), cfg)
    after = model.snapshot()
    assert np.array_equal(before["wem.matrix"], after["wem.matrix"])
    for name in model.encoder_params.named_tensors():
        assert np.array_equal(before[name], after[name])
    assert any(not np.array_equal(before[n], after[n])
               for n in model.classifier.named_tensors())


def test_train_rejects_ue():
    model = make_model(kind="word-average", dim=3)
    pairs = random_pairs(4, seed=1)
    cfg = TrainingConfig()
    with pytest.raises(ContractError):
        train(model, TransferConfig("UE"), as_split("train", pairs),
              as_split("dev", pairs), cfg)


def test_train_requires_classifier_for_nt():
    model = make_model(kind="bilstm-avg", hidden=3, dim=3)  # no head
    pairs = random_pairs(4, seed=1)
    with pytest.raises(ContractError):
        train(model, TransferConfig("NT", loss_kind="MSE", bins=5),
              as_split("train", pairs), as_split("dev", pairs), TrainingConfig())


def test_constant_dev_predictions_treated_as_minus_one():
    model = make_model(kind="word-average", dim=3, seed=41)
    pairs = random_pairs(12, seed=42)
    # a dev split of identical sentence pairs predicts a constant 1.0
    same = [type(pairs[0])("tok1 tok2", "tok1 tok2", 1.0, (0.0, 5.0)),
            type(pairs[0])("tok3 tok4", "tok3 tok4", 2.0, (0.0, 5.0))]
    cfg = TrainingConfig(batch_size=4, learning_rate=0.001, max_epochs=2, patience=5, seed=5)
    model, history = train(model, DNT, as_split("train", pairs), as_split("dev", same), cfg)
    assert history.dev_correlations == [-1.0, -1.0]


def test_batch_loss_matches_manual_dnt(rng):
    from simxfer.transfer import normalize_score, predict

    model = make_model(kind="word-average", dim=4, seed=51)
    pairs = random_pairs(6, seed=52)
    with Tape():
        value = float(batch_loss(model, DNT_LOCKED, pairs).values)
    manual = np.mean([
        (predict(TransferConfig("UE"), model, p)
         - normalize_score(p.score, p.score_range, (0.0, 1.0))) ** 2
        for p in pairs
    ])
    assert value == pytest.approx(manual, abs=1e-12)


# --- grid search ------------------------------------------------------------


def test_default_grid_has_24_cells():
    assert len(HyperGrid().cells()) == 24


def test_grid_cells_ordered_for_tie_break():
    cells = HyperGrid(batch_sizes=(64, 32), learning_rates=(0.01, 0.001),
                      epoch_budgets=(30, 10)).cells()
    key = [(c.learning_rate, c.batch_size, c.max_epochs) for c in cells]
    assert key == sorted(key)


def test_select_best_cell_tie_break():
    def cell(lr, batch, epochs, corr):
        return CellResult(TrainingConfig(batch_size=batch, learning_rate=lr,
                                         max_epochs=epochs), corr, 0, 1)

    results = [cell(0.01, 64, 30, 0.5), cell(0.001, 32, 10, 0.5 + 5e-13)]
    assert select_best_cell(results) == 1  # tie -> smaller lr wins
    results = [cell(0.01, 64, 30, 0.5), cell(0.001, 32, 10, 0.6)]
    assert select_best_cell(results) == 1
    results = [cell(0.001, 32, 10, 0.7), cell(0.01, 64, 30, 0.5)]
    assert select_best_cell(results) == 0


def test_select_best_cell_all_failed():
    bad = CellResult(TrainingConfig(), -1.0, -1, 0, error="boom")
    with pytest.raises(NumericError):
        select_best_cell([bad])


def test_grid_search_singleton():
    pairs = overlap_pairs(16, seed=61)
    grid = HyperGrid(batch_sizes=(8,), learning_rates=(0.01,), epoch_budgets=(3,),
                     patience=5, seed=6)
    result = grid_search(lambda: make_model(kind="word-average", dim=4, seed=62),
                         DNT, as_split("train", pairs), as_split("dev", pairs[:8]), grid)
    assert len(result.cells) == 1
    assert result.best_config == grid.cells()[0]


def test_grid_search_keeps_all_results_and_matches_sequential():
    pairs = overlap_pairs(16, seed=71)
    grid = HyperGrid(batch_sizes=(8,), learning_rates=(0.01, 0.001), epoch_budgets=(2,),
                     patience=5, seed=7)

    def factory():
        return make_model(kind="word-average", dim=4, seed=72)

    sequential = grid_search(factory, DNT, as_split("train", pairs),
                             as_split("dev", pairs[:8]), grid, threads=1)
    threaded = grid_search(factory, DNT, as_split("train", pairs),
                           as_split("dev", pairs[:8]), grid, threads=2)
    assert len(sequential.cells) == 2
    assert [c.dev_correlation for c in sequential.cells] == \
        [c.dev_correlation for c in threaded.cells]
    assert sequential.best_config == threaded.best_config
