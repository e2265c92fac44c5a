"""Train direct network transfer end to end on the bundled fixture.

The untrained encoder already carries some signal (the embeddings
cluster by topic); training the embedding matrix so that pair cosine
tracks the normalized annotated score improves the correlation
substantially.  The best-dev-epoch checkpoint is what comes back, and
it round-trips bitwise through the checkpoint file format.
"""

import tempfile
from pathlib import Path

import numpy as np

from simxfer.checkpoint import load_checkpoint, save_checkpoint
from simxfer.data import DatasetSplit, load_generic_tsv, split_dataset
from simxfer.embeddings import load_embeddings
from simxfer.encoders import EncoderConfig, init_encoder
from simxfer.trainer import TrainingConfig, evaluate_split, train
from simxfer.transfer import SimilarityModel, TransferConfig

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

emb = load_embeddings(FIXTURES / "wordvecs_50d.txt", 50)
data = load_generic_tsv(FIXTURES / "activity_pairs.tsv", lo=0, hi=5)
train_pairs, dev_pairs = split_dataset(data.pairs, dev_fraction=0.15, seed=42)
test_pairs = load_generic_tsv(FIXTURES / "activity_pairs_test.tsv", lo=0, hi=5).pairs
print(f"{len(train_pairs)} train / {len(dev_pairs)} dev / {len(test_pairs)} test pairs")

config = EncoderConfig("word-average", input_dim=50)
model = SimilarityModel(emb.vocabulary, emb.embedding, config, init_encoder(config))

dnt = TransferConfig("DNT", norm_range=(0.0, 1.0), freeze_wem=False)
baseline = evaluate_split(model, TransferConfig("UE"), test_pairs, "pearson")
print(f"untrained (UE) test Pearson: {baseline:.4f}")

training = TrainingConfig(batch_size=32, learning_rate=0.01, max_epochs=60,
                          patience=8, seed=42)
model, history = train(model, dnt,
                       DatasetSplit("train", train_pairs, "pearson"),
                       DatasetSplit("dev", dev_pairs, "pearson"), training)

print(f"\nran {history.epochs_run} epochs; dev peaked at epoch {history.best_epoch} "
      f"with Pearson {history.best_dev_correlation:.4f}")
print("epoch  train-loss  dev-pearson")
step = max(1, history.epochs_run // 8)
for i in range(0, history.epochs_run, step):
    print(f"{i:>5}  {history.train_losses[i]:>10.5f}  {history.dev_correlations[i]:>11.4f}")

trained = evaluate_split(model, dnt, test_pairs, "pearson")
print(f"\ntrained DNT test Pearson: {trained:.4f} (baseline was {baseline:.4f})")

# checkpoints round-trip bitwise
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "best.ckpt"
    save_checkpoint(path, model.snapshot())
    restored = load_checkpoint(path)
    exact = all(np.array_equal(tensor.values, restored[name])
                for name, tensor in model.named_tensors().items())
    print(f"checkpoint round-trip bitwise exact: {exact}")
