"""Command-line front end.

Subcommands:
  run    one experiment using the first value of each hyperparameter list
  grid   the full hyperparameter grid, reporting every cell
  eval   untrained (UE) evaluation only
  table  aggregate report files into one model x dataset table

Experiment specs are flat ``key = value`` text files ('#' starts a
comment).  Relative dataset and embedding paths are resolved against the
``SIMXFER_DATA_DIR`` environment variable when it is set.  Exit codes:
0 success, 1 usage error, 2 data error, 3 numeric failure.

Report files are deterministic TSV: identical spec and seed produce
byte-identical files.  Wall-clock timing is printed to stdout only and
deliberately kept out of the file.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .data import DatasetSplit, LoadResult, load_generic_tsv, load_sick, load_sts_benchmark, split_dataset
from .embeddings import EmbeddingMatrix, load_embeddings
from .encoders import ENCODER_KINDS, EncoderConfig, init_encoder
from .errors import ContractError, DataError, NumericError, ShapeError, SimxferError, SpecError
from .autodiff import Tensor
from .trainer import (
    DEFAULT_BATCH_SIZES,
    DEFAULT_EPOCH_BUDGETS,
    DEFAULT_LEARNING_RATES,
    HyperGrid,
    evaluate_split,
    grid_search,
    train,
)
from .transfer import (
    DEFAULT_BINS,
    DEFAULT_HIDDEN_WIDTH,
    SimilarityModel,
    TransferConfig,
    init_classifier,
)

REPORT_HEADER = "simxfer-report 1"
ENV_DATA_DIR = "SIMXFER_DATA_DIR"

_KNOWN_KEYS = {
    "name", "seed", "out", "metric",
    "data.format", "data.train", "data.dev", "data.test", "data.dev_fraction",
    "data.score_lo", "data.score_hi",
    "embeddings.path", "embeddings.dim",
    "encoder.kind", "encoder.hidden", "encoder.seed",
    "transfer.setting", "transfer.loss", "transfer.freeze_wem",
    "transfer.norm_lo", "transfer.norm_hi", "transfer.bins",
    "classifier.hidden", "classifier.seed",
    "train.batch_sizes", "train.learning_rates", "train.epoch_budgets", "train.patience",
}


def parse_spec_file(path) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise SpecError(f"cannot open spec file {path}: {exc}") from exc
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise SpecError(f"{path}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise SpecError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise SpecError(f"expected a boolean, got {text!r}")


@dataclass
class ExperimentSpec:
    """A fully-resolved experiment configuration."""

    name: str
    seed: int
    out: str | None
    data_format: str
    train_path: Path
    dev_path: Path | None
    test_path: Path
    dev_fraction: float
    score_range: tuple[float, float]
    metric: str
    embeddings_path: Path
    embeddings_dim: int
    encoder: EncoderConfig
    transfer: TransferConfig
    classifier_hidden: int
    classifier_seed: int
    grid: HyperGrid

    def setting_label(self) -> str:
        cfg = self.transfer
        label = cfg.setting
        if cfg.loss_kind:
            label += f"-{cfg.loss_kind}"
        if cfg.setting in ("NT", "DNT") and not cfg.freeze_wem:
            label += "+wem"
        return label


def _resolve(path_text: str) -> Path:
    path = Path(path_text)
    prefix = os.environ.get(ENV_DATA_DIR)
    if prefix and not path.is_absolute():
        return Path(prefix) / path
    return path


def build_spec(entries: dict[str, str], path, seed_override: int | None = None,
               out_override: str | None = None) -> ExperimentSpec:
    def need(key: str) -> str:
        if key not in entries:
            raise SpecError(f"{path}: missing required key {key!r}")
        return entries[key]

    try:
        data_format = need("data.format")
        if data_format not in ("generic", "sts_benchmark", "sick"):
            raise SpecError(f"{path}: unknown data.format {data_format!r}")
        if data_format == "generic":
            score_range = (float(need("data.score_lo")), float(need("data.score_hi")))
            metric = entries.get("metric", "pearson")
        else:
            score_range = (0.0, 5.0) if data_format == "sts_benchmark" else (1.0, 5.0)
            metric = entries.get("metric", "pearson")
            if metric != "pearson":
                raise SpecError(f"{path}: {data_format} reports Pearson's r; metric must be pearson")
        if metric not in ("pearson", "spearman"):
            raise SpecError(f"{path}: unknown metric {metric!r}")

        seed = seed_override if seed_override is not None else int(entries.get("seed", "0"))
        setting = need("transfer.setting").upper()
        loss = entries.get("transfer.loss")
        norm_range = None
        bins = None
        if setting == "DNT":
            norm_range = (float(entries.get("transfer.norm_lo", "0")),
                          float(entries.get("transfer.norm_hi", "1")))
        if setting in ("FT", "NT"):
            loss = (loss or "MSE").upper()
            bins = int(entries.get("transfer.bins", str(DEFAULT_BINS)))
        else:
            loss = None
        transfer = TransferConfig(
            setting=setting,
            loss_kind=loss,
            freeze_wem=_bool(entries.get("transfer.freeze_wem", "true")),
            norm_range=norm_range,
            bins=bins,
        )

        embeddings_dim = int(need("embeddings.dim"))
        encoder = EncoderConfig(
            kind=entries.get("encoder.kind", "word-average"),
            input_dim=embeddings_dim,
            hidden_dim=int(entries.get("encoder.hidden", "0")),
            seed=int(entries.get("encoder.seed", str(seed + 1))),
        )
        if encoder.kind not in ENCODER_KINDS:
            raise SpecError(f"{path}: unknown encoder.kind {encoder.kind!r}")

        grid = HyperGrid(
            batch_sizes=_ints(entries.get("train.batch_sizes", "")) or DEFAULT_BATCH_SIZES,
            learning_rates=_floats(entries.get("train.learning_rates", "")) or DEFAULT_LEARNING_RATES,
            epoch_budgets=_ints(entries.get("train.epoch_budgets", "")) or DEFAULT_EPOCH_BUDGETS,
            patience=int(entries.get("train.patience", "5")),
            seed=seed,
        )

        train_path = _resolve(need("data.train"))
        spec = ExperimentSpec(
            name=entries.get("name", Path(need("data.train")).stem),
            seed=seed,
            out=out_override if out_override is not None else entries.get("out"),
            data_format=data_format,
            train_path=train_path,
            dev_path=_resolve(entries["data.dev"]) if "data.dev" in entries else None,
            test_path=_resolve(need("data.test")),
            dev_fraction=float(entries.get("data.dev_fraction", "0.15")),
            score_range=score_range,
            metric=metric,
            embeddings_path=_resolve(need("embeddings.path")),
            embeddings_dim=embeddings_dim,
            encoder=encoder,
            transfer=transfer,
            classifier_hidden=int(entries.get("classifier.hidden", str(DEFAULT_HIDDEN_WIDTH))),
            classifier_seed=int(entries.get("classifier.seed", str(seed + 2))),
            grid=grid,
        )
    except (ValueError, ContractError) as exc:
        raise SpecError(f"{path}: {exc}") from exc
    return spec


@dataclass
class ExperimentReport:
    dataset: str
    metric: str
    encoder: str
    setting: str
    test_correlation: float
    dev_correlation: float | None = None
    best_batch_size: int | None = None
    best_learning_rate: float | None = None
    best_max_epochs: int | None = None
    best_epoch: int | None = None
    warnings: int = 0
    cells: list[tuple[int, float, int, float]] = field(default_factory=list)
    wall_clock_seconds: float | None = None  # in-memory only, never serialized


def write_report(report: ExperimentReport, path) -> None:
    lines = [REPORT_HEADER]
    lines.append(f"dataset\t{report.dataset}")
    lines.append(f"metric\t{report.metric}")
    lines.append(f"encoder\t{report.encoder}")
    lines.append(f"setting\t{report.setting}")
    lines.append(f"test_correlation\t{report.test_correlation!r}")
    if report.dev_correlation is not None:
        lines.append(f"dev_correlation\t{report.dev_correlation!r}")
    if report.best_batch_size is not None:
        lines.append(f"best_batch_size\t{report.best_batch_size}")
        lines.append(f"best_learning_rate\t{report.best_learning_rate!r}")
        lines.append(f"best_max_epochs\t{report.best_max_epochs}")
        lines.append(f"best_epoch\t{report.best_epoch}")
    lines.append(f"warnings\t{report.warnings}")
    for batch, lr, epochs, corr in report.cells:
        lines.append(f"cell\t{batch}\t{lr!r}\t{epochs}\t{corr!r}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        out.write("\n".join(lines) + "\n")


def parse_report(path) -> ExperimentReport:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot open report {path}: {exc}") from exc
    if not lines or lines[0] != REPORT_HEADER:
        raise DataError(f"{path}: not a report file (missing '{REPORT_HEADER}')")
    fields: dict[str, str] = {}
    cells: list[tuple[int, float, int, float]] = []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split("\t")
        if parts[0] == "cell":
            if len(parts) != 5:
                raise DataError(f"{path}: malformed cell line {line!r}")
            cells.append((int(parts[1]), float(parts[2]), int(parts[3]), float(parts[4])))
        elif len(parts) == 2:
            fields[parts[0]] = parts[1]
        else:
            raise DataError(f"{path}: malformed report line {line!r}")
    try:
        return ExperimentReport(
            dataset=fields["dataset"],
            metric=fields["metric"],
            encoder=fields["encoder"],
            setting=fields["setting"],
            test_correlation=float(fields["test_correlation"]),
            dev_correlation=float(fields["dev_correlation"]) if "dev_correlation" in fields else None,
            best_batch_size=int(fields["best_batch_size"]) if "best_batch_size" in fields else None,
            best_learning_rate=float(fields["best_learning_rate"]) if "best_learning_rate" in fields else None,
            best_max_epochs=int(fields["best_max_epochs"]) if "best_max_epochs" in fields else None,
            best_epoch=int(fields["best_epoch"]) if "best_epoch" in fields else None,
            warnings=int(fields.get("warnings", "0")),
            cells=cells,
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: incomplete report: {exc}") from exc


TIE_MARGIN = 0.002


def emit_table(reports: list[ExperimentReport]) -> tuple[str, str]:
    """Render reports as (tab-separated, aligned-text) tables.

    One row per (encoder, setting), one column per dataset/metric.  The
    best result per encoder and dataset is starred; results within .002
    of the best count as ties and are starred too.
    """
    if not reports:
        raise ContractError("emit_table requires at least one report")
    datasets: list[str] = []
    rows: list[tuple[str, str]] = []
    values: dict[tuple[str, str, str], float] = {}
    for rep in reports:
        column = f"{rep.dataset}/{rep.metric}"
        if column not in datasets:
            datasets.append(column)
        row = (rep.encoder, rep.setting)
        if row not in rows:
            rows.append(row)
        key = (rep.encoder, rep.setting, column)
        if key in values:
            raise DataError(f"duplicate report for encoder={rep.encoder} "
                            f"setting={rep.setting} dataset={column}")
        values[key] = rep.test_correlation

    best: dict[tuple[str, str], float] = {}
    for (encoder, _setting, column), corr in values.items():
        cur = best.get((encoder, column))
        if cur is None or corr > cur:
            best[(encoder, column)] = corr

    header = ["encoder", "setting", *datasets]
    table_rows: list[list[str]] = []
    for encoder, setting in rows:
        cells = []
        for column in datasets:
            corr = values.get((encoder, setting, column))
            if corr is None:
                cells.append("-")
                continue
            mark = "*" if best[(encoder, column)] - corr < TIE_MARGIN else ""
            cells.append(f"{corr:.3f}{mark}")
        table_rows.append([encoder, setting, *cells])

    tsv = "\n".join("\t".join(r) for r in [header, *table_rows]) + "\n"
    widths = [max(len(r[i]) for r in [header, *table_rows]) for i in range(len(header))]
    pretty_lines = []
    for r in [header, *table_rows]:
        pretty_lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    pretty = "\n".join(pretty_lines) + "\n"
    return tsv, pretty


def _load_pairs(spec: ExperimentSpec, path) -> LoadResult:
    if spec.data_format == "sts_benchmark":
        return load_sts_benchmark(path)
    if spec.data_format == "sick":
        return load_sick(path)
    return load_generic_tsv(path, *spec.score_range)


def run_experiment(spec: ExperimentSpec, mode: str, threads: int = 1) -> ExperimentReport:
    """Load data and embeddings, build the model, train per mode, score test."""
    started = time.perf_counter()
    if mode == "eval" and spec.transfer.setting != "UE":
        raise SpecError(f"eval runs UE only; spec requests {spec.transfer.setting}")
    if mode != "eval" and spec.transfer.setting == "UE":
        raise SpecError("UE has no training; use the eval subcommand")

    emb = load_embeddings(spec.embeddings_path, spec.embeddings_dim)
    warnings = emb.skipped_lines
    train_result = _load_pairs(spec, spec.train_path)
    warnings += train_result.warnings
    if spec.dev_path is not None:
        dev_pairs = _load_pairs(spec, spec.dev_path)
        warnings += dev_pairs.warnings
        train_pairs, dev_pairs = train_result.pairs, dev_pairs.pairs
    else:
        train_pairs, dev_pairs = split_dataset(train_result.pairs, spec.dev_fraction, spec.seed)
    test_result = _load_pairs(spec, spec.test_path)
    warnings += test_result.warnings

    initial_matrix = emb.embedding.matrix.values

    def model_factory() -> SimilarityModel:
        matrix = Tensor(initial_matrix.copy(), name="wem.matrix")
        classifier = None
        if spec.transfer.setting in ("FT", "NT"):
            classifier = init_classifier(spec.encoder.output_dim, spec.transfer.bins,
                                         spec.classifier_hidden, seed=spec.classifier_seed)
        model = SimilarityModel(
            vocabulary=emb.vocabulary,
            embedding=EmbeddingMatrix(matrix, spec.embeddings_dim),
            encoder_config=spec.encoder,
            encoder_params=init_encoder(spec.encoder),
            classifier=classifier,
        )
        model.apply_freeze_policy(spec.transfer)
        return model

    report = ExperimentReport(
        dataset=spec.name,
        metric=spec.metric,
        encoder=spec.encoder.kind,
        setting=spec.setting_label(),
        test_correlation=0.0,
        warnings=warnings,
    )

    if mode == "eval":
        model = model_factory()
    else:
        train_split = DatasetSplit("train", train_pairs, spec.metric)
        dev_split = DatasetSplit("dev", dev_pairs, spec.metric)
        if mode == "run":
            cell = spec.grid.cells()[0]
            model, history = train(model_factory(), spec.transfer, train_split, dev_split, cell)
            report.cells = [(cell.batch_size, cell.learning_rate, cell.max_epochs,
                             history.best_dev_correlation)]
            best_config, best_history = cell, history
        else:
            result = grid_search(model_factory, spec.transfer, train_split, dev_split,
                                 spec.grid, threads=threads)
            model = result.best_model
            best_config, best_history = result.best_config, result.best_history
            report.cells = [(c.config.batch_size, c.config.learning_rate,
                             c.config.max_epochs, c.dev_correlation) for c in result.cells]
        report.dev_correlation = best_history.best_dev_correlation
        report.best_batch_size = best_config.batch_size
        report.best_learning_rate = best_config.learning_rate
        report.best_max_epochs = best_config.max_epochs
        report.best_epoch = best_history.best_epoch

    report.test_correlation = evaluate_split(model, spec.transfer,
                                             test_result.pairs, spec.metric)
    report.wall_clock_seconds = time.perf_counter() - started
    if spec.out:
        write_report(report, spec.out)
    return report


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simxfer", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "grid", "eval"):
        p = sub.add_parser(name)
        p.add_argument("--spec", required=True, help="experiment spec file")
        p.add_argument("--seed", type=int, default=None, help="override the spec's seed")
        p.add_argument("--out", default=None, help="report output path (overrides spec)")
        p.add_argument("--threads", type=int, default=1, help="parallel grid cells")
    p = sub.add_parser("table")
    p.add_argument("reports", nargs="+", help="report files to aggregate")
    p.add_argument("--out", default=None, help="write the TSV table here")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "table":
            reports = [parse_report(p) for p in args.reports]
            tsv, pretty = emit_table(reports)
            if args.out:
                Path(args.out).parent.mkdir(parents=True, exist_ok=True)
                Path(args.out).write_text(tsv, encoding="utf-8")
            sys.stdout.write(pretty)
            return 0
        entries = parse_spec_file(args.spec)
        spec = build_spec(entries, args.spec, seed_override=args.seed, out_override=args.out)
        report = run_experiment(spec, args.command, threads=args.threads)
        label = f"{report.encoder} [{report.setting}] on {report.dataset}"
        sys.stdout.write(f"{label}: test {report.metric} = {report.test_correlation:.4f}\n")
        if report.best_batch_size is not None:
            sys.stdout.write(
                f"best cell: batch={report.best_batch_size} lr={report.best_learning_rate} "
                f"epochs={report.best_max_epochs} (dev {report.dev_correlation:.4f})\n")
        sys.stdout.write(f"wall clock: {report.wall_clock_seconds:.2f}s\n")
        if spec.out:
            sys.stdout.write(f"report written to {spec.out}\n")
        return 0
    except SpecError as exc:
        sys.stderr.write(f"simxfer: spec error: {exc}\n")
        return 1
    except DataError as exc:
        sys.stderr.write(f"simxfer: data error: {exc}\n")
        return 2
    except (NumericError, ShapeError, ContractError) as exc:
        sys.stderr.write(f"simxfer: numeric error: {exc}\n")
        return 3
    except SimxferError as exc:
        sys.stderr.write(f"simxfer: error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
