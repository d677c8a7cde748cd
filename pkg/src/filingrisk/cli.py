"""Command-line pipeline orchestration.

Stages exchange plain files (JSONL / CSV) so any of them can be replaced
by an external tool; every stage writes a manifest with input/output
hashes so reruns are verifiably byte-identical.  A single ``--seed`` fans
out to per-stage seeds through a documented hash (see ``manifest``).

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import datetime as dt
import json
import os
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import corpus as corpus_mod
from . import ensemble as ensemble_mod
from . import evaluation, features, labeling, linkage, llm, manifest, synth
from .models import (
    TrainConfig,
    class_weights,
    expand_grid,
    model_from_payload,
    oversample,
    read_scores,
    train_gbt,
    train_logreg,
    train_mlp,
    write_scores,
)
from .models.gbt import GbtParams
from .models.io import model_to_payload


class ConfigError(Exception):
    """Bad configuration or unusable command-line arguments."""


class DataError(Exception):
    """Input files are present but their content is unusable."""


NUMERIC_FAMILIES = ("logreg", "mlp", "gbt")
TEXT_FAMILY = "tfidf"


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as handle:
            config = yaml.safe_load(handle) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config file must hold a mapping")
    return config


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"missing required option {flag}")
    return value


def _out_dir(ctx) -> Path:
    out = Path(ctx.obj["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _master_seed(ctx) -> int:
    seed = ctx.obj["seed"]
    if seed is None:
        seed = ctx.obj["config"].get("seed")
    if seed is None:
        raise ConfigError("a seed is required (--seed or config key 'seed')")
    return int(seed)


def _labels_by_record(labeled_path: Path, split: str | None = None) -> dict[str, int]:
    labels: dict[str, int] = {}
    for row in labeling.read_labeled_records(labeled_path):
        if not row["qualified"]:
            continue
        if split and row["split"] != split:
            continue
        labels[row["record_id"]] = int(bool(row["label"]))
    if not labels:
        raise DataError(f"no qualified rows{f' in split {split}' if split else ''}")
    return labels


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML run configuration.")
@click.option("--seed", type=int, default=None, help="Master seed; fans out per stage.")
@click.option("--out", type=click.Path(), default=".", help="Output directory.")
@click.pass_context
def cli(ctx, config_path, seed, out):
    """Bankruptcy-risk pipeline over 10-K filings."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = _load_config(config_path)
    ctx.obj["config_path"] = config_path
    ctx.obj["seed"] = seed
    ctx.obj["out"] = out


# ---------------------------------------------------------------------------
# Data preparation stages
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.pass_context
def ingest(ctx, corpus_path):
    """Read a raw corpus (JSONL file or directory) into canonical form."""
    out = _out_dir(ctx)
    skips = corpus_mod.SkipReport()
    docs = corpus_mod.load_corpus(corpus_path, skip_report=skips)
    out_path = out / "corpus.jsonl"
    # Stream through a temp file so ingesting in place cannot truncate the input.
    tmp_path = out / "corpus.jsonl.tmp"
    count = corpus_mod.write_corpus(docs, tmp_path)
    tmp_path.replace(out_path)
    skip_path = out / "ingest_skips.json"
    skip_path.write_text(
        json.dumps({"skipped": skips.records, "count": skips.count}, sort_keys=True),
        encoding="utf-8",
    )
    manifest.write_manifest(
        out, "ingest", ctx.obj["config"], _master_seed(ctx),
        inputs={}, outputs={"corpus": out_path, "skips": skip_path},
    )
    click.echo(f"ingested {count} filings ({skips.count} skipped)")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.pass_context
def stats(ctx, corpus_path):
    """Corpus statistics (counts, word means, SIC division shares)."""
    out = _out_dir(ctx)
    result = corpus_mod.corpus_stats(corpus_mod.load_corpus(corpus_path))
    stats_path = out / "stats.json"
    stats_path.write_text(result.to_json() + "\n", encoding="utf-8")
    outputs = {"stats": stats_path}
    if result.state_counts is not None:
        state_path = out / "state_counts.csv"
        corpus_mod.write_state_counts_csv(result, state_path)
        outputs["state_counts"] = state_path
    manifest.write_manifest(
        out, "stats", ctx.obj["config"], _master_seed(ctx),
        inputs={"corpus": corpus_path}, outputs=outputs,
    )
    click.echo(f"{result.n_filings} filings from {result.n_companies} companies")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--fundamentals", "fundamentals_path", required=True, type=click.Path(exists=True))
@click.pass_context
def link(ctx, corpus_path, fundamentals_path):
    """Filter fundamentals to 10-K rows and match them to filings."""
    out = _out_dir(ctx)
    docs = list(corpus_mod.load_corpus(corpus_path))
    skips = corpus_mod.SkipReport()
    fundamentals = list(
        linkage.filter_fundamentals(linkage.load_fundamentals(fundamentals_path, skips))
    )
    result = linkage.match_records(docs, fundamentals)
    linked_path = out / "linked.jsonl"
    linkage.write_linked(result.linked, linked_path)
    summary_path = out / "link_summary.json"
    summary_path.write_text(
        json.dumps(
            {
                "linked": len(result.linked),
                "unmatched_filings": len(result.unmatched_filings),
                "unmatched_fundamentals": len(result.unmatched_fundamentals),
                "fundamentals_skipped": skips.count,
            },
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    manifest.write_manifest(
        out, "link", ctx.obj["config"], _master_seed(ctx),
        inputs={"corpus": corpus_path, "fundamentals": fundamentals_path},
        outputs={"linked": linked_path, "summary": summary_path},
    )
    click.echo(f"linked {len(result.linked)} records")


@cli.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--fundamentals", "fundamentals_path", required=True, type=click.Path(exists=True))
@click.option("--linked", "linked_path", required=True, type=click.Path(exists=True))
@click.option("--calendar", "calendar_path", required=True, type=click.Path(exists=True))
@click.option("--deflator", "deflator_path", type=click.Path(exists=True), default=None)
@click.pass_context
def label(ctx, corpus_path, fundamentals_path, linked_path, calendar_path, deflator_path):
    """Qualify linked records, assign labels and split tags."""
    out = _out_dir(ctx)
    docs = list(corpus_mod.load_corpus(corpus_path))
    fundamentals = list(
        linkage.filter_fundamentals(linkage.load_fundamentals(fundamentals_path))
    )
    refs = linkage.read_linked_refs(linked_path)
    try:
        linked = [
            linkage.LinkedRecord(
                filing=docs[r["filing_index"]],
                fundamentals=fundamentals[r["fundamentals_index"]],
                match_basis=linkage.MatchBasis(r["basis"]),
                date_gap_days=r["gap_days"],
                filing_index=r["filing_index"],
                fundamentals_index=r["fundamentals_index"],
            )
            for r in refs
        ]
    except (IndexError, KeyError) as exc:
        raise DataError(f"linked references do not match inputs: {exc}") from exc
    calendar = labeling.BankruptcyCalendar.from_csv(calendar_path)
    deflator = (
        labeling.load_deflator(deflator_path) if deflator_path else labeling.default_deflator()
    )
    examples, report = labeling.build_labeled(linked, calendar, deflator)
    labeled_path = out / "labeled.jsonl"
    labeling.write_labeled(examples, labeled_path)
    summary_path = out / "label_summary.json"
    summary_path.write_text(json.dumps(vars(report), sort_keys=True), encoding="utf-8")
    inputs = {
        "corpus": corpus_path,
        "fundamentals": fundamentals_path,
        "linked": linked_path,
        "calendar": calendar_path,
    }
    if deflator_path:
        inputs["deflator"] = deflator_path
    manifest.write_manifest(
        out, "label", ctx.obj["config"], _master_seed(ctx),
        inputs=inputs, outputs={"labeled": labeled_path, "summary": summary_path},
    )
    click.echo(f"labelled {report.qualified} qualified records")


@cli.command("split")
@click.option("--labeled", "labeled_path", required=True, type=click.Path(exists=True))
@click.pass_context
def split_cmd(ctx, labeled_path):
    """Summarise the temporal train/validation/test partition."""
    out = _out_dir(ctx)
    counts: dict[str, dict[str, int]] = {}
    for row in labeling.read_labeled_records(labeled_path):
        bucket = counts.setdefault(row["split"], {"n": 0, "n_pos": 0})
        bucket["n"] += 1
        bucket["n_pos"] += int(bool(row["label"]))
    full_train = {
        "n": sum(counts.get(s, {}).get("n", 0) for s in ("train", "validation")),
        "n_pos": sum(counts.get(s, {}).get("n_pos", 0) for s in ("train", "validation")),
    }
    counts["full_train"] = full_train
    split_path = out / "split_summary.json"
    split_path.write_text(json.dumps(counts, sort_keys=True, indent=2), encoding="utf-8")
    manifest.write_manifest(
        out, "split", ctx.obj["config"], _master_seed(ctx),
        inputs={"labeled": labeled_path}, outputs={"summary": split_path},
    )
    click.echo(json.dumps(counts, sort_keys=True))


@cli.command()
@click.option("--labeled", "labeled_path", required=True, type=click.Path(exists=True))
@click.pass_context
def featurize(ctx, labeled_path):
    """Emit the numeric feature matrix and the MD&A texts for qualified rows."""
    out = _out_dir(ctx)
    rows = [r for r in labeling.read_labeled_records(labeled_path) if r["qualified"]]
    if not rows:
        raise DataError("no qualified rows to featurize")
    record_ids = [r["record_id"] for r in rows]
    matrix = np.vstack(
        [
            features.compute_ratios(
                linkage.FundamentalsRecord(
                    company_name=r["company"],
                    fiscal_year_end=dt.date.fromisoformat(r["fiscal_year_end"]),
                    source_form=linkage.SourceForm.FORM_10K,
                    values={k: v for k, v in r["fundamentals"].items()},
                    cik=r["cik"],
                )
            )
            for r in rows
        ]
    )
    features_path = out / "features.csv"
    features.write_feature_csv(
        features_path,
        record_ids,
        matrix,
        labels=[bool(r["label"]) for r in rows],
        splits=[r["split"] for r in rows],
    )
    texts_path = out / "texts.jsonl"
    with texts_path.open("w", encoding="utf-8") as handle:
        for r in rows:
            handle.write(
                json.dumps(
                    {
                        "record_id": r["record_id"],
                        "label": int(bool(r["label"])),
                        "split": r["split"],
                        "text": r["item_7"],
                    },
                    sort_keys=True,
                )
            )
            handle.write("\n")
    manifest.write_manifest(
        out, "featurize", ctx.obj["config"], _master_seed(ctx),
        inputs={"labeled": labeled_path},
        outputs={"features": features_path, "texts": texts_path},
    )
    click.echo(f"featurized {len(rows)} rows")


# ---------------------------------------------------------------------------
# Model stages
# ---------------------------------------------------------------------------

def _read_texts(path: Path) -> list[dict]:
    rows = []
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def _select_split(splits: list[str], wanted: set[str]) -> np.ndarray:
    return np.array([s in wanted for s in splits], dtype=bool)


def _train_on_splits(train_on: str) -> set[str]:
    if train_on == "train":
        return {"train"}
    if train_on == "full_train":
        return {"train", "validation"}
    raise ConfigError(f"unknown train-on value: {train_on}")


def _fit_numeric(family, X, y, params, seed, oversample_ratio):
    if oversample_ratio is not None:
        X, y = oversample(X, y, oversample_ratio, seed)
    if family == "logreg":
        scaled_config = TrainConfig(seed=seed, epochs=params.pop("epochs", 500),
                                    learning_rate=params.pop("learning_rate", 0.5))
        return train_logreg(X, y, penalty=params.pop("penalty", "l2"),
                            reg_strength=params.pop("reg_strength", 1e-4), config=scaled_config)
    if family == "mlp":
        scaled_config = TrainConfig(seed=seed, epochs=params.pop("epochs", 60),
                                    learning_rate=1.0, batch_size=params.pop("batch_size", 256))
        return train_mlp(X, y, hidden_sizes=params.pop("hidden_sizes", [16]),
                         learning_rate=params.pop("learning_rate", 0.05),
                         reg_strength=params.pop("reg_strength", 1e-5), config=scaled_config)
    if family == "gbt":
        gbt_params = GbtParams(
            n_trees=params.pop("n_trees", 60),
            learning_rate=params.pop("learning_rate", 0.15),
            subsample=params.pop("subsample", 0.8),
            max_depth=params.pop("max_depth", 3),
            reg_lambda=params.pop("reg_lambda", 1.0),
        )
        return train_gbt(X, y, params=gbt_params, config=TrainConfig(seed=seed))
    raise ConfigError(f"unknown family: {family}")


def _train_model_envelope(family, features_path, texts_path, train_on, params, seed, oversample_ratio):
    trained_on = sorted(_train_on_splits(train_on))
    if family in NUMERIC_FAMILIES:
        if features_path is None:
            raise ConfigError("--features is required for numeric families")
        record_ids, matrix, labels, splits = features.read_feature_csv(features_path)
        if labels is None or splits is None:
            raise DataError("features file lacks label/split columns")
        mask = _select_split(splits, set(trained_on))
        if not mask.any():
            raise DataError(f"no rows in splits {trained_on}")
        X = matrix[mask]
        y = np.array(labels, dtype=float)[mask]
        envelope: dict = {"family": family, "trained_on": trained_on}
        if family in ("logreg", "mlp"):
            scaler = features.fit_scaler(X)
            X = features.transform(scaler, X)
            envelope["scaler"] = {
                "fill": scaler.fill.tolist(),
                "mean": scaler.mean.tolist(),
                "std": scaler.std.tolist(),
            }
        model = _fit_numeric(family, X, y, dict(params), seed, oversample_ratio)
        envelope["model"] = model_to_payload(model)
        return envelope
    if family == TEXT_FAMILY:
        if texts_path is None:
            raise ConfigError("--texts is required for the tfidf family")
        rows = _read_texts(Path(texts_path))
        train_rows = [r for r in rows if r["split"] in set(trained_on)]
        if not train_rows:
            raise DataError(f"no rows in splits {trained_on}")
        ngram_range = tuple(params.get("ngram_range", (1, 2)))
        state = features.fit_tfidf([r["text"] for r in train_rows], ngram_range=ngram_range)
        X = features.vectorize_all(state, [r["text"] for r in train_rows])
        y = np.array([r["label"] for r in train_rows], dtype=float)
        weights = class_weights(y)
        config = TrainConfig(seed=seed, epochs=params.get("epochs", 400), learning_rate=0.5)
        model = train_logreg(
            X, y, sample_weight=weights, penalty="l1",
            reg_strength=params.get("reg_strength", 1e-5), config=config,
        )
        return {
            "family": TEXT_FAMILY,
            "trained_on": trained_on,
            "tfidf": features.tfidf_to_dict(state),
            "model": model_to_payload(model),
        }
    raise ConfigError(f"unknown family: {family}")


def _score_envelope(envelope, features_path, texts_path, split):
    family = envelope["family"]
    model = model_from_payload(envelope["model"])
    if family in NUMERIC_FAMILIES:
        if features_path is None:
            raise ConfigError("--features is required for numeric families")
        record_ids, matrix, _, splits = features.read_feature_csv(features_path)
        if splits is None:
            raise DataError("features file lacks a split column")
        mask = _select_split(splits, {split})
        record_ids = [r for r, keep in zip(record_ids, mask) if keep]
        X = matrix[mask]
        if "scaler" in envelope:
            scaler = features.ScalerState(
                fill=np.array(envelope["scaler"]["fill"]),
                mean=np.array(envelope["scaler"]["mean"]),
                std=np.array(envelope["scaler"]["std"]),
            )
            X = features.transform(scaler, X)
        return record_ids, model.score(X)
    if family == TEXT_FAMILY:
        if texts_path is None:
            raise ConfigError("--texts is required for the tfidf family")
        rows = [r for r in _read_texts(Path(texts_path)) if r["split"] == split]
        state = features.tfidf_from_dict(envelope["tfidf"])
        X = features.vectorize_all(state, [r["text"] for r in rows])
        return [r["record_id"] for r in rows], model.score(X)
    raise DataError(f"unknown model family in file: {family}")


@cli.command()
@click.option("--family", required=True, type=click.Choice([*NUMERIC_FAMILIES, TEXT_FAMILY]))
@click.option("--features", "features_path", type=click.Path(exists=True), default=None)
@click.option("--texts", "texts_path", type=click.Path(exists=True), default=None)
@click.option("--train-on", default="train", type=click.Choice(["train", "full_train"]))
@click.option("--params", "params_json", default="{}", help="JSON hyperparameters.")
@click.pass_context
def train(ctx, family, features_path, texts_path, train_on, params_json):
    """Train one model family on the chosen split(s)."""
    out = _out_dir(ctx)
    try:
        params = json.loads(params_json)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--params is not valid JSON: {exc}") from exc
    params = {**ctx.obj["config"].get("params", {}).get(family, {}), **params}
    seed = manifest.stage_seed(_master_seed(ctx), f"train:{family}")
    oversample_ratio = (
        ctx.obj["config"].get("oversample_ratio", 0.05) if family in NUMERIC_FAMILIES else None
    )
    envelope = _train_model_envelope(
        family, features_path, texts_path, train_on, params, seed, oversample_ratio
    )
    model_path = out / f"model_{family}.json"
    model_path.write_text(json.dumps(envelope, sort_keys=True), encoding="utf-8")
    inputs = {}
    if features_path:
        inputs["features"] = features_path
    if texts_path:
        inputs["texts"] = texts_path
    manifest.write_manifest(
        out, f"train_{family}", ctx.obj["config"], seed,
        inputs=inputs, outputs={"model": model_path},
    )
    click.echo(f"trained {family} on {envelope['trained_on']}")


@cli.command()
@click.option("--family", required=True, type=click.Choice([*NUMERIC_FAMILIES, TEXT_FAMILY]))
@click.option("--features", "features_path", type=click.Path(exists=True), default=None)
@click.option("--texts", "texts_path", type=click.Path(exists=True), default=None)
@click.pass_context
def tune(ctx, family, features_path, texts_path):
    """Grid search on validation ROC-AUC; the grid comes from the config."""
    out = _out_dir(ctx)
    grid_axes = ctx.obj["config"].get("grids", {}).get(family)
    if not grid_axes:
        raise ConfigError(f"config lacks grids.{family}")
    grid = expand_grid(grid_axes)
    seed = manifest.stage_seed(_master_seed(ctx), f"tune:{family}")
    oversample_ratio = (
        ctx.obj["config"].get("oversample_ratio", 0.05) if family in NUMERIC_FAMILIES else None
    )

    best = None
    results = []
    for point in grid:
        envelope = _train_model_envelope(
            family, features_path, texts_path, "train", dict(point), seed, oversample_ratio
        )
        record_ids, scores = _score_envelope(envelope, features_path, texts_path, "validation")
        labels = _labels_by_record_for_ids(ctx, features_path, texts_path, record_ids, "validation")
        auc = evaluation.roc_auc(scores, labels)
        results.append({"params": point, "roc_auc": auc})
        if best is None or auc > best[1]:
            best = (point, auc)
    best_path = out / f"best_params_{family}.json"
    best_path.write_text(
        json.dumps({"params": best[0], "roc_auc": best[1]}, sort_keys=True), encoding="utf-8"
    )
    results_path = out / f"tuning_{family}.json"
    results_path.write_text(json.dumps(results, sort_keys=True, indent=2), encoding="utf-8")
    manifest.write_manifest(
        out, f"tune_{family}", ctx.obj["config"], seed,
        inputs={k: v for k, v in (("features", features_path), ("texts", texts_path)) if v},
        outputs={"best": best_path, "results": results_path},
    )
    click.echo(f"best {family} params: {best[0]} (val ROC-AUC {best[1]:.4f})")


def _labels_by_record_for_ids(ctx, features_path, texts_path, record_ids, split):
    """Labels aligned with record_ids, read from whichever stage file is at hand."""
    label_map: dict[str, int] = {}
    if features_path:
        ids, _, labels, splits = features.read_feature_csv(features_path)
        if labels is not None:
            label_map.update(zip(ids, labels))
    if texts_path and not label_map:
        for row in _read_texts(Path(texts_path)):
            label_map[row["record_id"]] = row["label"]
    try:
        return np.array([label_map[r] for r in record_ids], dtype=int)
    except KeyError as exc:
        raise DataError(f"no label for record {exc}") from exc


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--features", "features_path", type=click.Path(exists=True), default=None)
@click.option("--texts", "texts_path", type=click.Path(exists=True), default=None)
@click.option("--split", required=True, type=click.Choice(["train", "validation", "test"]))
@click.option("--name", default=None, help="Basename for the score files.")
@click.pass_context
def score(ctx, model_path, features_path, texts_path, split, name):
    """Score one split with a trained model; writes record_id,score CSV."""
    out = _out_dir(ctx)
    envelope = json.loads(Path(model_path).read_text(encoding="utf-8"))
    record_ids, scores = _score_envelope(envelope, features_path, texts_path, split)
    base = name or f"scores_{envelope['family']}_{split}"
    scores_path = out / f"{base}.csv"
    write_scores(scores_path, record_ids, scores)
    meta_path = out / f"{base}.meta.json"
    meta_path.write_text(
        json.dumps(
            {"trained_on": envelope["trained_on"], "scored_split": split,
             "family": envelope["family"]},
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    manifest.write_manifest(
        out, f"score_{base}", ctx.obj["config"], _master_seed(ctx),
        inputs={"model": model_path,
                **{k: v for k, v in (("features", features_path), ("texts", texts_path)) if v}},
        outputs={"scores": scores_path, "meta": meta_path},
    )
    click.echo(f"scored {len(record_ids)} rows -> {scores_path.name}")


@cli.command("ensemble")
@click.option("--val-scores-1", required=True, type=click.Path(exists=True))
@click.option("--val-scores-2", required=True, type=click.Path(exists=True))
@click.option("--test-scores-1", required=True, type=click.Path(exists=True))
@click.option("--test-scores-2", required=True, type=click.Path(exists=True))
@click.option("--labeled", "labeled_path", required=True, type=click.Path(exists=True))
@click.pass_context
def ensemble_cmd(ctx, val_scores_1, val_scores_2, test_scores_1, test_scores_2, labeled_path):
    """Fit the stacked meta-classifier on validation scores, then combine
    the test scores."""
    out = _out_dir(ctx)
    for scores_path in (val_scores_1, val_scores_2):
        sidecar = Path(str(scores_path).removesuffix(".csv") + ".meta.json")
        if sidecar.exists():
            info = json.loads(sidecar.read_text(encoding="utf-8"))
            try:
                ensemble_mod.ensure_meta_protocol(info["trained_on"], info["scored_split"])
            except ensemble_mod.DataLeakError as exc:
                raise DataError(str(exc)) from exc

    ids_1, val_1 = read_scores(val_scores_1)
    ids_2, val_2 = read_scores(val_scores_2)
    if ids_1 != ids_2:
        raise DataError("validation score files cover different records")
    labels = _labels_by_record(Path(labeled_path))
    try:
        y_val = np.array([labels[r] for r in ids_1], dtype=int)
    except KeyError as exc:
        raise DataError(f"no label for record {exc}") from exc
    if y_val.min() == y_val.max():
        raise DataError("validation labels contain a single class")
    meta = ensemble_mod.fit_meta(val_1, val_2, y_val)
    meta_path = out / "meta.json"
    meta.save(meta_path)

    test_ids_1, test_1 = read_scores(test_scores_1)
    test_ids_2, test_2 = read_scores(test_scores_2)
    if test_ids_1 != test_ids_2:
        raise DataError("test score files cover different records")
    combined = ensemble_mod.predict_meta(meta, test_1, test_2)
    combined_path = out / "scores_ensemble_test.csv"
    write_scores(combined_path, test_ids_1, combined)
    manifest.write_manifest(
        out, "ensemble", ctx.obj["config"], _master_seed(ctx),
        inputs={"val_scores_1": val_scores_1, "val_scores_2": val_scores_2,
                "test_scores_1": test_scores_1, "test_scores_2": test_scores_2,
                "labeled": labeled_path},
        outputs={"meta": meta_path, "combined": combined_path},
    )
    click.echo(
        f"meta coefficients: b0={meta.beta0:.4f} b1={meta.beta1:.4f} b2={meta.beta2:.4f}"
    )


# ---------------------------------------------------------------------------
# Evaluation stages
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--labeled", "labeled_path", required=True, type=click.Path(exists=True))
@click.option("--split", default=None, type=click.Choice(["train", "validation", "test"]))
@click.option("-k", "top_k", default=None, type=int)
@click.option("--name", default=None)
@click.pass_context
def evaluate(ctx, scores_path, labeled_path, split, top_k, name):
    """Rank metrics for one score file against the labelled dataset."""
    out = _out_dir(ctx)
    record_ids, scores = read_scores(scores_path)
    labels_map = _labels_by_record(Path(labeled_path), split)
    try:
        labels = np.array([labels_map[r] for r in record_ids], dtype=int)
    except KeyError as exc:
        raise DataError(f"no label for record {exc}") from exc
    k = top_k or ctx.obj["config"].get("metrics", {}).get("k", 100)
    try:
        report = evaluation.compute_report(name or Path(scores_path).stem, scores, labels, k=k)
    except evaluation.UndefinedMetric as exc:
        raise DataError(str(exc)) from exc
    paths = evaluation.render_report([report], out)
    manifest.write_manifest(
        out, f"evaluate_{report.name}", ctx.obj["config"], _master_seed(ctx),
        inputs={"scores": scores_path, "labeled": labeled_path},
        outputs={p.name: p for p in paths},
    )
    click.echo(
        f"{report.name}: ROC-AUC {report.roc_auc:.4f}  AP {report.ap:.4f}  "
        f"recall@{report.k} {report.recall_at_k:.4f}  CAP {report.cap_ratio:.4f}"
    )


@cli.command()
@click.option("--scores", "score_specs", multiple=True, required=True,
              help="name=path, repeatable.")
@click.option("--labeled", "labeled_path", required=True, type=click.Path(exists=True))
@click.option("--split", default=None, type=click.Choice(["train", "validation", "test"]))
@click.option("-k", "top_k", default=None, type=int)
@click.pass_context
def report(ctx, score_specs, labeled_path, split, top_k):
    """Metrics table plus PR/ROC/CAP curve files for several models."""
    out = _out_dir(ctx)
    labels_map = _labels_by_record(Path(labeled_path), split)
    k = top_k or ctx.obj["config"].get("metrics", {}).get("k", 100)
    reports = []
    inputs = {"labeled": labeled_path}
    for spec in score_specs:
        if "=" not in spec:
            raise ConfigError(f"--scores must be name=path, got {spec!r}")
        model_name, path = spec.split("=", 1)
        record_ids, scores = read_scores(path)
        try:
            labels = np.array([labels_map[r] for r in record_ids], dtype=int)
        except KeyError as exc:
            raise DataError(f"no label for record {exc}") from exc
        reports.append(evaluation.compute_report(model_name, scores, labels, k=k))
        inputs[model_name] = path
    paths = evaluation.render_report(reports, out)
    manifest.write_manifest(
        out, "report", ctx.obj["config"], _master_seed(ctx),
        inputs=inputs, outputs={p.name: p for p in paths},
    )
    click.echo(f"wrote {len(paths)} report files to {out}")


# ---------------------------------------------------------------------------
# LLM stages
# ---------------------------------------------------------------------------

@cli.command("llm-collect")
@click.option("--texts", "texts_path", required=True, type=click.Path(exists=True))
@click.option("--split", default="test", type=click.Choice(["train", "validation", "test"]))
@click.option("--sample", default=None, type=click.Choice(["balanced", "random"]))
@click.option("--sample-n", default=1000, type=int)
@click.option("--replay", "replay_path", type=click.Path(exists=True), default=None)
@click.pass_context
def llm_collect(ctx, texts_path, split, sample, sample_n, replay_path):
    """Prompt the endpoint (or a replay log) for summaries and 1-10 scores."""
    out = _out_dir(ctx)
    seed = manifest.stage_seed(_master_seed(ctx), "llm-collect")
    rows = [r for r in _read_texts(Path(texts_path)) if r["split"] == split]
    if not rows:
        raise DataError(f"no rows in split {split}")
    labels = {r["record_id"]: r["label"] for r in rows}
    ids = [r["record_id"] for r in rows]
    if sample == "balanced":
        ids = llm.balanced_sample(ids, labels, sample_n, seed)
    elif sample == "random":
        ids = llm.random_sample(ids, min(sample_n, len(ids)), seed)
    by_id = {r["record_id"]: r for r in rows}
    documents = [(record_id, by_id[record_id]["text"]) for record_id in ids]

    llm_config = ctx.obj["config"].get("llm", {})
    collect_config = llm.CollectConfig(
        max_tokens_budget=llm_config.get("max_tokens_budget", 3500),
        max_retries=llm_config.get("max_retries", 2),
        min_interval=llm_config.get("min_interval", 0.0),
        concurrency=llm_config.get("concurrency", 1),
    )
    if replay_path:
        transport = llm.ReplayTransport.from_jsonl(replay_path)
    else:
        base_url = llm_config.get("base_url")
        model_name = llm_config.get("model")
        if not base_url or not model_name:
            raise ConfigError("config llm.base_url and llm.model are required without --replay")
        api_key = os.environ.get(llm_config.get("api_key_env", "LLM_API_KEY"))
        transport = llm.HttpTransport(base_url, model_name, api_key=api_key)

    log_path = out / "llm_log.jsonl"
    result = llm.collect(documents, transport, collect_config, log_path=log_path)
    records_path = out / "llm_records.jsonl"
    with records_path.open("w", encoding="utf-8") as handle:
        for record in result.records:
            handle.write(
                json.dumps(
                    {
                        "record_id": record.record_id,
                        "summary": record.summary,
                        "score": record.score,
                        "status": record.extraction_status.value,
                    },
                    sort_keys=True,
                )
            )
            handle.write("\n")
    manifest.write_manifest(
        out, "llm_collect", ctx.obj["config"], seed,
        inputs={"texts": texts_path, **({"replay": replay_path} if replay_path else {})},
        outputs={"records": records_path, "log": log_path},
    )
    click.echo(f"collected {len(result.records)} responses (coverage {result.coverage:.1%})")


@cli.command("llm-eval")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--texts", "texts_path", required=True, type=click.Path(exists=True))
@click.option("--n-shuffles", default=50, type=int)
@click.option("--include-unscored", is_flag=True, default=False)
@click.pass_context
def llm_eval(ctx, records_path, texts_path, n_shuffles, include_unscored):
    """Tie-shuffled rank metrics for the collected 1-10 scores."""
    out = _out_dir(ctx)
    seed = manifest.stage_seed(_master_seed(ctx), "llm-eval")
    records = []
    with Path(records_path).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                row = json.loads(line)
                records.append(
                    llm.LlmResponseRecord(
                        record_id=row["record_id"],
                        summary=row.get("summary", ""),
                        score=row["score"],
                        raw_response="",
                        extraction_status=llm.ExtractionStatus(row["status"]),
                    )
                )
    labels = {r["record_id"]: r["label"] for r in _read_texts(Path(texts_path))}
    k = ctx.obj["config"].get("metrics", {}).get("k", 100)
    try:
        result = llm.shuffle_eval(
            records, labels, n_shuffles=n_shuffles, seed=seed, k=k,
            include_unscored=include_unscored,
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    metrics_path = out / "llm_metrics.json"
    metrics_path.write_text(result.to_json() + "\n", encoding="utf-8")
    manifest.write_manifest(
        out, "llm_eval", ctx.obj["config"], seed,
        inputs={"records": records_path, "texts": texts_path},
        outputs={"metrics": metrics_path},
    )
    click.echo(result.to_json())


# ---------------------------------------------------------------------------
# Synthetic benchmark
# ---------------------------------------------------------------------------

@cli.command("synth")
@click.option("--n", default=20_000, type=int)
@click.option("--neg-per-pos", default=125, type=int)
@click.option("--text-fraction", default=0.3, type=float)
@click.pass_context
def synth_cmd(ctx, n, neg_per_pos, text_fraction):
    """Generate the synthetic benchmark corpus with planted signals."""
    out = _out_dir(ctx)
    seed = manifest.stage_seed(_master_seed(ctx), "synth")
    config = synth.SynthConfig(n=n, neg_per_pos=neg_per_pos, text_signal_fraction=text_fraction)
    data = synth.generate(seed, config)
    paths = synth.write_synth(data, out)
    manifest.write_manifest(
        out, "synth", ctx.obj["config"], seed, inputs={}, outputs=paths,
    )
    click.echo(f"wrote synthetic corpus of {n} filings to {out}")


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return 1
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except click.Abort:
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
