"""Feature construction for both data modalities.

Numeric features are 28 accounting ratios computed from fundamentals
mnemonics, standardized after mean imputation.  Text features are TF-IDF
vectors over word n-grams of the MD&A (item 7).
"""

from __future__ import annotations

import csv
import math
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .linkage import FundamentalsRecord

# Fixed ratio order; every feature matrix column i holds RATIO_NAMES[i].
RATIO_NAMES: tuple[str, ...] = (
    "ACT/LCT",
    "AP/SALE",
    "CHE/AT",
    "CH/AT",
    "CH/LCT",
    "(EBIT+DP)/AT",
    "EBIT/AT",
    "EBIT/SALE",
    "(DLC+0.5*DLTT)/AT",
    "INVCH/INVT",
    "INVT/SALE",
    "(LCT-CH)/AT",
    "LCT/AT",
    "LCT/LT",
    "LCT/SALE",
    "LT/AT",
    "log(AT)",
    "log(SALE)",
    "NI/AT",
    "NI/SALE",
    "OIADP/AT",
    "OIADP/SALE",
    "(ACT-INVT)/SALE",
    "RE/AT",
    "RE/LCT",
    "SALE/AT",
    "SEQ/AT",
    "WCAP/AT",
)

N_RATIOS = len(RATIO_NAMES)


def _div(numerator: float | None, denominator: float | None) -> float:
    if numerator is None or denominator is None or denominator == 0:
        return math.nan
    return numerator / denominator


def _log(value: float | None) -> float:
    if value is None or value <= 0:
        return math.nan
    return math.log(value)


def _add(a: float | None, b: float | None) -> float | None:
    if a is None or b is None:
        return None
    return a + b


def _sub(a: float | None, b: float | None) -> float | None:
    if a is None or b is None:
        return None
    return a - b


def compute_ratios(record: FundamentalsRecord) -> np.ndarray:
    """Evaluate the 28 ratios; NaN marks a missing value.

    A ratio is missing exactly when a required operand is missing, its
    denominator is zero, or a log argument is not positive.
    """
    v = record.values.get
    dltt_half = None if v("DLTT") is None else 0.5 * v("DLTT")
    out = np.array(
        [
            _div(v("ACT"), v("LCT")),
            _div(v("AP"), v("SALE")),
            _div(v("CHE"), v("AT")),
            _div(v("CH"), v("AT")),
            _div(v("CH"), v("LCT")),
            _div(_add(v("EBIT"), v("DP")), v("AT")),
            _div(v("EBIT"), v("AT")),
            _div(v("EBIT"), v("SALE")),
            _div(_add(v("DLC"), dltt_half), v("AT")),
            _div(v("INVCH"), v("INVT")),
            _div(v("INVT"), v("SALE")),
            _div(_sub(v("LCT"), v("CH")), v("AT")),
            _div(v("LCT"), v("AT")),
            _div(v("LCT"), v("LT")),
            _div(v("LCT"), v("SALE")),
            _div(v("LT"), v("AT")),
            _log(v("AT")),
            _log(v("SALE")),
            _div(v("NI"), v("AT")),
            _div(v("NI"), v("SALE")),
            _div(v("OIADP"), v("AT")),
            _div(v("OIADP"), v("SALE")),
            _div(_sub(v("ACT"), v("INVT")), v("SALE")),
            _div(v("RE"), v("AT")),
            _div(v("RE"), v("LCT")),
            _div(v("SALE"), v("AT")),
            _div(v("SEQ"), v("AT")),
            _div(v("WCAP"), v("AT")),
        ],
        dtype=float,
    )
    return out


def ratio_matrix(records: Iterable[FundamentalsRecord]) -> np.ndarray:
    rows = [compute_ratios(r) for r in records]
    return np.array(rows, dtype=float) if rows else np.empty((0, N_RATIOS))


# ---------------------------------------------------------------------------
# Imputing standardizer
# ---------------------------------------------------------------------------

@dataclass
class ScalerState:
    """Per-column imputation value, mean and population stddev, fitted on
    training rows only."""

    fill: np.ndarray
    mean: np.ndarray
    std: np.ndarray


def fit_scaler(train_matrix: np.ndarray) -> ScalerState:
    matrix = np.asarray(train_matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError("scaler must be fitted on a nonempty 2-d matrix")
    present = ~np.isnan(matrix)
    counts = present.sum(axis=0)
    sums = np.where(present, matrix, 0.0).sum(axis=0)
    fill = np.divide(sums, counts, out=np.zeros(matrix.shape[1]), where=counts > 0)
    imputed = np.where(present, matrix, fill)
    return ScalerState(fill=fill, mean=imputed.mean(axis=0), std=imputed.std(axis=0))


def transform(scaler: ScalerState, matrix: np.ndarray) -> np.ndarray:
    """Impute missing cells with the training fill value, then z-score.
    Degenerate (zero stddev) columns transform to 0."""
    matrix = np.asarray(matrix, dtype=float)
    imputed = np.where(np.isnan(matrix), scaler.fill, matrix)
    safe_std = np.where(scaler.std == 0, 1.0, scaler.std)
    z = (imputed - scaler.mean) / safe_std
    return np.where(scaler.std == 0, 0.0, z)


# ---------------------------------------------------------------------------
# TF-IDF over word n-grams
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens: maximal runs of alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


def _ngrams(tokens: Sequence[str], lo: int, hi: int) -> Iterable[str]:
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i : i + n])


@dataclass
class TfidfState:
    vocabulary: dict[str, int]
    document_frequency: dict[str, int]
    n_docs: int
    ngram_range: tuple[int, int]

    def idf(self, term: str) -> float:
        df = self.document_frequency.get(term, 0)
        return math.log((1 + self.n_docs) / (1 + df)) + 1.0


def fit_tfidf(train_docs: Sequence[str], ngram_range: tuple[int, int] = (1, 1)) -> TfidfState:
    """Build the vocabulary and document frequencies from training text.

    Terms are contiguous n-grams of lowercased alphanumeric tokens for each
    n in ``ngram_range``; indices are assigned in sorted term order.
    """
    lo, hi = ngram_range
    if not (1 <= lo <= hi):
        raise ValueError(f"bad ngram range: {ngram_range}")
    if not train_docs:
        raise ValueError("cannot fit on an empty corpus")
    df: dict[str, int] = {}
    for doc in train_docs:
        for term in set(_ngrams(tokenize(doc), lo, hi)):
            df[term] = df.get(term, 0) + 1
    vocabulary = {term: i for i, term in enumerate(sorted(df))}
    return TfidfState(
        vocabulary=vocabulary,
        document_frequency=df,
        n_docs=len(train_docs),
        ngram_range=(lo, hi),
    )


def vectorize(state: TfidfState, doc: str) -> dict[int, float]:
    """L2-normalized tf-idf of one document as a {column: value} mapping.

    tf is the raw in-document term count; idf = ln((1+N)/(1+df)) + 1.
    Out-of-vocabulary terms are ignored; an all-OOV document stays the zero
    vector.
    """
    lo, hi = state.ngram_range
    counts: dict[int, int] = {}
    for term in _ngrams(tokenize(doc), lo, hi):
        column = state.vocabulary.get(term)
        if column is not None:
            counts[column] = counts.get(column, 0) + 1
    inverse_vocab: dict[int, str] | None = None
    weights: dict[int, float] = {}
    for column, count in counts.items():
        if inverse_vocab is None:
            inverse_vocab = {i: t for t, i in state.vocabulary.items()}
        weights[column] = count * state.idf(inverse_vocab[column])
    norm = math.sqrt(sum(w * w for w in weights.values()))
    if norm == 0:
        return {}
    return {column: w / norm for column, w in sorted(weights.items())}


def tfidf_to_dict(state: TfidfState) -> dict:
    return {
        "vocabulary": state.vocabulary,
        "document_frequency": state.document_frequency,
        "n_docs": state.n_docs,
        "ngram_range": list(state.ngram_range),
    }


def tfidf_from_dict(payload: dict) -> TfidfState:
    return TfidfState(
        vocabulary={t: int(i) for t, i in payload["vocabulary"].items()},
        document_frequency={t: int(c) for t, c in payload["document_frequency"].items()},
        n_docs=int(payload["n_docs"]),
        ngram_range=tuple(payload["ngram_range"]),  # type: ignore[arg-type]
    )


def vectorize_all(state: TfidfState, docs: Sequence[str]) -> sparse.csr_matrix:
    """Vectorize many documents into a CSR matrix (rows align with docs)."""
    lo, hi = state.ngram_range
    idf = np.zeros(len(state.vocabulary))
    for term, column in state.vocabulary.items():
        idf[column] = state.idf(term)
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for doc in docs:
        counts: dict[int, int] = {}
        for term in _ngrams(tokenize(doc), lo, hi):
            column = state.vocabulary.get(term)
            if column is not None:
                counts[column] = counts.get(column, 0) + 1
        cols = sorted(counts)
        row = np.array([counts[c] * idf[c] for c in cols])
        norm = float(np.sqrt((row * row).sum()))
        if norm > 0:
            row /= norm
        indices.extend(cols)
        data.extend(row.tolist())
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (data, indices, indptr), shape=(len(docs), len(state.vocabulary))
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def write_feature_csv(
    path: str | Path,
    record_ids: Sequence[str],
    matrix: np.ndarray,
    labels: Sequence[bool] | None = None,
    splits: Sequence[str] | None = None,
) -> None:
    """Dense CSV with the 28 named ratio columns; empty cells are missing."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        header = ["record_id"]
        if labels is not None:
            header.append("label")
        if splits is not None:
            header.append("split")
        writer.writerow(header + list(RATIO_NAMES))
        for i, record_id in enumerate(record_ids):
            row: list[str] = [record_id]
            if labels is not None:
                row.append(str(int(labels[i])))
            if splits is not None:
                row.append(splits[i])
            row += ["" if math.isnan(x) else repr(float(x)) for x in matrix[i]]
            writer.writerow(row)


def read_feature_csv(
    path: str | Path,
) -> tuple[list[str], np.ndarray, list[int] | None, list[str] | None]:
    path = Path(path)
    record_ids: list[str] = []
    rows: list[list[float]] = []
    labels: list[int] = []
    splits: list[str] = []
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        fields = reader.fieldnames or []
        has_label = "label" in fields
        has_split = "split" in fields
        for record in reader:
            record_ids.append(record["record_id"])
            if has_label:
                labels.append(int(record["label"]))
            if has_split:
                splits.append(record["split"])
            rows.append(
                [float(record[name]) if record[name] != "" else math.nan for name in RATIO_NAMES]
            )
    matrix = np.array(rows, dtype=float) if rows else np.empty((0, N_RATIOS))
    return record_ids, matrix, labels if has_label else None, splits if has_split else None


def write_sparse_triplets(path: str | Path, matrix: sparse.csr_matrix) -> None:
    coo = matrix.tocoo()
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["row", "col", "value"])
        for r, c, v in zip(coo.row, coo.col, coo.data):
            writer.writerow([int(r), int(c), repr(float(v))])
