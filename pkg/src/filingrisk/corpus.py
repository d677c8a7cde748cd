"""Ingesting 10-K filings and computing corpus statistics.

A 10-K annual report is organised into 15 numbered items (business
description, MD&A, financial statements, ...).  This module segments raw
filing text into those items, reads and writes the JSONL corpus format,
classifies SIC codes into divisions, and aggregates corpus-level statistics.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path

ITEM_NUMBERS = tuple(range(1, 16))


class MalformedMetadata(ValueError):
    """Filing metadata is unusable (bad dates, inverted date order, ...)."""


# Item headers are matched at line starts.  A trailing letter (1A, 7A, 9B
# ...) marks a sub-item, which is folded into its parent and therefore not
# a segmentation boundary.
_ITEM_HEADER_RE = re.compile(
    r"^[ \t]*item\s+(\d{1,2})\s*([a-d])?(?![a-z0-9])\s*[.:\-–—]?",
    re.IGNORECASE | re.MULTILINE,
)

# Top-level SIC divisions keyed by inclusive code ranges.  Codes falling in
# none of the ranges (0000-0099, 1800-1999, 6800-6999, 9000-9099) are
# unclassified.
SIC_DIVISIONS: tuple[tuple[int, int, str], ...] = (
    (100, 999, "Agriculture, Forestry, Fishing"),
    (1000, 1499, "Mining"),
    (1500, 1799, "Construction"),
    (2000, 3999, "Manufacturing"),
    (4000, 4999, "Transportation & Public Utilities"),
    (5000, 5199, "Wholesale Trade"),
    (5200, 5999, "Retail Trade"),
    (6000, 6799, "Finance, Insurance, Real Estate"),
    (7000, 8999, "Services"),
    (9100, 9999, "Public Administration"),
)

UNCLASSIFIED = "Unclassified"


def add_years(day: dt.date, years: int) -> dt.date:
    """Shift a date by whole calendar years; Feb 29 maps to Feb 28."""
    try:
        return day.replace(year=day.year + years)
    except ValueError:
        return day.replace(year=day.year + years, month=2, day=28)


def _coerce_date(value, field_name: str) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, str):
        try:
            return dt.date.fromisoformat(value)
        except ValueError as exc:
            raise MalformedMetadata(f"{field_name}: {exc}") from exc
    raise MalformedMetadata(f"{field_name}: expected a date, got {value!r}")


@dataclass
class FilingDocument:
    """One parsed 10-K filing.

    ``items`` maps item number (1..15) to the verbatim text of that item;
    unmatched items hold the empty string.  ``filing_date`` is the day the
    report became public and is never before ``fiscal_year_end``, the last
    day of the period the report covers.
    """

    cik: str
    company_name: str
    filing_date: dt.date
    fiscal_year_end: dt.date
    items: dict[int, str]
    sic_code: int | None = None
    state: str | None = None

    def __post_init__(self) -> None:
        if self.filing_date < self.fiscal_year_end:
            raise MalformedMetadata(
                f"filing_date {self.filing_date} precedes fiscal_year_end "
                f"{self.fiscal_year_end}"
            )
        bad = set(self.items) - set(ITEM_NUMBERS)
        if bad:
            raise MalformedMetadata(f"item numbers out of range: {sorted(bad)}")

    @property
    def period_covered(self) -> tuple[dt.date, dt.date]:
        """The one-year reporting period ending at the fiscal year end."""
        return add_years(self.fiscal_year_end, -1), self.fiscal_year_end

    @property
    def total_words(self) -> int:
        return sum(len(text.split()) for text in self.items.values())

    @property
    def filing_year(self) -> int:
        return self.filing_date.year

    @property
    def record_id(self) -> str:
        return f"{self.cik}|{self.filing_date.isoformat()}"


def segment_items(raw_text: str) -> dict[int, str]:
    """Slice filing text into items 1..15 by locating item headers.

    When an item header appears more than once (table of contents vs body)
    the occurrence followed by the longest span until the next header wins.
    Items without a recognised header map to the empty string.
    """
    headers: list[tuple[int, int, int]] = []  # (start, text_start, item)
    for match in _ITEM_HEADER_RE.finditer(raw_text):
        number = int(match.group(1))
        if match.group(2) is not None or number not in ITEM_NUMBERS:
            continue
        headers.append((match.start(), match.end(), number))

    items = {number: "" for number in ITEM_NUMBERS}
    best: dict[int, tuple[int, int, int]] = {}  # item -> (span, text_start, end)
    for position, (start, text_start, number) in enumerate(headers):
        next_start = (
            headers[position + 1][0] if position + 1 < len(headers) else len(raw_text)
        )
        span = next_start - start
        current = best.get(number)
        if current is None or span > current[0]:
            best[number] = (span, text_start, next_start)
    for number, (_, text_start, end) in best.items():
        items[number] = raw_text[text_start:end].strip()
    return items


def parse_filing(raw_text: str, metadata: Mapping[str, object]) -> FilingDocument:
    """Build a FilingDocument from raw text plus identifying metadata.

    Never fails on text content: unparseable text degrades to all-empty
    items.  Raises MalformedMetadata for invalid or inverted dates.
    """
    sic = metadata.get("sic_code")
    return FilingDocument(
        cik=str(metadata["cik"]),
        company_name=str(metadata["company_name"]),
        filing_date=_coerce_date(metadata["filing_date"], "filing_date"),
        fiscal_year_end=_coerce_date(metadata["fiscal_year_end"], "fiscal_year_end"),
        items=segment_items(raw_text),
        sic_code=None if sic in (None, "") else int(sic),  # type: ignore[arg-type]
        state=metadata.get("state") or None,  # type: ignore[arg-type]
    )


# ---------------------------------------------------------------------------
# JSONL corpus format
# ---------------------------------------------------------------------------

@dataclass
class SkipReport:
    """Per-record load failures: (file name, 1-based line number, reason)."""

    records: list[tuple[str, int, str]] = field(default_factory=list)

    def add(self, file_name: str, line_number: int, reason: str) -> None:
        self.records.append((file_name, line_number, reason))

    @property
    def count(self) -> int:
        return len(self.records)


def document_to_record(doc: FilingDocument) -> dict:
    record: dict[str, object] = {
        "cik": doc.cik,
        "company": doc.company_name,
        "filing_date": doc.filing_date.isoformat(),
        "fiscal_year_end": doc.fiscal_year_end.isoformat(),
        "sic": doc.sic_code,
        "state": doc.state,
    }
    for number in ITEM_NUMBERS:
        record[f"item_{number}"] = doc.items.get(number, "")
    return record


def record_to_document(record: Mapping[str, object]) -> FilingDocument:
    has_items = any(f"item_{n}" in record for n in ITEM_NUMBERS)
    if not has_items and "raw_text" in record:
        return parse_filing(
            str(record["raw_text"]),
            {
                "cik": record["cik"],
                "company_name": record["company"],
                "filing_date": record["filing_date"],
                "fiscal_year_end": record["fiscal_year_end"],
                "sic_code": record.get("sic"),
                "state": record.get("state"),
            },
        )
    items = {n: str(record.get(f"item_{n}") or "") for n in ITEM_NUMBERS}
    sic = record.get("sic")
    return FilingDocument(
        cik=str(record["cik"]),
        company_name=str(record["company"]),
        filing_date=_coerce_date(record["filing_date"], "filing_date"),
        fiscal_year_end=_coerce_date(record["fiscal_year_end"], "fiscal_year_end"),
        items=items,
        sic_code=None if sic in (None, "") else int(sic),  # type: ignore[arg-type]
        state=record.get("state") or None,  # type: ignore[arg-type]
    )


def load_corpus(
    path: str | Path, skip_report: SkipReport | None = None
) -> Iterator[FilingDocument]:
    """Stream FilingDocuments from a JSONL file or a directory of them.

    Each line is one JSON object, either pre-segmented (item_1..item_15) or
    carrying raw_text to be segmented here.  Malformed lines are skipped and
    recorded on ``skip_report`` with their line number; memory use is bounded
    regardless of corpus size.
    """
    path = Path(path)
    files = sorted(path.glob("*.jsonl")) if path.is_dir() else [path]
    for file_path in files:
        with file_path.open(encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    yield record_to_document(record)
                except (ValueError, KeyError, TypeError) as exc:
                    if skip_report is not None:
                        skip_report.add(file_path.name, line_number, str(exc))


def write_corpus(docs: Iterable[FilingDocument], path: str | Path) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(json.dumps(document_to_record(doc), sort_keys=True))
            handle.write("\n")
            count += 1
    return count


# ---------------------------------------------------------------------------
# SIC divisions and corpus statistics
# ---------------------------------------------------------------------------

def sic_division(sic_code: int) -> str:
    """Map a 4-digit SIC code to its top-level division name."""
    if not 0 <= sic_code <= 9999:
        raise ValueError(f"SIC code out of range: {sic_code}")
    for low, high, name in SIC_DIVISIONS:
        if low <= sic_code <= high:
            return name
    return UNCLASSIFIED


@dataclass
class CorpusStats:
    n_filings: int
    n_companies: int
    mean_years_per_company: float | None
    mean_words_per_filing: float | None
    mean_words_per_item: dict[int, float]
    sic_division_distribution: dict[str, float]
    state_counts: dict[str, int] | None

    def to_json(self) -> str:
        payload = {
            "n_filings": self.n_filings,
            "n_companies": self.n_companies,
            "mean_years_per_company": self.mean_years_per_company,
            "mean_words_per_filing": self.mean_words_per_filing,
            "mean_words_per_item": {str(k): v for k, v in self.mean_words_per_item.items()},
            "sic_division_distribution": self.sic_division_distribution,
            "state_counts": self.state_counts,
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def corpus_stats(docs: Iterable[FilingDocument]) -> CorpusStats:
    """Single-pass aggregation over a corpus stream.

    Years per company counts one year of data per filing, grouped by CIK.
    A company's SIC division (and state) is taken from its first filing in
    stream order that carries the value.
    """
    n_filings = 0
    filings_per_company: dict[str, int] = {}
    company_sic: dict[str, int] = {}
    company_state: dict[str, str] = {}
    word_total = 0
    item_word_sums = {number: 0 for number in ITEM_NUMBERS}

    for doc in docs:
        n_filings += 1
        filings_per_company[doc.cik] = filings_per_company.get(doc.cik, 0) + 1
        if doc.sic_code is not None and doc.cik not in company_sic:
            company_sic[doc.cik] = doc.sic_code
        if doc.state and doc.cik not in company_state:
            company_state[doc.cik] = doc.state
        word_total += doc.total_words
        for number in ITEM_NUMBERS:
            item_word_sums[number] += len(doc.items.get(number, "").split())

    n_companies = len(filings_per_company)
    division_counts: dict[str, int] = {}
    for sic in company_sic.values():
        name = sic_division(sic)
        division_counts[name] = division_counts.get(name, 0) + 1
    total_with_sic = sum(division_counts.values())
    distribution = {
        name: count / total_with_sic for name, count in sorted(division_counts.items())
    }

    state_counts: dict[str, int] | None = None
    if company_state:
        state_counts = {}
        for state in company_state.values():
            state_counts[state] = state_counts.get(state, 0) + 1
        state_counts = dict(sorted(state_counts.items()))

    return CorpusStats(
        n_filings=n_filings,
        n_companies=n_companies,
        mean_years_per_company=(n_filings / n_companies) if n_companies else None,
        mean_words_per_filing=(word_total / n_filings) if n_filings else None,
        mean_words_per_item=(
            {n: item_word_sums[n] / n_filings for n in ITEM_NUMBERS} if n_filings else {}
        ),
        sic_division_distribution=distribution,
        state_counts=state_counts,
    )


def write_state_counts_csv(stats: CorpusStats, path: str | Path) -> None:
    lines = ["state,count"]
    for state, count in (stats.state_counts or {}).items():
        lines.append(f"{state},{count}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
