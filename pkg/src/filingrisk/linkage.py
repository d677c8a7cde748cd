"""Linking filings to numerical fundamentals records.

Fundamentals rows are first filtered to those sourced from a Form 10-K,
then matched one-to-one against filings on company identity (CIK, or
normalized name) with fiscal year ends at most 7 days apart.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .corpus import FilingDocument, SkipReport

# Accounting mnemonics every fundamentals record carries (values may be missing).
MNEMONICS: tuple[str, ...] = (
    "ACT", "LCT", "AP", "SALE", "CHE", "CH", "AT", "EBIT", "DP", "DLC",
    "DLTT", "INVCH", "INVT", "LT", "NI", "OIADP", "RE", "SEQ", "WCAP",
)

MAX_GAP_DAYS = 7

_SUFFIX_TOKENS = {"INC", "CORP", "CO", "LTD", "LLC", "PLC"}


class SourceForm(Enum):
    FORM_10K = "10-K"
    OTHER = "other"


class MatchBasis(Enum):
    CIK = "cik"
    NAME = "name"


def normalize_name(name: str) -> str:
    """Canonical company-name form: uppercase alphanumeric tokens minus
    corporate suffixes, joined by single spaces."""
    cleaned = "".join(c if c.isalnum() else " " for c in name.upper())
    tokens = [t for t in cleaned.split() if t not in _SUFFIX_TOKENS]
    return " ".join(tokens)


@dataclass
class FundamentalsRecord:
    """One accounting record keyed by company and fiscal year end."""

    company_name: str
    fiscal_year_end: dt.date
    source_form: SourceForm
    values: dict[str, float | None]
    cik: str | None = None

    def __post_init__(self) -> None:
        at = self.values.get("AT")
        if at is not None and at < 0:
            raise ValueError(f"negative total assets: {at}")

    def get(self, mnemonic: str) -> float | None:
        return self.values.get(mnemonic)


@dataclass
class LinkedRecord:
    filing: FilingDocument
    fundamentals: FundamentalsRecord
    match_basis: MatchBasis
    date_gap_days: int
    filing_index: int = -1
    fundamentals_index: int = -1


@dataclass
class MatchResult:
    linked: list[LinkedRecord]
    unmatched_filings: list[FilingDocument]
    unmatched_fundamentals: list[FundamentalsRecord]


def filter_fundamentals(
    records: Iterable[FundamentalsRecord],
) -> Iterator[FundamentalsRecord]:
    """Keep exactly the records sourced from a Form 10-K, order preserved."""
    return (r for r in records if r.source_form is SourceForm.FORM_10K)


def _candidate_pairs(
    filings: list[FilingDocument], fundamentals: list[FundamentalsRecord]
) -> list[tuple[int, int, int, int]]:
    """(gap_days, basis_rank, filing_index, fundamentals_index) candidates.

    Blocked on CIK and normalized name so the pass stays near-linear.  A
    pair qualifying on both CIK and name is kept once, as a CIK match.
    """
    by_cik: dict[str, list[int]] = {}
    by_name: dict[str, list[int]] = {}
    for j, record in enumerate(fundamentals):
        if record.cik:
            by_cik.setdefault(record.cik, []).append(j)
        name = normalize_name(record.company_name)
        if name:
            by_name.setdefault(name, []).append(j)

    candidates = []
    for i, filing in enumerate(filings):
        seen: set[int] = set()
        cik_hits = by_cik.get(filing.cik, []) if filing.cik else []
        name_hits = by_name.get(normalize_name(filing.company_name), [])
        for basis_rank, hits in ((0, cik_hits), (1, name_hits)):
            for j in hits:
                if j in seen:
                    continue
                gap = abs((filing.fiscal_year_end - fundamentals[j].fiscal_year_end).days)
                if gap <= MAX_GAP_DAYS:
                    seen.add(j)
                    candidates.append((gap, basis_rank, i, j))
    return candidates


def match_records(
    filings: list[FilingDocument], fundamentals: list[FundamentalsRecord]
) -> MatchResult:
    """Greedy one-to-one assignment of filings to fundamentals records.

    Candidates share a CIK (both present) or a normalized company name, and
    have fiscal year ends no more than 7 days apart (inclusive).  Pairs are
    consumed in (gap, CIK-before-name, input order) order, so every filing
    gets its smallest-gap candidate still available.  Everything left over
    lands in the unmatched partitions, original order preserved.
    """
    candidates = sorted(_candidate_pairs(filings, fundamentals))
    used_filings: set[int] = set()
    used_fundamentals: set[int] = set()
    picked: list[tuple[int, int, int, int]] = []
    for gap, basis_rank, i, j in candidates:
        if i in used_filings or j in used_fundamentals:
            continue
        used_filings.add(i)
        used_fundamentals.add(j)
        picked.append((i, j, gap, basis_rank))

    picked.sort()
    linked = [
        LinkedRecord(
            filing=filings[i],
            fundamentals=fundamentals[j],
            match_basis=MatchBasis.CIK if basis_rank == 0 else MatchBasis.NAME,
            date_gap_days=gap,
            filing_index=i,
            fundamentals_index=j,
        )
        for i, j, gap, basis_rank in picked
    ]
    return MatchResult(
        linked=linked,
        unmatched_filings=[f for i, f in enumerate(filings) if i not in used_filings],
        unmatched_fundamentals=[
            r for j, r in enumerate(fundamentals) if j not in used_fundamentals
        ],
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def _parse_source_form(text: str) -> SourceForm:
    canonical = text.upper().replace("-", "").replace(" ", "")
    return SourceForm.FORM_10K if canonical in {"10K", "FORM10K"} else SourceForm.OTHER


def load_fundamentals(
    path: str | Path, skip_report: SkipReport | None = None
) -> list[FundamentalsRecord]:
    """Read fundamentals from CSV.

    Expected header: cik, company_name, fiscal_year_end (ISO-8601),
    source_form, plus one column per accounting mnemonic.  Empty cells are
    missing values.  Unusable rows are skipped and reported.
    """
    path = Path(path)
    records: list[FundamentalsRecord] = []
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        for line_number, row in enumerate(reader, start=2):
            try:
                values: dict[str, float | None] = {}
                for mnemonic in MNEMONICS:
                    cell = (row.get(mnemonic) or "").strip()
                    values[mnemonic] = float(cell) if cell else None
                records.append(
                    FundamentalsRecord(
                        company_name=row["company_name"],
                        fiscal_year_end=dt.date.fromisoformat(row["fiscal_year_end"]),
                        source_form=_parse_source_form(row.get("source_form", "")),
                        values=values,
                        cik=(row.get("cik") or "").strip() or None,
                    )
                )
            except (ValueError, KeyError) as exc:
                if skip_report is not None:
                    skip_report.add(path.name, line_number, str(exc))
    return records


def write_fundamentals(records: Iterable[FundamentalsRecord], path: str | Path) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["cik", "company_name", "fiscal_year_end", "source_form", *MNEMONICS])
        for record in records:
            writer.writerow(
                [
                    record.cik or "",
                    record.company_name,
                    record.fiscal_year_end.isoformat(),
                    record.source_form.value,
                    *[
                        "" if record.values.get(m) is None else repr(record.values[m])
                        for m in MNEMONICS
                    ],
                ]
            )
            count += 1
    return count


def write_linked(linked: Iterable[LinkedRecord], path: str | Path) -> int:
    """Write LinkedRecord references (indices into the two inputs) as JSONL."""
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for record in linked:
            handle.write(
                json.dumps(
                    {
                        "filing_index": record.filing_index,
                        "fundamentals_index": record.fundamentals_index,
                        "filing_cik": record.filing.cik,
                        "filing_date": record.filing.filing_date.isoformat(),
                        "basis": record.match_basis.value,
                        "gap_days": record.date_gap_days,
                    },
                    sort_keys=True,
                )
            )
            handle.write("\n")
            count += 1
    return count


def read_linked_refs(path: str | Path) -> list[dict]:
    refs = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                refs.append(json.loads(line))
    return refs
