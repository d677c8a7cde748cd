"""Qualification, next-year bankruptcy labels, and temporal splits.

A linked filing is qualified when its total assets exceed an
inflation-adjusted $100M (1980 dollars) threshold and its one-year
prediction window fits inside the bankruptcy calendar's coverage.  The
label is positive when the company filed for bankruptcy within one
calendar year after the filing date: the window is open at the filing
date and closed at filing date + 1 year, so a bankruptcy exactly one year
out counts and one on the filing day itself (already public) does not.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .corpus import add_years
from .linkage import LinkedRecord, normalize_name

ASSET_THRESHOLD_1980 = 100_000_000.0
DEFAULT_COVERAGE = (dt.date(1979, 1, 1), dt.date(2022, 12, 31))

TRAIN_LAST_YEAR = 2011
VALIDATION_LAST_YEAR = 2015


class MissingAssets(ValueError):
    """Total assets are absent, so qualification cannot be decided."""


class Split(Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"
    NONE = "none"


@dataclass(frozen=True)
class LabelWindow:
    """Temporal anchors of one filing.

    ``t_pr`` ends the reporting period, ``t_fd`` is the public filing
    date.  The prediction window is (t_fd, t_fd + 1 year]; the indicator
    period spanned by the filing's content is [t_pr - 1 year, t_fd].
    """

    t_pr: dt.date
    t_fd: dt.date

    @property
    def period(self) -> tuple[dt.date, dt.date]:
        return add_years(self.t_pr, -1), self.t_pr

    @property
    def prediction(self) -> tuple[dt.date, dt.date]:
        return self.t_fd, add_years(self.t_fd, 1)

    @property
    def indicator(self) -> tuple[dt.date, dt.date]:
        return add_years(self.t_pr, -1), self.t_fd


@dataclass
class LabeledExample:
    linked: LinkedRecord
    window: LabelWindow
    qualified: bool
    label: bool | None = None
    split: Split = Split.NONE

    def __post_init__(self) -> None:
        if self.qualified != (self.label is not None):
            raise ValueError("label must be present exactly when qualified")


@dataclass
class BankruptcyCalendar:
    """Bankruptcy filing dates per company key, sorted ascending.

    Keys are CIKs where available, otherwise normalized company names.
    Coverage bounds delimit the period over which absence of an entry can
    be read as no bankruptcy.
    """

    entries: dict[str, list[dt.date]] = field(default_factory=dict)
    coverage: tuple[dt.date, dt.date] = DEFAULT_COVERAGE

    def __post_init__(self) -> None:
        for key, dates in self.entries.items():
            dates.sort()
            for day in dates:
                if not self.coverage[0] <= day <= self.coverage[1]:
                    raise ValueError(f"bankruptcy date {day} for {key} outside coverage")

    def dates_for(self, key: str) -> list[dt.date]:
        return self.entries.get(key, [])

    @classmethod
    def from_csv(
        cls, path: str | Path, coverage: tuple[dt.date, dt.date] = DEFAULT_COVERAGE
    ) -> "BankruptcyCalendar":
        entries: dict[str, list[dt.date]] = {}
        with Path(path).open(encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle)
            for row in reader:
                key = row["company_key"].strip()
                entries.setdefault(key, []).append(
                    dt.date.fromisoformat(row["bankruptcy_date"])
                )
        return cls(entries=entries, coverage=coverage)


def company_key(example: LinkedRecord) -> str:
    """Calendar lookup key: CIK when available, else normalized name."""
    if example.filing.cik:
        return example.filing.cik
    return normalize_name(example.filing.company_name)


def load_deflator(path: str | Path) -> dict[int, float]:
    """Read an annual price-index table from CSV columns ``year,index``."""
    deflator: dict[int, float] = {}
    with Path(path).open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        for row in reader:
            deflator[int(row["year"])] = float(row["index"])
    return deflator


def default_deflator() -> dict[int, float]:
    """Bundled annual US CPI-U index (1979-2023 annual averages)."""
    deflator: dict[int, float] = {}
    text = resources.files("filingrisk.data").joinpath("cpi_annual.csv").read_text()
    for line in text.splitlines()[1:]:
        if line.strip():
            year, index = line.split(",")
            deflator[int(year)] = float(index)
    return deflator


def qualify(
    example: LinkedRecord,
    deflator: dict[int, float],
    threshold_1980: float = ASSET_THRESHOLD_1980,
    coverage: tuple[dt.date, dt.date] = DEFAULT_COVERAGE,
) -> bool:
    """Decide whether an example can be labelled at all.

    Requires total assets strictly above the 1980-dollar threshold inflated
    to the filing year, and the full one-year prediction window observable
    within the calendar's coverage.  Raises MissingAssets when total assets
    are absent so callers can report rather than silently drop.
    """
    at = example.fundamentals.get("AT")
    if at is None:
        raise MissingAssets(f"no total assets for {example.filing.record_id}")
    t_fd = example.filing.filing_date
    year = t_fd.year
    if year not in deflator or 1980 not in deflator:
        raise KeyError(f"deflator must cover 1980 and {year}")
    threshold = threshold_1980 * deflator[year] / deflator[1980]
    window_observable = coverage[0] <= t_fd and add_years(t_fd, 1) <= coverage[1]
    return at > threshold and window_observable


def assign_label(example: LinkedRecord, calendar: BankruptcyCalendar) -> bool:
    """True iff the company filed for bankruptcy within one year after t_fd."""
    t_fd = example.filing.filing_date
    horizon = add_years(t_fd, 1)
    return any(t_fd < day <= horizon for day in calendar.dates_for(company_key(example)))


def assign_split(
    example: LabeledExample,
    train_last_year: int = TRAIN_LAST_YEAR,
    validation_last_year: int = VALIDATION_LAST_YEAR,
) -> Split:
    if not example.qualified:
        return Split.NONE
    year = example.linked.filing.filing_year
    if year <= train_last_year:
        return Split.TRAIN
    if year <= validation_last_year:
        return Split.VALIDATION
    return Split.TEST


@dataclass
class SplitSets:
    train: list[LabeledExample]
    validation: list[LabeledExample]
    test: list[LabeledExample]

    @property
    def full_train(self) -> list[LabeledExample]:
        return self.train + self.validation


def split(
    examples: list[LabeledExample],
    train_last_year: int = TRAIN_LAST_YEAR,
    validation_last_year: int = VALIDATION_LAST_YEAR,
) -> SplitSets:
    """Partition by filing year: train through 2011, validation 2012-2015,
    test 2016 on (boundaries configurable).  Sets the split tag in place."""
    sets = SplitSets(train=[], validation=[], test=[])
    for example in examples:
        example.split = assign_split(example, train_last_year, validation_last_year)
        if example.split is Split.TRAIN:
            sets.train.append(example)
        elif example.split is Split.VALIDATION:
            sets.validation.append(example)
        elif example.split is Split.TEST:
            sets.test.append(example)
    return sets


@dataclass
class QualificationReport:
    qualified: int = 0
    below_threshold_or_window: int = 0
    missing_assets: int = 0


def build_labeled(
    linked_records: Iterable[LinkedRecord],
    calendar: BankruptcyCalendar,
    deflator: dict[int, float],
    threshold_1980: float = ASSET_THRESHOLD_1980,
) -> tuple[list[LabeledExample], QualificationReport]:
    """Qualify, label and split-tag every linked record."""
    report = QualificationReport()
    examples: list[LabeledExample] = []
    for linked in linked_records:
        window = LabelWindow(
            t_pr=linked.filing.fiscal_year_end, t_fd=linked.filing.filing_date
        )
        try:
            ok = qualify(linked, deflator, threshold_1980, calendar.coverage)
            report.qualified += ok
            report.below_threshold_or_window += not ok
        except MissingAssets:
            report.missing_assets += 1
            ok = False
        label = assign_label(linked, calendar) if ok else None
        example = LabeledExample(linked=linked, window=window, qualified=ok, label=label)
        example.split = assign_split(example)
        examples.append(example)
    return examples, report


# ---------------------------------------------------------------------------
# Dataset statistics
# ---------------------------------------------------------------------------

def _quantile(sorted_values: list[float], q: float) -> float:
    """Linear-interpolation quantile of an ascending list."""
    if not sorted_values:
        raise ValueError("empty sample")
    position = (len(sorted_values) - 1) * q
    low = int(position)
    high = min(low + 1, len(sorted_values) - 1)
    fraction = position - low
    return sorted_values[low] + fraction * (sorted_values[high] - sorted_values[low])


def trimmed_mean_assets(assets: Iterable[float], quantile: float = 0.95) -> float | None:
    """Mean after dropping values above the given quantile."""
    values = sorted(a for a in assets if a is not None)
    if not values:
        return None
    cutoff = _quantile(values, quantile)
    kept = [v for v in values if v <= cutoff]
    return sum(kept) / len(kept)


@dataclass
class DatasetStats:
    n: int
    n_pos: int
    prevalence: float | None
    negatives_per_positive: int | None
    mean_assets: float | None


def dataset_stats(examples: Iterable[LabeledExample]) -> DatasetStats:
    labelled = [e for e in examples if e.qualified]
    n = len(labelled)
    n_pos = sum(1 for e in labelled if e.label)
    n_neg = n - n_pos
    assets = [
        e.linked.fundamentals.get("AT")
        for e in labelled
        if e.linked.fundamentals.get("AT") is not None
    ]
    return DatasetStats(
        n=n,
        n_pos=n_pos,
        prevalence=(n_pos / n) if n else None,
        negatives_per_positive=round(n_neg / n_pos) if n_pos else None,
        mean_assets=trimmed_mean_assets(assets),
    )


# ---------------------------------------------------------------------------
# JSONL output
# ---------------------------------------------------------------------------

def labeled_to_record(example: LabeledExample) -> dict:
    """Self-contained row: identity, window dates, qualification, label,
    split, the fundamentals values and the MD&A text (item 7)."""
    linked = example.linked
    return {
        "record_id": linked.filing.record_id,
        "cik": linked.filing.cik,
        "company": linked.filing.company_name,
        "filing_date": linked.filing.filing_date.isoformat(),
        "fiscal_year_end": linked.filing.fiscal_year_end.isoformat(),
        "pred_start": example.window.prediction[0].isoformat(),
        "pred_end": example.window.prediction[1].isoformat(),
        "basis": linked.match_basis.value,
        "gap_days": linked.date_gap_days,
        "qualified": example.qualified,
        "label": example.label,
        "split": example.split.value,
        "fundamentals": linked.fundamentals.values,
        "item_7": linked.filing.items.get(7, ""),
    }


def write_labeled(examples: Iterable[LabeledExample], path: str | Path) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(labeled_to_record(example), sort_keys=True))
            handle.write("\n")
            count += 1
    return count


def read_labeled_records(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                rows.append(json.loads(line))
    return rows
