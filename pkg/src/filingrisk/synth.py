"""Synthetic benchmark corpus with a planted bankruptcy signal.

The generator plants the signal in both modalities, disjointly: a
configurable fraction of positives carry explicit bankruptcy-intent
phrases in their MD&A (item 7) while keeping healthy-looking accounting
figures, and the remaining positives get degraded accounting figures with
unremarkable text.  A slice of the negatives ("confusers") looks almost
as distressed numerically but did not go bankrupt within the year, which
caps the precision any purely numerical ranker can reach at the top.
"""

from __future__ import annotations

import calendar as _calendar
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import FilingDocument, write_corpus
from .labeling import DEFAULT_COVERAGE, default_deflator
from .linkage import FundamentalsRecord, SourceForm, write_fundamentals

_SENTENCES = (
    "Net revenues for the period reflected the mix of products shipped across our principal markets.",
    "Operating expenses were managed in line with our previously announced cost program.",
    "We continued to invest in the development of new product lines during the year.",
    "Gross margin varied with raw material prices and the timing of customer orders.",
    "Cash flows from operations funded our capital expenditure requirements.",
    "The company maintains credit facilities with several commercial banks.",
    "Selling, general and administrative expenses were broadly unchanged from the prior year.",
    "We completed the integration of the acquisitions announced in the prior period.",
    "Inventory levels at year end reflected anticipated seasonal demand.",
    "Our backlog of unfilled orders remains subject to cancellation without penalty.",
    "Interest expense varied with average borrowings outstanding during the year.",
    "The effective tax rate differed from the statutory rate mainly due to state taxes.",
    "We lease certain facilities and equipment under non-cancelable operating leases.",
    "Foreign currency fluctuations did not have a material effect on reported results.",
    "Management reviews goodwill and long-lived assets for impairment annually.",
    "Capital expenditures were directed primarily at capacity and efficiency projects.",
    "We believe existing sources of liquidity are adequate for our operating needs.",
    "Depreciation and amortisation increased with the expansion of our asset base.",
    "Receivable collection periods remained consistent with historical experience.",
    "Competitive conditions in our industry continued to pressure average selling prices.",
    "Research and development spending supported several programs expected to launch next year.",
    "The seasonality of demand typically concentrates shipments in the second half.",
    "We recorded restructuring charges related to the consolidation of two facilities.",
    "Pension plan contributions were made in accordance with minimum funding requirements.",
    "Insurance coverage is maintained at levels management considers customary for the industry.",
    "Environmental remediation obligations are not expected to be material to operations.",
    "Customer concentration remained stable with no single customer exceeding ten percent of sales.",
    "Pricing adjustments implemented during the year partially offset input cost inflation.",
    "Working capital requirements fluctuate with the timing of large contracts.",
    "We repurchased shares under the program authorised by the board of directors.",
)

_DISTRESS_PHRASES = (
    "If our operating results do not improve, it may be necessary for us to seek "
    "protection from creditors under chapter 11 of the united states bankruptcy code.",
    "There is substantial doubt about our ability to continue as a going concern and "
    "we may conclude that it is necessary to initiate proceedings under chapter 11.",
    "Absent additional financing we may be required to pursue a private restructuring "
    "or seek protection from creditors under chapter 11 of the bankruptcy code.",
)

_GENERIC_ITEM_1 = (
    "The company designs, manufactures and distributes industrial components through "
    "operating subsidiaries in north america."
)
_GENERIC_ITEM_8 = "The consolidated financial statements are included elsewhere in this report."

_STATES = ("CA", "TX", "NY", "FL", "IL", "PA", "OH", "NJ", "MA", "GA")

# Per-mnemonic sampling factors: (healthy range, distressed range, base quantity).
_FACTORS: dict[str, tuple[tuple[float, float], tuple[float, float], str]] = {
    "SALE": ((0.4, 1.6), (0.3, 1.2), "AT"),
    "NI": ((0.02, 0.12), (-0.35, -0.08), "SALE"),
    "EBIT": ((0.06, 0.20), (-0.25, -0.04), "SALE"),
    "AP": ((0.02, 0.08), (0.08, 0.20), "SALE"),
    "DP": ((0.02, 0.06), (0.02, 0.07), "AT"),
    "LCT": ((0.08, 0.30), (0.35, 0.80), "AT"),
    "CHE": ((0.05, 0.30), (0.005, 0.05), "AT"),
    "DLC": ((0.0, 0.08), (0.10, 0.35), "AT"),
    "DLTT": ((0.05, 0.30), (0.30, 0.70), "AT"),
    "INVT": ((0.04, 0.22), (0.05, 0.30), "SALE"),
    "LT": ((0.30, 0.65), (0.85, 1.25), "AT"),
    "RE": ((0.10, 0.50), (-0.60, -0.10), "AT"),
}


@dataclass
class SynthConfig:
    n: int = 20_000
    neg_per_pos: int = 125
    text_signal_fraction: float = 0.3
    confuser_fraction: float = 0.12
    start_year: int = 1994
    end_year: int = 2020
    missing_rate: float = 0.02


@dataclass
class SynthData:
    documents: list[FilingDocument]
    fundamentals: list[FundamentalsRecord]
    bankruptcies: list[tuple[str, dt.date]]


def _month_end(year: int, month: int) -> dt.date:
    return dt.date(year, month, _calendar.monthrange(year, month)[1])


def _values_for_stress(rng: np.random.Generator, stress: float, missing_rate: float) -> dict[str, float | None]:
    at = float(10 ** rng.uniform(8.75, 11.0))
    values: dict[str, float | None] = {"AT": at}
    for mnemonic, (healthy, distressed, base) in _FACTORS.items():
        healthy_draw = rng.uniform(*healthy)
        distressed_draw = rng.uniform(*distressed)
        factor = (1.0 - stress) * healthy_draw + stress * distressed_draw
        base_value = values[base]
        values[mnemonic] = factor * base_value if base_value is not None else None
    act_factor = (1.0 - stress) * rng.uniform(1.3, 3.0) + stress * rng.uniform(0.4, 1.0)
    values["ACT"] = act_factor * values["LCT"]
    values["CH"] = rng.uniform(0.3, 1.0) * values["CHE"]
    invch_factor = (1.0 - stress) * rng.uniform(-0.15, 0.15) + stress * rng.uniform(-0.40, 0.05)
    values["INVCH"] = invch_factor * values["INVT"]
    values["OIADP"] = rng.uniform(0.85, 1.10) * values["EBIT"]
    values["SEQ"] = at - values["LT"]
    values["WCAP"] = values["ACT"] - values["LCT"]
    for mnemonic in list(values):
        if mnemonic != "AT" and rng.random() < missing_rate:
            values[mnemonic] = None
    return values


def _item7_text(rng: np.random.Generator, with_phrases: bool) -> str:
    count = int(rng.integers(8, 17))
    picks = rng.integers(0, len(_SENTENCES), size=count)
    sentences = [_SENTENCES[i] for i in picks]
    if with_phrases:
        for _ in range(int(rng.integers(1, 3))):
            position = int(rng.integers(0, len(sentences) + 1))
            phrase = _DISTRESS_PHRASES[int(rng.integers(0, len(_DISTRESS_PHRASES)))]
            sentences.insert(position, phrase)
    return " ".join(sentences)


def generate(seed: int, config: SynthConfig | None = None) -> SynthData:
    """Deterministically generate the benchmark (same seed, same bytes)."""
    config = config or SynthConfig()
    rng = np.random.default_rng(seed)
    n = config.n
    n_pos = max(1, round(n / (config.neg_per_pos + 1)))

    positions = rng.choice(n, size=n_pos, replace=False)
    n_text = max(1, round(config.text_signal_fraction * n_pos))
    text_positive = set(int(i) for i in positions[:n_text])
    numeric_positive = set(int(i) for i in positions[n_text:])
    remaining = np.setdiff1d(np.arange(n), positions, assume_unique=False)
    n_confusers = round(config.confuser_fraction * remaining.size)
    confusers = set(int(i) for i in rng.choice(remaining, size=n_confusers, replace=False))

    documents: list[FilingDocument] = []
    fundamentals: list[FundamentalsRecord] = []
    bankruptcies: list[tuple[str, dt.date]] = []

    for i in range(n):
        cik = f"{1000000 + i}"
        name = f"Company {i} Holdings Inc"
        year = int(rng.integers(config.start_year, config.end_year + 1))
        month = 12 if rng.random() < 0.7 else int(rng.integers(1, 12))
        fye = _month_end(year, month)
        filing_date = fye + dt.timedelta(days=int(rng.integers(45, 121)))

        if i in numeric_positive:
            stress = float(rng.uniform(0.75, 1.0))
        elif i in text_positive:
            stress = float(rng.uniform(0.0, 0.30))
        elif i in confusers:
            stress = float(rng.uniform(0.60, 1.0))
        else:
            stress = float(rng.uniform(0.0, 0.35))

        values = _values_for_stress(rng, stress, config.missing_rate)
        items = {k: "" for k in range(1, 16)}
        items[1] = _GENERIC_ITEM_1
        items[7] = _item7_text(rng, with_phrases=i in text_positive)
        items[8] = _GENERIC_ITEM_8

        documents.append(
            FilingDocument(
                cik=cik,
                company_name=name,
                filing_date=filing_date,
                fiscal_year_end=fye,
                items=items,
                sic_code=int(rng.integers(100, 10000)),
                state=_STATES[int(rng.integers(0, len(_STATES)))],
            )
        )

        fundamentals_fye = fye
        if rng.random() < 0.10:
            fundamentals_fye = fye + dt.timedelta(days=int(rng.integers(-3, 4)) or 1)
        fundamentals.append(
            FundamentalsRecord(
                company_name=name,
                fiscal_year_end=fundamentals_fye,
                source_form=SourceForm.FORM_10K,
                values=values,
                cik=None if rng.random() < 0.05 else cik,
            )
        )

        is_positive = i in text_positive or i in numeric_positive
        if is_positive:
            event = filing_date + dt.timedelta(days=int(rng.integers(30, 366)))
            bankruptcies.append((cik, min(event, DEFAULT_COVERAGE[1])))
        elif i in confusers and rng.random() < 0.08:
            # Bankruptcy well after the prediction window: still a negative.
            event = filing_date + dt.timedelta(days=int(rng.integers(550, 1100)))
            if event <= DEFAULT_COVERAGE[1]:
                bankruptcies.append((cik, event))

    # Noise rows that exercise the source filter and the unmatched partitions.
    for j in range(n // 200):
        rng_year = int(rng.integers(config.start_year, config.end_year + 1))
        fundamentals.append(
            FundamentalsRecord(
                company_name=f"Company {j} Holdings Inc",
                fiscal_year_end=_month_end(rng_year, 12),
                source_form=SourceForm.OTHER,
                values={"AT": float(10 ** rng.uniform(8.0, 10.0))},
                cik=f"{1000000 + j}",
            )
        )
        fundamentals.append(
            FundamentalsRecord(
                company_name=f"Orphan Partners {j} LLC",
                fiscal_year_end=_month_end(rng_year, 6),
                source_form=SourceForm.FORM_10K,
                values={"AT": float(10 ** rng.uniform(8.0, 10.0))},
                cik=f"9{j:07d}",
            )
        )

    return SynthData(documents=documents, fundamentals=fundamentals, bankruptcies=bankruptcies)


def write_synth(data: SynthData, out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out_dir / "corpus.jsonl",
        "fundamentals": out_dir / "fundamentals.csv",
        "bankruptcies": out_dir / "bankruptcies.csv",
        "deflator": out_dir / "deflator.csv",
    }
    write_corpus(data.documents, paths["corpus"])
    write_fundamentals(data.fundamentals, paths["fundamentals"])
    with paths["bankruptcies"].open("w", encoding="utf-8", newline="") as handle:
        handle.write("company_key,bankruptcy_date\n")
        for key, day in data.bankruptcies:
            handle.write(f"{key},{day.isoformat()}\n")
    deflator = default_deflator()
    with paths["deflator"].open("w", encoding="utf-8", newline="") as handle:
        handle.write("year,index\n")
        for year in sorted(deflator):
            handle.write(f"{year},{deflator[year]}\n")
    return paths
