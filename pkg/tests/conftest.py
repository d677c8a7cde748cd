"""Shared fixture factories."""

from __future__ import annotations

import datetime as dt

import pytest

from filingrisk.corpus import FilingDocument
from filingrisk.linkage import FundamentalsRecord, LinkedRecord, MatchBasis, SourceForm


def make_filing(
    cik="0000001",
    name="Acme Corp",
    filing_date=None,
    fye=dt.date(2000, 12, 31),
    items=None,
    sic=3559,
    state=None,
) -> FilingDocument:
    if filing_date is None:
        filing_date = fye + dt.timedelta(days=75)
    full_items = {n: "" for n in range(1, 16)}
    if items:
        full_items.update(items)
    return FilingDocument(
        cik=cik,
        company_name=name,
        filing_date=filing_date,
        fiscal_year_end=fye,
        items=full_items,
        sic_code=sic,
        state=state,
    )


def make_fundamentals(
    cik="0000001",
    name="Acme Corp",
    fye=dt.date(2000, 12, 31),
    source=SourceForm.FORM_10K,
    **values,
) -> FundamentalsRecord:
    return FundamentalsRecord(
        company_name=name,
        fiscal_year_end=fye,
        source_form=source,
        values=dict(values),
        cik=cik,
    )


def make_linked(filing=None, fundamentals=None, gap=0, basis=MatchBasis.CIK) -> LinkedRecord:
    return LinkedRecord(
        filing=filing or make_filing(),
        fundamentals=fundamentals or make_fundamentals(AT=1e9),
        match_basis=basis,
        date_gap_days=gap,
    )


@pytest.fixture
def filing_factory():
    return make_filing


@pytest.fixture
def fundamentals_factory():
    return make_fundamentals
