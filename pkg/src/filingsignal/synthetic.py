"""Deterministic synthetic fixture: a tiny universe with a planted signal.

Eight tickers carry a quality tier 0 (best) to 7 (worst). A tier-q filing
mentions the phrase "record revenue growth" 8-q times, and the ticker's price
grows at an annual rate that decreases with q. A keyword-counting stub LLM
therefore produces features that rank tickers exactly by future return, so
top-k selection beats the benchmark and the k-sweep decays by construction.

Everything is generated from one seed; two runs produce identical bytes.
"""

from __future__ import annotations

import csv
import random
from datetime import date, timedelta
from pathlib import Path

from .corpus import CorpusStore, Filing

PLANTED_PHRASE = "record revenue growth"
BENCHMARK_SYMBOL = "SPX"

TICKERS = ["ALFA", "BRVO", "CRLE", "DLTA", "ECHO", "FXTR", "GOLF", "HTEL"]
FILING_YEARS = list(range(2015, 2021))  # filings 2015..2020
PRICE_START = date(2015, 1, 2)
PRICE_END = date(2021, 6, 30)

BEST_ANNUAL_RETURN = 0.32
RETURN_STEP = 0.04  # tier q grows at BEST - q * STEP per year
BENCHMARK_ANNUAL_RETURN = 0.05

_FILLER_SENTENCES = [
    "The company operates in a competitive and evolving market.",
    "Management remains focused on disciplined capital allocation.",
    "Risk factors include supply chain disruption and regulatory change.",
    "Our liquidity position is supported by cash and committed facilities.",
    "We continue to invest in research and development programs.",
    "Legal proceedings arising in the ordinary course are not expected to be material.",
    "Gross margins reflected changes in product mix during the year.",
    "The board declared quarterly dividends throughout the fiscal year.",
]


def quality_of(ticker: str) -> int:
    return TICKERS.index(ticker)


def annual_return_of(ticker: str) -> float:
    return BEST_ANNUAL_RETURN - RETURN_STEP * quality_of(ticker)


def phrase_count_of(ticker: str) -> int:
    return len(TICKERS) - quality_of(ticker)


def filing_date_of(ticker: str, year: int) -> date:
    # Stagger filings across February/March so windows differ per ticker.
    return date(year, 2, 3) + timedelta(days=7 * quality_of(ticker))


def _filing_text(ticker: str, year: int, rng: random.Random) -> str:
    count = phrase_count_of(ticker)
    lines = [
        f"{ticker} Corporation annual report for fiscal year {year}.",
        "Item 1. Business overview.",
    ]
    for i in range(count):
        lines.append(
            f"During fiscal {year} the company delivered {PLANTED_PHRASE} "
            f"in segment {i + 1}."
        )
    lines.append("Item 1A. Risk Factors.")
    lines.extend(rng.sample(_FILLER_SENTENCES, 4))
    lines.append("Item 7. Management's Discussion and Analysis.")
    return "\n".join(lines)


def business_days(start: date, end: date) -> list[date]:
    days = []
    d = start
    while d <= end:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def _price_rows(symbol: str, annual_return: float, days: list[date]) -> list[tuple]:
    base = 100.0
    growth = (1.0 + annual_return) ** (1.0 / 365.0)
    t0 = days[0]
    return [
        (symbol, d.isoformat(), round(base * growth ** (d - t0).days, 6))
        for d in days
    ]


def make_workspace(root: str | Path, seed: int = 0) -> Path:
    """Build universe.csv, corpus/, and prices/prices.csv under root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    with open(root / "universe.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["ticker", "cik"])
        for i, ticker in enumerate(TICKERS):
            writer.writerow([ticker, str(1000000000 + i)])

    store = CorpusStore(root / "corpus")
    for ticker in TICKERS:
        for year in FILING_YEARS:
            fdate = filing_date_of(ticker, year)
            store.add(Filing(
                ticker=ticker,
                cik=str(1000000000 + quality_of(ticker)),
                accession_id=f"SYN-{ticker}-{year}",
                filing_date=fdate,
                raw_uri=f"synthetic://{ticker}/{year}",
                clean_text=_filing_text(ticker, year, rng),
            ))

    days = business_days(PRICE_START, PRICE_END)
    prices_dir = root / "prices"
    prices_dir.mkdir(exist_ok=True)
    with open(prices_dir / "prices.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["symbol", "date", "adjusted_close"])
        for ticker in TICKERS:
            writer.writerows(_price_rows(ticker, annual_return_of(ticker), days))
        writer.writerows(_price_rows(BENCHMARK_SYMBOL, BENCHMARK_ANNUAL_RETURN, days))
    return root
