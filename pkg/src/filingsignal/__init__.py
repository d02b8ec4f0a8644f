"""filingsignal: annual-report LLM scoring, non-negative regression, and
top-k backtesting pipeline."""

__version__ = "0.1.0"
