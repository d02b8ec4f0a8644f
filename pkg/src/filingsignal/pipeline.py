"""Pipeline orchestration: staged execution with content-hash skipping.

Every stage declares its input files; a manifest records input and output
hashes plus wall time. Re-running skips stages whose inputs are unchanged,
so interrupted runs resume where they left off. Per-item failures (one
filing, one window) never abort a stage; they accumulate in an error report.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import time
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np
import yaml

from . import backtest as bt
from . import labeling
from . import market_data as md
from .corpus import CorpusStore, TickerUniverse, chunk_filing
from .edgar import EdgarClient, EdgarSubmissionsResolver, fetch_filing
from .embed_index import (HashEmbeddingProvider, HTTPEmbeddingProvider,
                          VectorIndex, normalize)
from .errors import PipelineError, RowScoringError, StageInputError
from .llm_scoring import (ConstantLLM, HTTPChatLLM, KeywordLLM, QuestionSet,
                          ScoreCache, read_features_csv, score_filing,
                          write_features_csv)
from .regression import DesignMatrix, NNLSModel, fit_nnls

logger = logging.getLogger(__name__)

STAGES = ["ingest", "embed", "score", "returns", "label", "train", "backtest"]

MANIFEST_FILE = "pipeline_manifest.json"


@dataclass
class PipelineConfig:
    corpus_dir: str
    index_dir: str
    out_dir: str
    prices_dir: str
    universe_csv: str = ""
    questions_file: str = ""  # empty -> packaged default question set
    benchmark_symbol: str = "SPX"
    year_from: int = 2002
    year_to: int = 2023
    chunk_chars: int = 2048
    overlap_chars: int = 256
    embedding_provider: dict = field(default_factory=lambda: {"name": "stub"})
    llm_provider: dict = field(default_factory=lambda: {"name": "constant-stub"})
    chunks_per_question: int = 4
    label_target: str = "12m"  # 12m | max
    bins: int = 5
    train_years: tuple[int, int] = (2002, 2017)
    test_years: tuple[int, int] = (2018, 2023)
    k: int = 5
    basis: str = "12m"
    k_values: list[int] = field(default_factory=lambda: [1, 2, 3, 5, 8])
    sample_train: int | None = None
    sample_test: int | None = None
    seed: int = 0

    @classmethod
    def from_yaml(cls, path: str | Path) -> "PipelineConfig":
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if "train_years" in data:
            data["train_years"] = tuple(data["train_years"])
        if "test_years" in data:
            data["test_years"] = tuple(data["test_years"])
        return cls(**data)

    # paths ------------------------------------------------------------------

    @property
    def corpus_manifest(self) -> Path:
        return Path(self.corpus_dir) / "manifest.jsonl"

    @property
    def index_files(self) -> list[Path]:
        return [Path(self.index_dir) / "vectors.bin", Path(self.index_dir) / "refs.jsonl"]

    def out(self, name: str) -> Path:
        return Path(self.out_dir) / name

    def stage_config(self, stage: str) -> dict:
        """The config subset that affects a stage's output, for hashing."""
        subsets = {
            "ingest": {"universe_csv": self.universe_csv,
                       "year_from": self.year_from, "year_to": self.year_to},
            "embed": {"chunk_chars": self.chunk_chars,
                      "overlap_chars": self.overlap_chars,
                      "embedding_provider": self.embedding_provider},
            "score": {"llm_provider": self.llm_provider,
                      "chunks_per_question": self.chunks_per_question,
                      "chunk_chars": self.chunk_chars,
                      "overlap_chars": self.overlap_chars,
                      "questions_file": self.questions_file},
            "returns": {"benchmark_symbol": self.benchmark_symbol},
            "label": {"label_target": self.label_target, "bins": self.bins},
            "train": {"train_years": list(self.train_years),
                      "sample_train": self.sample_train, "seed": self.seed},
            "backtest": {"test_years": list(self.test_years), "k": self.k,
                         "basis": self.basis, "k_values": self.k_values,
                         "sample_test": self.sample_test, "seed": self.seed},
        }
        return subsets[stage]


def build_embedding_provider(cfg: dict):
    name = cfg.get("name", "stub")
    if name == "stub":
        return HashEmbeddingProvider(dimension=cfg.get("dimension", 64),
                                     seed=cfg.get("seed", 0))
    if name == "http":
        import os
        return HTTPEmbeddingProvider(
            endpoint=cfg["endpoint"], model=cfg["model"],
            api_key=os.environ.get(cfg.get("api_key_env", "EMBEDDING_API_KEY")),
        )
    raise ValueError(f"unknown embedding provider {name!r}")


def build_llm_provider(cfg: dict):
    name = cfg.get("name", "constant-stub")
    if name == "constant-stub":
        return ConstantLLM(score=cfg.get("score", 50))
    if name == "keyword-stub":
        return KeywordLLM(
            phrase=cfg["phrase"],
            hit_score=cfg.get("hit_score", 90),
            miss_score=cfg.get("miss_score", 10),
            per_occurrence=cfg.get("per_occurrence", 0),
        )
    if name == "http":
        import os
        return HTTPChatLLM(
            endpoint=cfg["endpoint"], model=cfg["model"],
            api_key=os.environ.get(cfg.get("api_key_env", "LLM_API_KEY")),
        )
    raise ValueError(f"unknown llm provider {name!r}")


def load_questions(config: PipelineConfig) -> QuestionSet:
    if config.questions_file:
        return QuestionSet.from_json_file(config.questions_file)
    return QuestionSet.default()


class ErrorReport:
    def __init__(self, path: Path):
        self.path = path
        self.count = 0
        if path.exists():
            path.unlink()

    def record(self, item: str, error: str) -> None:
        self.count += 1
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps({"item": item, "error": error}) + "\n")


# --- stage implementations ----------------------------------------------------


def stage_ingest(config: PipelineConfig) -> list[Path]:
    universe = TickerUniverse.from_csv(config.universe_csv)
    client = EdgarClient()
    resolver = EdgarSubmissionsResolver(client)
    store = CorpusStore(config.corpus_dir)
    report = ErrorReport(config.out("ingest_errors.jsonl"))
    entries, warnings = resolver.resolve(universe, config.year_from, config.year_to)
    for w in warnings:
        report.record(w.ticker, w.reason)
    for entry in entries:
        key = (entry.ticker, entry.filing_date.isoformat())
        if key in store:
            continue
        try:
            store.add(fetch_filing(entry, client))
        except PipelineError as exc:
            report.record(f"{entry.ticker} {entry.filing_date}", str(exc))
    return [config.corpus_manifest]


def stage_embed(config: PipelineConfig) -> list[Path]:
    provider = build_embedding_provider(config.embedding_provider)
    store = CorpusStore(config.corpus_dir)
    index: VectorIndex | None = None
    for filing in store.load_all():
        chunks = chunk_filing(filing, config.chunk_chars, config.overlap_chars)
        vectors = provider.embed_batch([c.text for c in chunks])
        for chunk, vec in zip(chunks, vectors):
            unit = normalize(vec)
            if index is None:
                index = VectorIndex(len(unit), provider.provider_id)
            index.add((*chunk.filing_key, chunk.chunk_index), unit)
    if index is None:
        raise PipelineError("corpus is empty, nothing to embed")
    index.save(config.index_dir)
    return config.index_files


def load_chunks_by_ref(config: PipelineConfig, store: CorpusStore) -> dict:
    chunks = {}
    for filing in store.load_all():
        for chunk in chunk_filing(filing, config.chunk_chars, config.overlap_chars):
            chunks[(*chunk.filing_key, chunk.chunk_index)] = chunk
    return chunks


def stage_score(config: PipelineConfig) -> list[Path]:
    store = CorpusStore(config.corpus_dir)
    index = VectorIndex.load(config.index_dir)
    qs = load_questions(config)
    llm = build_llm_provider(config.llm_provider)
    embedder = build_embedding_provider(config.embedding_provider)
    cache = ScoreCache(config.out("score_cache.jsonl"))
    chunks_by_ref = load_chunks_by_ref(config, store)
    report = ErrorReport(config.out("score_errors.jsonl"))
    rows = []
    for filing in store.load_all():
        try:
            rows.append(score_filing(
                filing, qs, index, llm, embedder, chunks_by_ref,
                cache=cache, chunks_per_question=config.chunks_per_question,
            ))
        except RowScoringError as exc:
            report.record(f"{filing.ticker} {filing.filing_date}", str(exc))
    out = config.out("features.csv")
    write_features_csv(out, rows, qs)
    return [out]


def stage_returns(config: PipelineConfig) -> list[Path]:
    store = CorpusStore(config.corpus_dir)
    prices = md.load_price_dir(config.prices_dir)
    if config.benchmark_symbol not in prices:
        raise PipelineError(
            f"benchmark symbol {config.benchmark_symbol!r} not in price data"
        )
    filing_dates: dict[str, list[date]] = {}
    for ticker, iso in store.keys():
        filing_dates.setdefault(ticker, []).append(date.fromisoformat(iso))
    records, warnings = md.compute_return_records(
        filing_dates, prices, prices[config.benchmark_symbol]
    )
    report = ErrorReport(config.out("returns_errors.jsonl"))
    for w in warnings:
        report.record("window", w)
    out = config.out("returns.csv")
    md.write_returns_csv(out, records)
    return [out]


def stage_label(config: PipelineConfig) -> list[Path]:
    records = md.read_returns_csv(config.out("returns.csv"))
    source = "target_12m" if config.label_target == "12m" else "target_max"
    examples = labeling.make_labels(records, source, config.bins)
    out = config.out("labels.csv")
    labeling.write_labels_csv(out, examples)
    return [out]


def stage_train(config: PipelineConfig) -> list[Path]:
    qcols, feature_rows = read_features_csv(config.out("features.csv"))
    labels = labeling.read_labels_csv(config.out("labels.csv"))
    label_by_key = {(e.ticker, e.filing_date.isoformat()): e.label for e in labels}
    lo, hi = config.train_years
    joined = [
        (row, label_by_key[row.filing_key])
        for row in feature_rows
        if row.filing_key in label_by_key and lo <= int(row.filing_date[:4]) <= hi
    ]
    if not joined:
        raise PipelineError("no training rows in the configured train years")
    if config.sample_train is not None and config.sample_train < len(joined):
        rng = random.Random(config.seed)
        joined = sorted(rng.sample(joined, config.sample_train),
                        key=lambda t: t[0].filing_key)
    X = np.array([row.scores for row, _ in joined], dtype=float)
    y = np.array([label for _, label in joined])
    model = fit_nnls(DesignMatrix(X, y, qcols))
    out = config.out("model.json")
    model.save(out, extra={"train_years": list(config.train_years)})
    return [out]


def stage_backtest(config: PipelineConfig) -> list[Path]:
    model = NNLSModel.load(config.out("model.json"))
    _, feature_rows = read_features_csv(config.out("features.csv"))
    records = md.read_returns_csv(config.out("returns.csv"))
    split = bt.SplitSpec(config.train_years, config.test_years)
    if config.sample_test is not None:
        test_rows = [r for r in feature_rows
                     if split.in_test(int(r.filing_date[:4]))]
        if config.sample_test < len(test_rows):
            rng = random.Random(config.seed)
            keep = set(id(r) for r in rng.sample(test_rows, config.sample_test))
            feature_rows = [r for r in feature_rows
                            if not split.in_test(int(r.filing_date[:4]))
                            or id(r) in keep]
    report = bt.run_backtest(model, feature_rows, records, split,
                             config.k, config.basis)
    out_report = config.out("report.json")
    out_report.write_text(report.to_json() + "\n", encoding="utf-8")
    out_cum = config.out("cumulative.csv")
    bt.write_cumulative_csv(out_cum, report)
    table = bt.k_sweep(model, feature_rows, records, split,
                       config.k_values, config.basis)
    out_sweep = config.out("ksweep.csv")
    bt.write_ksweep_csv(out_sweep, table)
    return [out_report, out_cum, out_sweep]


# --- orchestration ------------------------------------------------------------

# stage -> (callable, input paths, producing-stage hints for missing inputs)
def _stage_inputs(config: PipelineConfig, stage: str) -> list[tuple[Path, str]]:
    manifest = (config.corpus_manifest, "ingest")
    index = [(p, "embed") for p in config.index_files]
    table = {
        "ingest": [(Path(config.universe_csv), "")] if config.universe_csv else [],
        "embed": [manifest],
        "score": [manifest, *index],
        "returns": [manifest],
        "label": [(config.out("returns.csv"), "returns")],
        "train": [(config.out("features.csv"), "score"),
                  (config.out("labels.csv"), "label")],
        "backtest": [(config.out("model.json"), "train"),
                     (config.out("features.csv"), "score"),
                     (config.out("returns.csv"), "returns")],
    }
    return table[stage]


_STAGE_FUNCS = {
    "ingest": stage_ingest,
    "embed": stage_embed,
    "score": stage_score,
    "returns": stage_returns,
    "label": stage_label,
    "train": stage_train,
    "backtest": stage_backtest,
}


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while chunk := f.read(1 << 16):
            h.update(chunk)
    return h.hexdigest()


def _input_hashes(config: PipelineConfig, stage: str) -> dict[str, str]:
    hashes = {"config": hashlib.sha256(
        json.dumps(config.stage_config(stage), sort_keys=True).encode()
    ).hexdigest()}
    for path, producer in _stage_inputs(config, stage):
        if not path.exists():
            if producer:
                raise StageInputError(str(path), producer)
            raise PipelineError(f"missing input file {path}")
        hashes[str(path)] = _sha256_file(path)
    return hashes


def run_pipeline(config: PipelineConfig, stages: list[str] | None = None) -> dict:
    """Execute the requested stages in dependency order; skip unchanged ones.

    Returns the updated pipeline manifest.
    """
    requested = stages or STAGES
    unknown = set(requested) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages: {sorted(unknown)}")
    ordered = [s for s in STAGES if s in requested]

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / MANIFEST_FILE
    manifest = {}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    for stage in ordered:
        inputs = _input_hashes(config, stage)
        prior = manifest.get(stage)
        if prior and prior["inputs"] == inputs and all(
            Path(p).exists() for p in prior["outputs"]
        ):
            logger.info("stage %s: inputs unchanged, skipped", stage)
            continue
        logger.info("stage %s: running", stage)
        t0 = time.monotonic()
        outputs = _STAGE_FUNCS[stage](config)
        manifest[stage] = {
            "inputs": inputs,
            "outputs": {str(p): _sha256_file(p) for p in outputs},
            "wall_time_s": round(time.monotonic() - t0, 3),
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                 encoding="utf-8")
    return manifest
