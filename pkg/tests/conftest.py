import pytest

from filingsignal.synthetic import PLANTED_PHRASE, make_workspace

FIXTURES = __file__.rsplit("/", 1)[0] + "/fixtures"


def synthetic_config(root, out_dir):
    from filingsignal.pipeline import PipelineConfig

    return PipelineConfig(
        corpus_dir=str(root / "corpus"),
        index_dir=str(out_dir / "index"),
        out_dir=str(out_dir),
        prices_dir=str(root / "prices"),
        universe_csv=str(root / "universe.csv"),
        benchmark_symbol="SPX",
        chunk_chars=4096,
        overlap_chars=256,
        embedding_provider={"name": "stub", "dimension": 64, "seed": 0},
        llm_provider={"name": "keyword-stub", "phrase": PLANTED_PHRASE,
                      "hit_score": 30, "miss_score": 10, "per_occurrence": 8},
        train_years=(2015, 2017),
        test_years=(2018, 2020),
        k=3,
        basis="12m",
        k_values=[1, 2, 3, 5, 8],
    )


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    return make_workspace(tmp_path_factory.mktemp("synth"), seed=0)


@pytest.fixture
def sample_10k_html():
    with open(f"{FIXTURES}/sample_10k.html", encoding="utf-8") as f:
        return f.read()
