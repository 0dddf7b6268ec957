import os

import pytest

from tutorgraph.config import EngineConfig
from tutorgraph.corpus import ingest
from tutorgraph.pipeline import FeedbackEngine, run_pipeline, write_artifacts

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

CORPUS_PATH = os.path.join(DATA_DIR, "corpus.tsv")
STORE_PATH = os.path.join(DATA_DIR, "store.tsv")
PROMPTS_PATH = os.path.join(DATA_DIR, "prompts.tsv")
EVAL_PATH = os.path.join(DATA_DIR, "eval.tsv")

# The answering attempt and its correction from the worked tutoring
# example; several suites check the exact round trip.
FIRST_ATTEMPT = "I think it's a classification task."
SECOND_ATTEMPT = "I think it's a classification task because we are choosing between discrete categories."
FIRST_MESSAGE = "'it's a classification task' is correct. Try supplying a reason for this idea."
SECOND_MESSAGE = "That's correct!"


def fixture_config(artifacts_dir: str, seed: int = 0) -> EngineConfig:
    return EngineConfig(
        corpus_path=CORPUS_PATH,
        store_path=STORE_PATH,
        prompts_path=PROMPTS_PATH,
        artifacts_dir=artifacts_dir,
        dim=16,
        relation_epochs=12,
        relation_batch_size=8,
        samples_per_exercise=400,
        hidden=32,
        epochs=10,
        batch_size=16,
        seed=seed,
    )


@pytest.fixture(scope="session")
def built(tmp_path_factory):
    """One full pipeline build shared by the service-layer suites."""
    artifacts_dir = str(tmp_path_factory.mktemp("artifacts"))
    config = fixture_config(artifacts_dir)
    corpus = ingest(config.corpus_path)
    result = run_pipeline(corpus, config)
    from tutorgraph.corpus import load_prompts

    write_artifacts(result, corpus, config, load_prompts(config.prompts_path))
    return config, corpus, result


@pytest.fixture(scope="session")
def engine(built):
    config, _, _ = built
    return FeedbackEngine.load(config)
