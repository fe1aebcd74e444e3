import time

import pytest

from eventfuse.config import RunConfig
from eventfuse.encoders import StubEncoderConfig, StubFeatureSource
from eventfuse.evalbench import build_triplets, load_samples
from eventfuse.fusion import TrainConfig, train_stage1
from eventfuse.synth import generate_corpus

CORPUS_N = 64
CORPUS_SEED = 7


def stub_source(cfg: RunConfig = RunConfig()):
    e = cfg.encoder
    return StubFeatureSource(StubEncoderConfig(e.patch, e.dim, cfg.seeds.vision),
                             StubEncoderConfig(e.patch, e.dino_dim, cfg.seeds.dino))


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    generate_corpus(root, CORPUS_N, CORPUS_SEED)
    return root


@pytest.fixture(scope="session")
def samples(corpus_dir):
    return load_samples(corpus_dir / "manifest.jsonl")


@pytest.fixture(scope="session")
def source():
    return stub_source()


@pytest.fixture(scope="session")
def triplets(samples, source):
    return build_triplets(samples, source)


@pytest.fixture(scope="session")
def stage1(samples):
    """(model, history, seconds) for default-config stage-1 training on the shipped corpus.

    The timing covers feature extraction from a cold encoder cache plus training.
    """
    t0 = time.perf_counter()
    corpus = build_triplets(samples, stub_source())
    model, history = train_stage1(corpus, TrainConfig(), init_seed=0)
    return model, history, time.perf_counter() - t0


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
