import pytest

from migrantcdr.cohort import label_users
from migrantcdr.experiments import Corpus
from migrantcdr.geo import build_price_index
from migrantcdr.ingest import filter_high_degree
from migrantcdr.synth import GeneratorConfig, generate

SMALL = {"n_locals": 1500, "n_staying": 200, "n_leaving": 40, "n_hubs": 2, "n_estates": 400, "seed": 5}


def corpus_from(bundle) -> Corpus:
    cfg = bundle.cfg
    table, _ = filter_high_degree(bundle.calls, 500)
    labels = label_users(table, bundle.profiles, epoch=cfg.epoch)
    return Corpus(table, bundle.profiles, labels, build_price_index(bundle.estates), epoch=cfg.epoch)


@pytest.fixture(scope="session")
def small_bundle():
    return generate(GeneratorConfig.from_dict(SMALL))


@pytest.fixture(scope="session")
def small_corpus(small_bundle):
    return corpus_from(small_bundle)
