import os

import numpy as np
import pytest

from peptaste import pipeline
from peptaste.sequences import AMINO_ACIDS


def random_peptide(rng, lo=2, hi=14) -> str:
    length = int(rng.integers(lo, hi + 1))
    return "".join(rng.choice(list(AMINO_ACIDS), size=length))


def synthetic_tox_corpus(rng, n_tox=60, n_ben=80, lo=5, hi=20):
    """Linearly separable toxicity corpora: composition-biased alphabets."""

    def sample(alphabet, n):
        seqs = set()
        while len(seqs) < n:
            length = int(rng.integers(lo, hi + 1))
            seqs.add("".join(rng.choice(list(alphabet), size=length)))
        return sorted(seqs)

    return sample("KRCWHLFI", n_tox), sample("DESTGANQ", n_ben)


@pytest.fixture(scope="session")
def toy_corpus_path():
    from importlib import resources

    return str(resources.files("peptaste.data").joinpath("toy_taste_corpus.tsv"))


@pytest.fixture(scope="session")
def tox_corpus_files(tmp_path_factory):
    rng = np.random.default_rng(42)
    tox, ben = synthetic_tox_corpus(rng)
    base = tmp_path_factory.mktemp("toxdata")
    pos = base / "toxic.txt"
    neg = base / "benign.txt"
    pos.write_text("\n".join(tox) + "\n")
    neg.write_text("\n".join(ben) + "\n")
    return str(pos), str(neg)


@pytest.fixture(scope="session")
def small_tox_model(tmp_path_factory, tox_corpus_files):
    """A quick ensemble fitted on the synthetic corpus, reused across tests."""
    pos, neg = tox_corpus_files
    out = tmp_path_factory.mktemp("toxmodel") / "model.json"
    options = pipeline.ToxTrainOptions(
        seed=7,
        folds=5,
        selector="knn",
        universe=("AAC", "GAAC", "DPC", "CTDC"),
        member_trees=30,
    )
    result = pipeline.run_toxtrain(pos, neg, str(out), options)
    return str(out), result
