import pytest

from bilstm_crf.corpus import LabeledCorpus, Sentence, TagSet

NOTE_TOKENS = ("His", "HCT", "had", "dropped", "from", "36.7", "despite",
               "2U", "PRBC", "and", "3U-FFP")
NOTE_LABELS = ("B-test", "I-test", "O", "O", "O", "O", "O",
               "B-treatment", "I-treatment", "O", "O")
NOTE_TEXT = "".join(f"{t}\t{l}\n" for t, l in zip(NOTE_TOKENS, NOTE_LABELS)) + "\n"


@pytest.fixture
def tagset():
    return TagSet.clinical()


@pytest.fixture
def note(tagset):
    tags = tuple(tagset.index(l) for l in NOTE_LABELS)
    return LabeledCorpus((Sentence(NOTE_TOKENS, tags),), tagset)


@pytest.fixture(scope="session")
def trained_fixture():
    """Small model trained on a synthetic corpus; ``(model, corpus)``."""
    from bilstm_crf.corpus import SynthSpec, split_corpus, synth_corpus
    from bilstm_crf.training import HyperParams, train

    corpus = synth_corpus(SynthSpec(n_sentences=150), 11)
    tr, va = split_corpus(corpus, 0.7, 0)
    model, _ = train(tr, va, HyperParams(hidden=10, window=3, d=10, max_epochs=12, seed=2))
    return model, corpus
