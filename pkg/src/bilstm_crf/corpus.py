"""IOB2 corpora: tag sets, reading/writing, span extraction, splitting and
a synthetic generator with disjoint per-class vocabularies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError, IOBValidationError, ParseError, TagError

OUTSIDE = "O"
CLINICAL_CLASSES = ("problem", "test", "treatment")


@dataclass(frozen=True)
class TagSet:
    """Tag inventory ``O, B-c1, I-c1, B-c2, I-c2, ...`` for the given classes."""

    classes: tuple[str, ...]
    tags: tuple[str, ...] = field(init=False, repr=False, compare=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        classes = tuple(self.classes)
        if len(set(classes)) != len(classes):
            raise ConfigError(f"duplicate concept classes: {classes}")
        for c in classes:
            if not c or c == OUTSIDE or any(ch.isspace() for ch in c):
                raise ConfigError(f"invalid concept class name {c!r}")
        tags = [OUTSIDE]
        for c in classes:
            tags += [f"B-{c}", f"I-{c}"]
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "tags", tuple(tags))
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(tags)})

    @classmethod
    def clinical(cls):
        return cls(CLINICAL_CLASSES)

    def __len__(self):
        return len(self.tags)

    def index(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise TagError(f"unknown tag {label!r}") from None

    def label(self, idx):
        return self.tags[idx]

    def begin(self, cls):
        return 1 + 2 * self.classes.index(cls)

    def inside(self, cls):
        return 2 + 2 * self.classes.index(cls)

    def class_of(self, idx):
        """Concept class of a tag index, ``None`` for ``O``."""
        return None if idx == 0 else self.classes[(idx - 1) // 2]

    def is_begin(self, idx):
        return idx > 0 and idx % 2 == 1

    def is_inside(self, idx):
        return idx > 0 and idx % 2 == 0


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    tags: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.tags is not None:
            object.__setattr__(self, "tags", tuple(int(t) for t in self.tags))
        if not self.tokens:
            raise FormatError("sentence has no tokens")
        if self.tags is not None and len(self.tags) != len(self.tokens):
            raise FormatError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags")

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class LabeledCorpus:
    sentences: tuple[Sentence, ...]
    tagset: TagSet

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        K = len(self.tagset)
        for i, s in enumerate(self.sentences):
            if s.tags is not None and any(t < 0 or t >= K for t in s.tags):
                raise TagError(f"sentence {i}: tag index out of range for K={K}")

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def labeled(self):
        return all(s.tags is not None for s in self.sentences)

    def unlabeled(self):
        return LabeledCorpus(tuple(Sentence(s.tokens) for s in self.sentences), self.tagset)


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int
    label: str

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"bad span bounds [{self.start}, {self.end}]")


def iob2_violation(tags, tagset):
    """Position of the first IOB2 violation in ``tags``, or ``None``."""
    prev = 0
    for t, tag in enumerate(tags):
        if tagset.is_inside(tag):
            cls = tagset.class_of(tag)
            if prev == 0 or tagset.class_of(prev) != cls:
                return t
        prev = tag
    return None


def check_iob2(tags, tagset, sentence=None):
    pos = iob2_violation(tags, tagset)
    if pos is not None:
        tag = tagset.label(tags[pos])
        prev = tagset.label(tags[pos - 1]) if pos else "<start>"
        raise IOBValidationError(f"{tag} cannot follow {prev}", sentence, pos)


def repair_iob2(tags, tagset):
    """Rewrite every I-c that does not continue a c-span into B-c."""
    out = list(tags)
    for t, tag in enumerate(out):
        if tagset.is_inside(tag):
            prev = out[t - 1] if t else 0
            if prev == 0 or tagset.class_of(prev) != tagset.class_of(tag):
                out[t] = tag - 1
    return tuple(out)


def repair_corpus(corpus):
    return LabeledCorpus(
        tuple(s if s.tags is None else Sentence(s.tokens, repair_iob2(s.tags, corpus.tagset))
              for s in corpus),
        corpus.tagset)


def validate_corpus(corpus):
    for i, s in enumerate(corpus):
        if s.tags is not None:
            check_iob2(s.tags, corpus.tagset, sentence=i)


def _read(text):
    return text if isinstance(text, str) else text.read()


def parse_iob(text, tagset, repair=False):
    """Parse ``token<TAB>tag`` (or single-column ``token``) records.

    Sentences are separated by blank lines. A file must be consistently
    labeled or unlabeled. With ``repair`` set, IOB1-style leading ``I-``
    tags are rewritten to ``B-`` instead of being rejected.
    """
    text = _read(text)
    sentences = []
    tokens, tags = [], []
    ncols = None

    def flush():
        nonlocal tokens, tags
        if tokens:
            seq = tuple(tags) if ncols == 2 else None
            if seq is not None:
                if repair:
                    seq = repair_iob2(seq, tagset)
                else:
                    check_iob2(seq, tagset, sentence=len(sentences))
            sentences.append(Sentence(tuple(tokens), seq))
        tokens, tags = [], []

    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip()
        if not line:
            flush()
            continue
        cols = line.split("\t")
        if len(cols) not in (1, 2) or not cols[0]:
            raise ParseError(f"expected 1 or 2 tab-separated columns, got {len(cols)}", lineno)
        if ncols is None:
            ncols = len(cols)
        elif len(cols) != ncols:
            raise ParseError("mixed labeled and unlabeled lines", lineno)
        tokens.append(cols[0])
        if ncols == 2:
            label = cols[1].strip()
            try:
                tags.append(tagset.index(label))
            except TagError:
                raise TagError(f"unknown tag {label!r}", lineno) from None
    flush()
    return LabeledCorpus(tuple(sentences), tagset)


def write_iob(corpus):
    """Serialize a corpus; every sentence is terminated by one blank line."""
    chunks = []
    for s in corpus:
        if s.tags is None:
            lines = [f"{tok}\n" for tok in s.tokens]
        else:
            lines = [f"{tok}\t{corpus.tagset.label(t)}\n" for tok, t in zip(s.tokens, s.tags)]
        chunks.append("".join(lines) + "\n")
    return "".join(chunks)


def read_iob_file(path, tagset, repair=False):
    with open(path, encoding="utf-8") as fh:
        return parse_iob(fh.read(), tagset, repair=repair)


def write_iob_file(corpus, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_iob(corpus))


def extract_spans(tags, tagset):
    """Maximal B-initiated runs as spans, sorted by start."""
    check_iob2(tags, tagset)
    spans = []
    start = None
    for t, tag in enumerate(tags):
        if start is not None and not tagset.is_inside(tag):
            spans.append(Span(start, t - 1, tagset.class_of(tags[start])))
            start = None
        if tagset.is_begin(tag):
            start = t
    if start is not None:
        spans.append(Span(start, len(tags) - 1, tagset.class_of(tags[start])))
    return spans


def encode_spans(spans, length, tagset):
    """Inverse of :func:`extract_spans` for non-overlapping spans."""
    tags = [0] * length
    for sp in spans:
        if sp.end >= length:
            raise ValueError(f"span {sp} exceeds sentence length {length}")
        if any(tags[sp.start:sp.end + 1]):
            raise ValueError(f"span {sp} overlaps another span")
        tags[sp.start] = tagset.begin(sp.label)
        for t in range(sp.start + 1, sp.end + 1):
            tags[t] = tagset.inside(sp.label)
    return tuple(tags)


def train_size(n, fraction):
    # guard against 10 * 0.7 == 7.000000000000001
    k = math.ceil(n * fraction - 1e-9)
    return min(max(k, 1), n - 1)


def split_corpus(corpus, train_fraction, seed):
    """Shuffle sentences with ``seed`` and cut at ``ceil(n * train_fraction)``."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(corpus)
    if n < 2:
        raise ConfigError(f"cannot split a corpus of {n} sentence(s)")
    order = np.random.default_rng(seed).permutation(n)
    k = train_size(n, train_fraction)
    pick = lambda idx: LabeledCorpus(tuple(corpus.sentences[i] for i in idx), corpus.tagset)
    return pick(order[:k]), pick(order[k:])


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic corpus generator.

    ``priors`` is the probability of starting an O token followed by one
    entry per class; it is renormalized. Each class draws its tokens from
    its own vocabulary and spans are always followed by an O token (when
    room remains), so adjacent spans are never ambiguous.
    """

    n_sentences: int = 200
    min_length: int = 5
    max_length: int = 15
    classes: tuple[str, ...] = CLINICAL_CLASSES
    vocab_sizes: tuple[int, ...] = (10, 10, 10)
    outside_vocab: int = 20
    priors: tuple[float, ...] = (0.7, 0.1, 0.1, 0.1)
    max_span_length: int = 3

    def __post_init__(self):
        if self.n_sentences <= 0:
            raise ConfigError("n_sentences must be positive")
        if not 1 <= self.min_length <= self.max_length:
            raise ConfigError("need 1 <= min_length <= max_length")
        if len(self.vocab_sizes) != len(self.classes):
            raise ConfigError("vocab_sizes needs one entry per class")
        if len(self.priors) != len(self.classes) + 1:
            raise ConfigError("priors needs an O entry plus one entry per class")
        if any(p < 0 for p in self.priors) or sum(self.priors) <= 0:
            raise ConfigError("priors must be non-negative with positive sum")
        if min(self.vocab_sizes, default=1) < 1 or self.outside_vocab < 1:
            raise ConfigError("vocabulary sizes must be positive")
        if self.max_span_length < 1:
            raise ConfigError("max_span_length must be positive")

    @classmethod
    def from_config(cls, cfg):
        """Build from a flat ``key=value`` dict (values are strings)."""
        known = {"n_sentences", "min_length", "max_length", "classes", "vocab_sizes",
                 "outside_vocab", "priors", "max_span_length"}
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown generator keys: {sorted(unknown)}")
        kw = {}
        try:
            for key in ("n_sentences", "min_length", "max_length", "outside_vocab",
                        "max_span_length"):
                if key in cfg:
                    kw[key] = int(cfg[key])
            classes = tuple(c.strip() for c in cfg["classes"].split(",")) \
                if "classes" in cfg else CLINICAL_CLASSES
            kw["classes"] = classes
            if "vocab_sizes" in cfg:
                sizes = tuple(int(v) for v in cfg["vocab_sizes"].split(","))
                kw["vocab_sizes"] = sizes * len(classes) if len(sizes) == 1 else sizes
            else:
                kw["vocab_sizes"] = (10,) * len(classes)
            if "priors" in cfg:
                kw["priors"] = tuple(float(v) for v in cfg["priors"].split(","))
            elif len(classes) != len(CLINICAL_CLASSES):
                kw["priors"] = (0.7,) + (0.3 / len(classes),) * len(classes)
        except ValueError as exc:
            raise ConfigError(f"bad generator value: {exc}") from None
        return cls(**kw)


def synth_corpus(spec, seed):
    tagset = TagSet(spec.classes)
    rng = np.random.default_rng(seed)
    priors = np.asarray(spec.priors, dtype=np.float64)
    priors = priors / priors.sum()
    vocab = [[f"{c}{j:03d}" for j in range(n)] for c, n in zip(spec.classes, spec.vocab_sizes)]
    outside = [f"w{j:03d}" for j in range(spec.outside_vocab)]

    sentences = []
    for _ in range(spec.n_sentences):
        length = int(rng.integers(spec.min_length, spec.max_length + 1))
        tokens, tags = [], []
        while len(tokens) < length:
            choice = int(rng.choice(len(priors), p=priors))
            if choice == 0:
                tokens.append(outside[rng.integers(len(outside))])
                tags.append(0)
                continue
            cls = spec.classes[choice - 1]
            room = length - len(tokens)
            m = min(int(rng.integers(1, spec.max_span_length + 1)), room)
            words = vocab[choice - 1]
            for j in range(m):
                tokens.append(words[rng.integers(len(words))])
                tags.append(tagset.begin(cls) if j == 0 else tagset.inside(cls))
            if len(tokens) < length:
                tokens.append(outside[rng.integers(len(outside))])
                tags.append(0)
        sentences.append(Sentence(tuple(tokens), tuple(tags)))
    return LabeledCorpus(tuple(sentences), tagset)
