"""Corpus data model and I/O.

File format: UTF-8 tab-separated, one token per line, blank line between
sentences, '#'-prefixed comment lines ignored. Columns, in order:

    surface  diac  lemma  pos prc3 prc2 prc1 prc0 per asp vox mod gen num stt cas enc0

Surfaces are orthographically normalized before any model use; gold diac
and lemma strings are left untouched because they are the generation
targets (and may themselves encode normalization corrections).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParseError

FEATURE_NAMES = ("pos", "prc3", "prc2", "prc1", "prc0", "per", "asp", "vox",
                 "mod", "gen", "num", "stt", "cas", "enc0")

N_COLUMNS = 3 + len(FEATURE_NAMES)

# Default character folding: Alif variants (madda, hamza above, hamza below)
# to bare Alif, Alif maqsura to Ya. Data-driven and swappable via a mapping
# file, so transliterated corpora can ship their own table.
DEFAULT_FOLDING = {
    "آ": "ا",   # Alif with madda
    "أ": "ا",   # Alif with hamza above
    "إ": "ا",   # Alif with hamza below
    "ى": "ي",   # Alif maqsura -> Ya
}

# Equivalent folding for Buckwalter-transliterated text, selectable by name.
BUCKWALTER_FOLDING = {
    "|": "A",
    ">": "A",
    "<": "A",
    "Y": "y",
}


def normalize_orthography(text: str, table: dict[str, str] | None = None) -> str:
    """Apply the configured character folding; unknown characters pass through."""
    if table is None:
        table = DEFAULT_FOLDING
    return "".join(table.get(ch, ch) for ch in text)


def load_folding_table(path) -> dict[str, str]:
    """Read a two-column UTF-8 mapping file (source<TAB>target per line)."""
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0]:
                raise ParseError("folding table lines need exactly two columns", path=path, line=lineno)
            table[cols[0]] = cols[1]
    return table


@dataclass
class FeatureSchema:
    """The 14 closed-class features and their observed value sets."""

    names: tuple[str, ...] = FEATURE_NAMES
    values: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataError("feature names must be unique")
        for name in self.names:
            self.values.setdefault(name, [])
            for required in ("na", "0"):
                if required not in self.values[name]:
                    self.values[name].append(required)

    def add_value(self, feature: str, value: str) -> bool:
        """Register a value; returns True if it was new."""
        vals = self.values[feature]
        if value in vals:
            return False
        vals.append(value)
        return True

    def finalize(self):
        """Sort value sets so ids are stable regardless of discovery order."""
        for name in self.names:
            self.values[name] = sorted(set(self.values[name]))

    def to_dict(self) -> dict:
        return {"names": list(self.names), "values": {k: list(v) for k, v in self.values.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(names=tuple(d["names"]), values={k: list(v) for k, v in d["values"].items()})


@dataclass(frozen=True)
class Analysis:
    """One candidate reading of a surface word."""

    diac: str
    lemma: str
    tags: dict

    def tag_tuple(self, names=FEATURE_NAMES) -> tuple:
        return tuple(self.tags[n] for n in names)


@dataclass
class AnnotatedToken:
    """Surface token plus its gold analysis (None for unannotated input)."""

    surface: str
    gold: Analysis | None = None


def _analysis_from_columns(cols: list[str], path, lineno) -> Analysis:
    tags = dict(zip(FEATURE_NAMES, cols[2:]))
    for name, value in tags.items():
        if not value:
            raise ParseError(f"empty value for feature {name}", path=path, line=lineno)
    return Analysis(diac=cols[0], lemma=cols[1], tags=tags)


def parse_corpus(path, require_gold: bool = True,
                 folding: dict[str, str] | None = None) -> list[list[AnnotatedToken]]:
    """Parse a corpus file into sentences of annotated tokens.

    Surfaces are normalized with the given folding table. With
    require_gold=False, surface-only lines (one column) are accepted and
    yield tokens without gold analyses.
    """
    sentences: list[list[AnnotatedToken]] = []
    current: list[AnnotatedToken] = []
    prev_blank = True  # file start behaves like a sentence boundary
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.startswith("#"):
                continue
            if not line:
                if prev_blank and sentences:
                    raise ParseError("duplicate blank line", path=path, line=lineno)
                if current:
                    sentences.append(current)
                    current = []
                prev_blank = True
                continue
            prev_blank = False
            cols = line.split("\t")
            if len(cols) == 1 and not require_gold:
                surface = cols[0]
                if not surface:
                    raise ParseError("empty surface", path=path, line=lineno)
                current.append(AnnotatedToken(surface=normalize_orthography(surface, folding)))
                continue
            if len(cols) != N_COLUMNS:
                raise ParseError(f"expected {N_COLUMNS} columns, found {len(cols)}",
                                 path=path, line=lineno)
            if not cols[0]:
                raise ParseError("empty surface", path=path, line=lineno)
            gold = _analysis_from_columns(cols[1:], path, lineno)
            current.append(AnnotatedToken(surface=normalize_orthography(cols[0], folding),
                                          gold=gold))
    if current:
        sentences.append(current)
    return sentences


def analysis_columns(analysis: Analysis) -> list[str]:
    return [analysis.diac, analysis.lemma] + [analysis.tags[n] for n in FEATURE_NAMES]


def serialize_corpus(sentences: list[list[AnnotatedToken]], path):
    """Inverse of parse_corpus for fully annotated corpora."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, sentence in enumerate(sentences):
            if i:
                fh.write("\n")
            for token in sentence:
                fh.write("\t".join([token.surface] + analysis_columns(token.gold)) + "\n")


def split_train_tune(sentences: list, tune_fraction: float, seed: int) -> tuple[list, list]:
    """Deterministic sentence-level split; tune gets floor(n * fraction), min 1."""
    if not 0.0 < tune_fraction < 1.0:
        raise DataError(f"tune fraction must be in (0, 1), got {tune_fraction}")
    n = len(sentences)
    if n < 2:
        raise DataError(f"need at least 2 sentences to split, got {n}")
    n_tune = max(1, math.floor(n * tune_fraction))
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    tune_idx = set(int(i) for i in order[:n_tune])
    train = [s for i, s in enumerate(sentences) if i not in tune_idx]
    tune = [s for i, s in enumerate(sentences) if i in tune_idx]
    return train, tune


# ---------------------------------------------------------------------------
# vocabulary

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"
WS_MARK, LEFT_MARK, RIGHT_MARK = "<ws>", "<w>", "</w>"
RESERVED_CHARS = (PAD, UNK, BOS, EOS, WS_MARK, LEFT_MARK, RIGHT_MARK)
RESERVED_WORDS = (PAD, UNK)


@dataclass
class Vocab:
    """Id spaces for characters, words, per-feature tags, and decoder outputs.

    Character ids cover input surfaces, both target alphabets and the
    reserved markers, so one embedding table serves the encoder, the
    tagger's character net and the decoders' input feeding. Output
    alphabets are per-decoder sorted character lists; the last output
    index is end-of-sequence, so d_voc = len(alphabet) + 1.
    """

    chars: list[str]
    words: list[str]
    schema: FeatureSchema
    lemma_alphabet: list[str]
    diac_alphabet: list[str]

    def __post_init__(self):
        self.char_to_id = {c: i for i, c in enumerate(self.chars)}
        self.word_to_id = {w: i for i, w in enumerate(self.words)}
        self.tag_to_id = {f: {v: i for i, v in enumerate(self.schema.values[f])}
                          for f in self.schema.names}
        self.lemma_out_index = {c: i for i, c in enumerate(self.lemma_alphabet)}
        self.diac_out_index = {c: i for i, c in enumerate(self.diac_alphabet)}

    # reserved ids are fixed by construction
    @property
    def pad_id(self): return self.char_to_id[PAD]
    @property
    def unk_char_id(self): return self.char_to_id[UNK]
    @property
    def bos_id(self): return self.char_to_id[BOS]
    @property
    def eos_id(self): return self.char_to_id[EOS]
    @property
    def ws_id(self): return self.char_to_id[WS_MARK]
    @property
    def left_id(self): return self.char_to_id[LEFT_MARK]
    @property
    def right_id(self): return self.char_to_id[RIGHT_MARK]
    @property
    def unk_word_id(self): return self.word_to_id[UNK]

    def char_id(self, ch: str) -> int:
        return self.char_to_id.get(ch, self.char_to_id[UNK])

    def word_id(self, w: str) -> int:
        return self.word_to_id.get(w, self.word_to_id[UNK])

    def d_voc(self, task: str) -> int:
        alphabet = self.lemma_alphabet if task == "lemma" else self.diac_alphabet
        return len(alphabet) + 1

    def eos_index(self, task: str) -> int:
        return self.d_voc(task) - 1

    def encode_target(self, task: str, text: str) -> list[int]:
        index = self.lemma_out_index if task == "lemma" else self.diac_out_index
        out = []
        for ch in text:
            if ch not in index:
                raise DataError(f"target character {ch!r} not in the {task} output alphabet")
            out.append(index[ch])
        return out

    def decode_output(self, task: str, indices: list[int]) -> str:
        alphabet = self.lemma_alphabet if task == "lemma" else self.diac_alphabet
        return "".join(alphabet[i] for i in indices)

    def output_char_id(self, task: str, index: int) -> int:
        """Global char id of an output index, for feeding back into the decoder."""
        alphabet = self.lemma_alphabet if task == "lemma" else self.diac_alphabet
        return self.char_id(alphabet[index])

    def to_dict(self) -> dict:
        return {"chars": self.chars, "words": self.words,
                "schema": self.schema.to_dict(),
                "lemma_alphabet": self.lemma_alphabet,
                "diac_alphabet": self.diac_alphabet}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        return cls(chars=list(d["chars"]), words=list(d["words"]),
                   schema=FeatureSchema.from_dict(d["schema"]),
                   lemma_alphabet=list(d["lemma_alphabet"]),
                   diac_alphabet=list(d["diac_alphabet"]))


def build_vocab(sentences: list[list[AnnotatedToken]], dictionary=None,
                warn=None) -> Vocab:
    """Collect id spaces from a training corpus and an optional dictionary.

    Dictionary analyses contribute tag values (candidate sets must be
    embeddable) and characters. Alphabets and vocabularies are sorted so
    ids do not depend on corpus order.
    """
    schema = FeatureSchema()
    chars: set[str] = set()
    words: set[str] = set()
    lemma_chars: set[str] = set()
    diac_chars: set[str] = set()

    def take_analysis(analysis: Analysis):
        for name in schema.names:
            value = analysis.tags[name]
            if schema.add_value(name, value) and warn is not None:
                warn(f"new value {value!r} for feature {name}")
        lemma_chars.update(analysis.lemma)
        diac_chars.update(analysis.diac)

    for sentence in sentences:
        for token in sentence:
            words.add(token.surface)
            chars.update(token.surface)
            if token.gold is not None:
                take_analysis(token.gold)
    if dictionary is not None:
        for surface, analyses in dictionary.entries.items():
            chars.update(surface)
            for analysis in analyses:
                take_analysis(analysis)
    schema.finalize()
    all_chars = sorted(chars | lemma_chars | diac_chars)
    return Vocab(chars=list(RESERVED_CHARS) + all_chars,
                 words=list(RESERVED_WORDS) + sorted(words),
                 schema=schema,
                 lemma_alphabet=sorted(lemma_chars),
                 diac_alphabet=sorted(diac_chars))


# ---------------------------------------------------------------------------
# character windows


@dataclass
class CharWindow:
    """Character-id window around a target word, with word alignments.

    Covers up to `width` characters on each side (whitespace markers count
    as one character), the target word wrapped in boundary markers, and a
    word-id aligned to every position. Markers around the target inherit
    the target's word id; whitespace markers inherit the following word's.
    """

    char_ids: list[int]
    word_ids: list[int]
    target_start: int  # index of the left boundary marker
    target_end: int    # index of the right boundary marker


def build_window(sentence: list[AnnotatedToken], target_index: int, width: int,
                 vocab: Vocab) -> CharWindow:
    if not 0 <= target_index < len(sentence):
        raise DataError(f"target index {target_index} out of range for sentence of {len(sentence)} tokens")
    if width < 0:
        raise DataError(f"window width must be nonnegative, got {width}")

    word_ids = [vocab.word_id(tok.surface) for tok in sentence]

    # (char_id, word_id) pairs left of the target, in sentence order
    left: list[tuple[int, int]] = []
    for j in range(target_index):
        for ch in sentence[j].surface:
            left.append((vocab.char_id(ch), word_ids[j]))
        # whitespace after word j belongs to the word that follows it
        left.append((vocab.ws_id, word_ids[j + 1]))
    left = left[-width:] if width else []

    right: list[tuple[int, int]] = []
    for j in range(target_index + 1, len(sentence)):
        right.append((vocab.ws_id, word_ids[j]))
        for ch in sentence[j].surface:
            right.append((vocab.char_id(ch), word_ids[j]))
    right = right[:width] if width else []

    target_id = word_ids[target_index]
    middle = [(vocab.left_id, target_id)]
    middle += [(vocab.char_id(ch), target_id) for ch in sentence[target_index].surface]
    middle += [(vocab.right_id, target_id)]

    pairs = left + middle + right
    return CharWindow(char_ids=[p[0] for p in pairs],
                      word_ids=[p[1] for p in pairs],
                      target_start=len(left),
                      target_end=len(left) + len(middle) - 1)


# ---------------------------------------------------------------------------
# pretrained embeddings


def load_embeddings(path, vocab: Vocab, dim: int, table: np.ndarray) -> int:
    """Overwrite rows of an initialized (len(words), dim) table from a text file.

    Format: one word per line, word then dim floats, space separated; an
    optional first header line "count dim". Words absent from the file keep
    their initialization. Returns the number of rows replaced.
    """
    if table.shape != (len(vocab.words), dim):
        raise DataError(f"embedding table shape {table.shape} does not match "
                        f"({len(vocab.words)}, {dim})")
    replaced = 0
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        lineno = 1
        parts = first.rstrip("\n").split(" ") if first else []
        is_header = len(parts) == 2
        if is_header:
            try:
                _, header_dim = int(parts[0]), int(parts[1])
            except ValueError:
                is_header = False
            else:
                if header_dim != dim:
                    raise DataError(f"embedding file declares dimension {header_dim}, expected {dim}")
        pending = [] if is_header or not first else [(lineno, first)]
        for extra_lineno, raw in enumerate(fh, start=lineno + 1):
            pending.append((extra_lineno, raw))
        for lineno, raw in pending:
            line = raw.rstrip("\n")
            if not line:
                continue
            cols = line.split(" ")
            if len(cols) != dim + 1:
                raise ParseError(f"expected a word plus {dim} floats, found {len(cols)} columns",
                                 path=path, line=lineno)
            try:
                values = [float(v) for v in cols[1:]]
            except ValueError as exc:
                raise ParseError(f"malformed float: {exc}", path=path, line=lineno) from None
            wid = vocab.word_to_id.get(cols[0])
            if wid is not None:
                table[wid] = values
                replaced += 1
    return replaced
