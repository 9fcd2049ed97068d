"""The joint model: shared embeddings, tagger, encoder and two decoders.

Owns the character and word embedding tables that the tagger and encoder
share, prepares sentences into id space, and exposes the joint training
forward pass and the inference path (tag, then decode lemma and
diacritized form per token conditioned on the predicted tags).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .analyzer import MorphDictionary, candidates
from .corpus import AnnotatedToken, CharWindow, Vocab, build_window
from .errors import DataError
from .lexdec import AttnDecoder, DecodeConfig, DecodeResult, Encoder
from .nn import autograd as ag
from .nn.autograd import Parameter, Tensor
from .nn.layers import glorot
from .tagger import TagPrediction, Tagger

LEXICAL_TASKS = ("lemma", "diac")


@dataclass
class ModelConfig:
    """Architecture sizes and feature toggles; defaults are the full-scale setup."""

    word_dim: int = 250
    char_dim: int = 50
    char_hidden: int = 100
    char_layers: int = 2
    word_hidden: int = 800
    word_layers: int = 2
    tag_embed_dim: int = 50
    head_hidden: int = 400
    enc_hidden: int = 400
    enc_layers: int = 2
    dec_hidden: int = 400
    dec_layers: int = 2
    dropout: float = 0.4
    window: int = 10
    use_candidates: bool = True
    condition_on_tags: bool = True
    tags_every_step: bool = True
    condition_on_gold_tags: bool = False
    oov_policy: str = "all-values"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class PreparedToken:
    """A token resolved into id space, ready for the model."""

    surface: str
    word_id: int
    char_ids: list[int]
    cand_ids: dict[str, list[int]] | None
    window: CharWindow
    oov: bool
    gold: object = None                      # Analysis or None
    gold_tag_ids: dict[str, int] | None = None
    gold_lemma: list[int] | None = None
    gold_diac: list[int] | None = None


@dataclass
class PreparedSentence:
    tokens: list[PreparedToken]
    word_ids: list[int] = field(init=False)

    def __post_init__(self):
        self.word_ids = [t.word_id for t in self.tokens]


@dataclass
class TokenOutput:
    """Full per-token inference output."""

    tags: TagPrediction
    lemma: DecodeResult
    diac: DecodeResult


class JointModel:
    def __init__(self, vocab: Vocab, config: ModelConfig, seed: int = 0):
        self.vocab = vocab
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.char_table = Parameter(
            glorot(rng, (len(vocab.chars), config.char_dim), len(vocab.chars), config.char_dim),
            name="embeddings.char")
        self.word_table = Parameter(
            glorot(rng, (len(vocab.words), config.word_dim), len(vocab.words), config.word_dim),
            name="embeddings.word")
        self.tagger = Tagger(vocab, self.char_table, self.word_table,
                             char_hidden=config.char_hidden, char_layers=config.char_layers,
                             word_hidden=config.word_hidden, word_layers=config.word_layers,
                             tag_embed_dim=config.tag_embed_dim, head_hidden=config.head_hidden,
                             dropout=config.dropout, use_candidates=config.use_candidates,
                             rng=rng)
        self.encoder = Encoder(self.char_table, self.word_table,
                               hidden=config.enc_hidden, layers=config.enc_layers,
                               dropout=config.dropout, rng=rng)
        tag_dim = self.tagger.tag_vector_dim if config.condition_on_tags else 0
        self.decoders = {}
        for task in LEXICAL_TASKS:
            alphabet = vocab.lemma_alphabet if task == "lemma" else vocab.diac_alphabet
            feed_ids = [vocab.char_id(c) for c in alphabet]
            self.decoders[task] = AttnDecoder(
                task, self.char_table, enc_dim=self.encoder.output_dim,
                hidden=config.dec_hidden, layers=config.dec_layers,
                d_voc=vocab.d_voc(task), tag_dim=tag_dim,
                feed_char_ids=feed_ids, bos_char_id=vocab.bos_id,
                dropout=config.dropout, rng=rng)

    # ------------------------------------------------------------------
    # parameter access

    def parameters(self) -> list[Parameter]:
        ps = [self.char_table, self.word_table]
        ps += self.tagger.parameters()
        ps += self.encoder.parameters()
        for task in LEXICAL_TASKS:
            ps += self.decoders[task].parameters()
        return ps

    def named_parameters(self) -> dict[str, Parameter]:
        named = {}
        for p in self.parameters():
            if p.name in named:
                raise DataError(f"duplicate parameter name {p.name}")
            named[p.name] = p
        return named

    def tagger_parameters(self) -> list[Parameter]:
        """Parameters owned by the tagger, including the tag embedding tables.

        The shared character/word embedding tables are excluded: they
        legitimately receive gradients from the generation losses.
        """
        return self.tagger.parameters()

    def zero_grads(self):
        for p in self.parameters():
            p.zero_grad()

    # ------------------------------------------------------------------
    # sentence preparation

    def prepare(self, sentence: list[AnnotatedToken],
                dictionary: MorphDictionary | None) -> PreparedSentence:
        vocab = self.vocab
        schema = vocab.schema
        tokens = []
        for j, token in enumerate(sentence):
            cand_ids = None
            oov = False
            if self.config.use_candidates:
                sets = candidates(dictionary, token.surface, schema,
                                  oov_policy=self.config.oov_policy)
                oov = sets.oov
                cand_ids = {}
                for f in schema.names:
                    ids = sorted(vocab.tag_to_id[f][v] for v in sets.sets[f]
                                 if v in vocab.tag_to_id[f])
                    cand_ids[f] = ids
            elif dictionary is not None:
                oov = not dictionary.lookup(token.surface)
            prepared = PreparedToken(
                surface=token.surface,
                word_id=vocab.word_id(token.surface),
                char_ids=[vocab.char_id(c) for c in token.surface],
                cand_ids=cand_ids,
                window=build_window(sentence, j, self.config.window, vocab),
                oov=oov,
                gold=token.gold)
            if token.gold is not None:
                prepared.gold_tag_ids = self.tagger.gold_tag_ids([token.gold])[0]
                prepared.gold_lemma = vocab.encode_target("lemma", token.gold.lemma)
                prepared.gold_diac = vocab.encode_target("diac", token.gold.diac)
            tokens.append(prepared)
        return PreparedSentence(tokens=tokens)

    # ------------------------------------------------------------------
    # training forward pass

    def training_losses(self, prepared: PreparedSentence, sampling_p: float,
                        rng: np.random.Generator, training: bool = True
                        ) -> tuple[dict[str, Tensor], list[TagPrediction]]:
        """All 16 per-feature losses for one sentence, in schema order then
        lemma and diac. Tag vectors fed to the decoders are detached."""
        cand_seqs = [t.cand_ids for t in prepared.tokens] if self.config.use_candidates else None
        char_seqs = [t.char_ids for t in prepared.tokens]
        predictions = self.tagger.tag_sentence(prepared.word_ids, char_seqs, cand_seqs,
                                               rng=rng, training=training)
        gold_ids = []
        for t in prepared.tokens:
            if t.gold_tag_ids is None:
                raise DataError(f"token {t.surface!r} lacks gold annotation; cannot train")
            gold_ids.append(t.gold_tag_ids)
        losses = self.tagger.loss(predictions, gold_ids)

        per_task: dict[str, list[Tensor]] = {task: [] for task in LEXICAL_TASKS}
        for j, tok in enumerate(prepared.tokens):
            tag_vec = self._conditioning_vector(predictions[j], tok)
            _, henc, enc_last = self.encoder.encode(tok.window, rng=rng, training=training)
            gold_targets = {"lemma": tok.gold_lemma, "diac": tok.gold_diac}
            for task in LEXICAL_TASKS:
                loss = self.decoders[task].train_loss(
                    henc, enc_last, tag_vec, gold_targets[task], sampling_p,
                    rng=rng, training=training,
                    tags_every_step=self.config.tags_every_step)
                per_task[task].append(loss)
        from .nn import autograd as ag
        for task in LEXICAL_TASKS:
            losses[task] = ag.mean_of(per_task[task])
        return losses, predictions

    def _conditioning_vector(self, prediction: TagPrediction,
                             token: PreparedToken) -> Tensor | None:
        if not self.config.condition_on_tags:
            return None
        if self.config.condition_on_gold_tags and token.gold_tag_ids is not None:
            return self.tagger.tag_vector_from_ids(token.gold_tag_ids)
        return self.tagger.predicted_tag_vector(prediction)

    # ------------------------------------------------------------------
    # inference

    def predict_sentence(self, prepared: PreparedSentence,
                         decode: DecodeConfig) -> list[TokenOutput]:
        cand_seqs = [t.cand_ids for t in prepared.tokens] if self.config.use_candidates else None
        char_seqs = [t.char_ids for t in prepared.tokens]
        predictions = self.tagger.tag_sentence(prepared.word_ids, char_seqs, cand_seqs,
                                               training=False)
        outputs = []
        for j, tok in enumerate(prepared.tokens):
            tag_vec = (self.tagger.predicted_tag_vector(predictions[j])
                       if self.config.condition_on_tags else None)
            _, henc, enc_last = self.encoder.encode(tok.window, training=False)
            max_len = decode.max_len_for(len(tok.char_ids))
            results = {}
            for task in LEXICAL_TASKS:
                decoder = self.decoders[task]
                if decode.beam_width == 1:
                    res = decoder.greedy(henc, enc_last, tag_vec, max_len,
                                         tags_every_step=self.config.tags_every_step)
                else:
                    res = decoder.beam(henc, enc_last, tag_vec, decode.beam_width, max_len,
                                       tags_every_step=self.config.tags_every_step)
                res.text = self.vocab.decode_output(task, res.indices)
                results[task] = res
            outputs.append(TokenOutput(tags=predictions[j], lemma=results["lemma"],
                                       diac=results["diac"]))
        return outputs
