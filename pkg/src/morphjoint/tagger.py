"""Word-level multitask tagger for the closed-class morphological features.

Every token is represented by the concatenation of its word embedding, the
last state of a character LSTM run over the word, and the summed embeddings
of the candidate tag values per feature. A stacked peephole Bi-LSTM spans
the whole sentence and feeds one small head (tanh layer, then linear) per
feature. Word and character embedding tables are shared with the encoder
and are owned by the enclosing model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Vocab
from .errors import DataError, ShapeError
from .nn import autograd as ag
from .nn.autograd import Parameter, Tensor
from .nn.layers import BiLstmStack, Linear, LstmStack, glorot


@dataclass
class TagPrediction:
    """Per-feature distributions and argmax picks for one token."""

    logits: dict[str, Tensor] = field(default_factory=dict)
    probs: dict[str, np.ndarray] = field(default_factory=dict)
    argmax_id: dict[str, int] = field(default_factory=dict)
    argmax_value: dict[str, str] = field(default_factory=dict)


class Tagger:
    def __init__(self, vocab: Vocab, char_table: Parameter, word_table: Parameter,
                 char_hidden: int, char_layers: int, word_hidden: int, word_layers: int,
                 tag_embed_dim: int, head_hidden: int, dropout: float,
                 use_candidates: bool, rng: np.random.Generator):
        self.vocab = vocab
        self.schema = vocab.schema
        self.char_table = char_table
        self.word_table = word_table
        self.dropout = dropout
        self.use_candidates = use_candidates
        self.tag_embed_dim = tag_embed_dim
        char_dim = char_table.data.shape[1]
        word_dim = word_table.data.shape[1]

        self.char_lstm = LstmStack(char_dim, char_hidden, char_layers, rng,
                                   name="tagger.char_lstm")
        self.tag_tables = {}
        for f in self.schema.names:
            n_values = len(self.schema.values[f])
            self.tag_tables[f] = Parameter(
                glorot(rng, (n_values, tag_embed_dim), n_values, tag_embed_dim),
                name=f"tagger.tag_embed.{f}")

        v_dim = word_dim + char_hidden
        if use_candidates:
            v_dim += len(self.schema.names) * tag_embed_dim
        self.v_dim = v_dim
        self.word_bilstm = BiLstmStack(v_dim, word_hidden, word_layers, rng,
                                       peepholes=True, name="tagger.word_bilstm")
        self.heads = {}
        for f in self.schema.names:
            n_values = len(self.schema.values[f])
            self.heads[f] = (Linear(2 * word_hidden, head_hidden, rng, name=f"tagger.head.{f}.hidden"),
                             Linear(head_hidden, n_values, rng, name=f"tagger.head.{f}.out"))

    def parameters(self) -> list[Parameter]:
        ps = list(self.char_lstm.parameters())
        for f in self.schema.names:
            ps.append(self.tag_tables[f])
        ps += self.word_bilstm.parameters()
        for f in self.schema.names:
            hidden, out = self.heads[f]
            ps += hidden.parameters() + out.parameters()
        return ps

    # ------------------------------------------------------------------
    # token representation

    def char_summary(self, char_ids: list[int], rng=None, training: bool = False) -> Tensor:
        """Last top-layer state of the character LSTM over one word."""
        if not char_ids:
            raise ShapeError("char summary: empty character sequence")
        embedded = [ag.embedding(self.char_table, i) for i in char_ids]
        return self.char_lstm.last_state(embedded, dropout_p=self.dropout if training else 0.0,
                                         rng=rng, training=training)

    def candidate_embedding(self, cand_ids: dict[str, list[int]]) -> Tensor:
        """Per feature, the sum of candidate value embeddings, concatenated.

        Candidate values are alternatives rather than a sequence, so a sum
        is the natural order-free aggregate; an empty set contributes a
        zero block.
        """
        parts = []
        for f in self.schema.names:
            ids = cand_ids[f]
            if ids:
                parts.append(ag.embedding_sum(self.tag_tables[f], ids))
            else:
                parts.append(Tensor(np.zeros(self.tag_embed_dim)))
        return ag.concat(parts)

    def token_vector(self, word_id: int, char_ids: list[int],
                     cand_ids: dict[str, list[int]] | None,
                     rng=None, training: bool = False) -> Tensor:
        w = ag.embedding(self.word_table, word_id)
        s = self.char_summary(char_ids, rng=rng, training=training)
        if self.use_candidates:
            if cand_ids is None:
                raise DataError("candidate sets required but missing for a token")
            return ag.concat([w, s, self.candidate_embedding(cand_ids)])
        return ag.concat([w, s])

    # ------------------------------------------------------------------
    # sentence tagging

    def tag_sentence(self, word_ids: list[int], char_id_seqs: list[list[int]],
                     cand_id_seqs, rng=None, training: bool = False) -> list[TagPrediction]:
        vs = []
        for j, word_id in enumerate(word_ids):
            cands = cand_id_seqs[j] if cand_id_seqs is not None else None
            vs.append(self.token_vector(word_id, char_id_seqs[j], cands,
                                        rng=rng, training=training))
        contexts = self.word_bilstm.forward(vs, dropout_p=self.dropout if training else 0.0,
                                            rng=rng, training=training)
        predictions = []
        for ctx in contexts:
            pred = TagPrediction()
            for f in self.schema.names:
                hidden, out = self.heads[f]
                logits = out(ag.tanh(hidden(ctx)))
                probs = ag.softmax_probs(logits.data)
                k = int(np.argmax(probs))
                pred.logits[f] = logits
                pred.probs[f] = probs
                pred.argmax_id[f] = k
                pred.argmax_value[f] = self.schema.values[f][k]
            predictions.append(pred)
        return predictions

    def loss(self, predictions: list[TagPrediction],
             gold_tag_ids: list[dict[str, int]]) -> dict[str, Tensor]:
        """Per-feature cross-entropy averaged over the sentence's tokens."""
        losses = {}
        for f in self.schema.names:
            per_token = []
            for pred, gold in zip(predictions, gold_tag_ids):
                step_loss, _ = ag.softmax_xent(pred.logits[f], gold[f])
                per_token.append(step_loss)
            losses[f] = ag.mean_of(per_token)
        return losses

    def gold_tag_ids(self, analyses) -> list[dict[str, int]]:
        out = []
        for a in analyses:
            ids = {}
            for f in self.schema.names:
                value = a.tags[f]
                table = self.vocab.tag_to_id[f]
                if value not in table:
                    raise DataError(f"gold value {value!r} for feature {f} "
                                    "is not in the tag vocabulary")
                ids[f] = table[value]
            out.append(ids)
        return out

    def predicted_tag_vector(self, prediction: TagPrediction) -> Tensor:
        """Concatenated embeddings of the argmax values, detached.

        Uses the same embedding tables as the candidate representation.
        Detachment stops generation losses from backpropagating into the
        tagger or the tag embeddings.
        """
        parts = [self.tag_tables[f].data[prediction.argmax_id[f]] for f in self.schema.names]
        return Tensor(np.concatenate(parts))

    def tag_vector_from_ids(self, tag_ids: dict[str, int]) -> Tensor:
        parts = [self.tag_tables[f].data[tag_ids[f]] for f in self.schema.names]
        return Tensor(np.concatenate(parts))

    @property
    def tag_vector_dim(self) -> int:
        return len(self.schema.names) * self.tag_embed_dim
