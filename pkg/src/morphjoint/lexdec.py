"""Character-level shared encoder and per-task attention decoders.

The encoder is a stacked Bi-LSTM over a character window around the target
word, each position embedding the character concatenated with its
containing word's embedding. Lemma and diacritization decoders share that
encoder but nothing with each other. Each decode step consumes the
previous output character's embedding, the previous attention context and
(optionally) the predicted-tag vector, runs the stacked LSTM, attends over
the encoder outputs with bilinear scoring, and projects a combined
attentional state to the task's output alphabet.

Beam decoding is length-normalized (total log probability divided by the
number of emitted steps, end marker included) with deterministic
tie-breaking by score and then lexicographic output. The search always
also scores the pure greedy rollout, so widening the beam can never return
a worse-scoring output than greedy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import CharWindow, Vocab
from .errors import DataError, ShapeError
from .nn import autograd as ag
from .nn.autograd import Parameter, Tape, Tensor
from .nn.layers import BiLstmStack, Linear, LstmCell, glorot


@dataclass
class DecodeConfig:
    beam_width: int = 5
    max_output_length: int | None = None  # None: 4 * target word length + 8
    sampling_probability: float = 0.4
    window: int = 10

    def __post_init__(self):
        if self.beam_width < 1:
            raise DataError(f"beam width must be at least 1, got {self.beam_width}")
        if not 0.0 <= self.sampling_probability <= 1.0:
            raise DataError(f"sampling probability must be in [0, 1], got {self.sampling_probability}")

    def max_len_for(self, target_word_len: int) -> int:
        if self.max_output_length is not None:
            return self.max_output_length
        return 4 * target_word_len + 8


@dataclass
class DecodeResult:
    indices: list[int]          # output-alphabet indices, end marker excluded
    text: str
    score: float                # length-normalized log probability
    total_logprob: float
    steps: int
    truncated: bool
    attention: list = field(default_factory=list)


class Encoder:
    """Stacked Bi-LSTM over [char embedding; containing-word embedding] inputs."""

    def __init__(self, char_table: Parameter, word_table: Parameter,
                 hidden: int, layers: int, dropout: float, rng: np.random.Generator):
        self.char_table = char_table
        self.word_table = word_table
        self.dropout = dropout
        self.hidden = hidden
        in_dim = char_table.data.shape[1] + word_table.data.shape[1]
        self.stack = BiLstmStack(in_dim, hidden, layers, rng, peepholes=False, name="encoder")

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden

    def parameters(self):
        return self.stack.parameters()

    def encode(self, window: CharWindow, rng=None, training: bool = False):
        """Returns (per-position outputs, stacked (T, 2H) matrix, last output)."""
        inputs = []
        for ci, wi in zip(window.char_ids, window.word_ids):
            inputs.append(ag.concat([ag.embedding(self.char_table, ci),
                                     ag.embedding(self.word_table, wi)]))
        outputs = self.stack.forward(inputs, dropout_p=self.dropout if training else 0.0,
                                     rng=rng, training=training)
        stacked = ag.stack_rows(outputs)
        return outputs, stacked, outputs[-1]


class AttnDecoder:
    """Stacked LSTM decoder with bilinear attention for one generation task."""

    def __init__(self, task: str, char_table: Parameter, enc_dim: int,
                 hidden: int, layers: int, d_voc: int, tag_dim: int,
                 feed_char_ids: list[int], bos_char_id: int,
                 dropout: float, rng: np.random.Generator):
        if len(feed_char_ids) != d_voc - 1:
            raise ShapeError(f"decoder {task}: need one input char id per output character, "
                             f"got {len(feed_char_ids)} for d_voc {d_voc}")
        self.task = task
        self.char_table = char_table
        self.enc_dim = enc_dim
        self.hidden = hidden
        self.d_voc = d_voc
        self.eos = d_voc - 1
        self.tag_dim = tag_dim
        self.feed_char_ids = list(feed_char_ids)
        self.bos_char_id = bos_char_id
        self.dropout = dropout
        char_dim = char_table.data.shape[1]
        name = f"decoder.{task}"
        in_dim = char_dim + enc_dim + tag_dim
        self.cells = []
        for layer in range(layers):
            self.cells.append(LstmCell(in_dim if layer == 0 else hidden, hidden, rng,
                                       name=f"{name}.layer{layer}"))
        self.bridges = [Linear(enc_dim, 2 * hidden, rng, name=f"{name}.bridge{layer}")
                        for layer in range(layers)]
        self.attn_weight = Parameter(glorot(rng, (hidden, enc_dim), hidden, enc_dim),
                                     name=f"{name}.attention.w")
        self.combine = Linear(hidden + enc_dim, hidden, rng, name=f"{name}.combine")
        self.out = Linear(hidden, d_voc, rng, name=f"{name}.out")

    def parameters(self):
        ps = [p for c in self.cells for p in c.parameters()]
        for b in self.bridges:
            ps += b.parameters()
        ps.append(self.attn_weight)
        ps += self.combine.parameters() + self.out.parameters()
        return ps

    def initial_state(self, enc_last: Tensor):
        """Per-layer (h, c) derived from the final encoder output."""
        states = []
        for bridge in self.bridges:
            hc = ag.tanh(bridge(enc_last))
            h = Tensor(hc.data[:self.hidden].copy(), requires_grad=hc.requires_grad)
            c = Tensor(hc.data[self.hidden:].copy(), requires_grad=hc.requires_grad)
            if Tape.current is not None and hc.requires_grad:
                def bwd(hc=hc, h=h, c=c):
                    if h.grad is None and c.grad is None:
                        return
                    g = np.zeros_like(hc.data)
                    if h.grad is not None:
                        g[:self.hidden] = h.grad
                    if c.grad is not None:
                        g[self.hidden:] = c.grad
                    ag.accumulate(hc, g)
                Tape.current.record(bwd)
            states.append((h, c))
        return states

    def _step(self, prev_char_id: int, ctx: Tensor, tag_vec: Tensor | None,
              states, henc: Tensor, rng=None, training: bool = False):
        """One decode step; returns (logits, new states, new context, weights)."""
        parts = [ag.embedding(self.char_table, prev_char_id), ctx]
        if self.tag_dim:
            parts.append(tag_vec)
        x = ag.concat(parts)
        new_states = []
        h = None
        for cell, (h_prev, c_prev) in zip(self.cells, states):
            x = ag.dropout(x, self.dropout, rng, training) if training and self.dropout > 0 else x
            h, c = cell.step(x, h_prev, c_prev)
            new_states.append((h, c))
            x = h
        weights = ag.luong_score(h, henc, self.attn_weight)
        new_ctx = ag.attend(weights, henc)
        attn_state = ag.tanh(self.combine(ag.concat([h, new_ctx])))
        logits = self.out(attn_state)
        return logits, new_states, new_ctx, weights

    def zero_context(self) -> Tensor:
        return Tensor(np.zeros(self.enc_dim))

    def _check_tag_vec(self, tag_vec: Tensor | None):
        if self.tag_dim and tag_vec is None:
            raise DataError(f"decoder {self.task}: tag conditioning enabled but no tag vector given")

    # ------------------------------------------------------------------
    # training

    def train_loss(self, henc: Tensor, enc_last: Tensor, tag_vec: Tensor | None,
                   gold_indices: list[int], sampling_p: float,
                   rng: np.random.Generator | None = None, training: bool = True,
                   tags_every_step: bool = True) -> Tensor:
        """Mean per-step cross-entropy along the gold target plus end marker.

        With probability sampling_p each input character after the first is
        the model's previous argmax instead of the gold character (constant
        scheduled sampling; argmax keeps the draw deterministic given the
        generator state).
        """
        self._check_tag_vec(tag_vec)
        for k in gold_indices:
            if not 0 <= k < self.eos:
                raise DataError(f"decoder {self.task}: gold index {k} outside the output alphabet")
        states = self.initial_state(enc_last)
        ctx = self.zero_context()
        zero_tags = Tensor(np.zeros(self.tag_dim)) if self.tag_dim else None
        prev_char = self.bos_char_id
        targets = list(gold_indices) + [self.eos]
        losses = []
        for t, target in enumerate(targets):
            step_tags = tag_vec if (tags_every_step or t == 0) else zero_tags
            logits, states, ctx, _ = self._step(prev_char, ctx, step_tags, states, henc,
                                                rng=rng, training=training)
            step_loss, probs = ag.softmax_xent(logits, target)
            losses.append(step_loss)
            if t < len(gold_indices):
                feed = gold_indices[t]
                if sampling_p > 0.0 and rng.random() < sampling_p:
                    predicted = int(np.argmax(probs.data[:self.eos]))
                    feed = predicted
                prev_char = self.feed_char_ids[feed]
        return ag.mean_of(losses)

    # ------------------------------------------------------------------
    # decoding

    def greedy(self, henc: Tensor, enc_last: Tensor, tag_vec: Tensor | None,
               max_len: int, tags_every_step: bool = True,
               collect_attention: bool = False) -> DecodeResult:
        """Argmax rollout until the end marker or the length cap.

        Scoring matches beam search exactly: every emitted step counts,
        the end marker counts as a step when taken, and a rollout that
        fills the cap without ending is flagged truncated.
        """
        self._check_tag_vec(tag_vec)
        if max_len < 1:
            raise DataError(f"max output length must be at least 1, got {max_len}")
        states = self.initial_state(enc_last)
        ctx = self.zero_context()
        zero_tags = Tensor(np.zeros(self.tag_dim)) if self.tag_dim else None
        prev_char = self.bos_char_id
        indices: list[int] = []
        total = 0.0
        attention = []
        truncated = True
        t = 0
        while True:
            step_tags = tag_vec if (tags_every_step or t == 0) else zero_tags
            logits, states, ctx, weights = self._step(prev_char, ctx, step_tags, states, henc)
            if collect_attention:
                attention.append(weights.data.copy())
            probs = ag.softmax_probs(logits.data)
            k = int(np.argmax(probs))
            total += float(np.log(probs[k]))
            if k == self.eos:
                truncated = False
                break
            indices.append(k)
            prev_char = self.feed_char_ids[k]
            if len(indices) == max_len:
                break
            t += 1
        steps = len(indices) + (0 if truncated else 1)
        return DecodeResult(indices=indices, text="", score=total / steps,
                            total_logprob=total, steps=steps, truncated=truncated,
                            attention=attention)

    def beam(self, henc: Tensor, enc_last: Tensor, tag_vec: Tensor | None,
             beam_width: int, max_len: int, tags_every_step: bool = True) -> DecodeResult:
        """Length-normalized beam search.

        End-marker extensions compete for beam slots like any character, so
        width 1 reproduces greedy decoding exactly. The greedy rollout is
        always added to the completed pool, so the returned normalized
        score never falls below the greedy score.
        """
        self._check_tag_vec(tag_vec)
        completed: list[tuple[float, tuple, bool, float, int]] = []

        greedy_result = self.greedy(henc, enc_last, tag_vec, max_len,
                                    tags_every_step=tags_every_step)
        completed.append((greedy_result.score, tuple(greedy_result.indices),
                          greedy_result.truncated, greedy_result.total_logprob,
                          greedy_result.steps))

        zero_tags = Tensor(np.zeros(self.tag_dim)) if self.tag_dim else None
        # hypothesis: (cum_logprob, indices, prev_char, states, ctx)
        live = [(0.0, (), self.bos_char_id, self.initial_state(enc_last), self.zero_context())]
        for t in range(max_len + 1):
            step_tags = tag_vec if (tags_every_step or t == 0) else zero_tags
            candidates = []
            for cum, indices, prev_char, states, ctx in live:
                logits, new_states, new_ctx, _ = self._step(prev_char, ctx, step_tags,
                                                            states, henc)
                logp = np.log(ag.softmax_probs(logits.data))
                for k in range(self.d_voc):
                    candidates.append((cum + float(logp[k]), indices + (k,),
                                       new_states, new_ctx))
            candidates.sort(key=lambda cand: (-cand[0], cand[1]))
            live = []
            for cum, indices, states, ctx in candidates[:beam_width]:
                if indices[-1] == self.eos:
                    steps = len(indices)
                    completed.append((cum / steps, indices[:-1], False, cum, steps))
                elif len(indices) >= max_len:
                    steps = len(indices)
                    completed.append((cum / steps, indices, True, cum, steps))
                else:
                    live.append((cum, indices, self.feed_char_ids[indices[-1]], states, ctx))
            if not live:
                break
        best = min(completed, key=lambda c: (-c[0], c[1], c[2]))
        return DecodeResult(indices=list(best[1]), text="", score=best[0],
                            total_logprob=best[3], steps=best[4], truncated=best[2])
