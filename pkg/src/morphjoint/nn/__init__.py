"""Minimal deterministic neural substrate: tensors, layers, Adam, grad checks."""

from .autograd import (
    Parameter,
    Tape,
    Tensor,
    add,
    add_n,
    affine,
    attend,
    concat,
    dropout,
    embedding,
    embedding_sum,
    luong_score,
    mean_of,
    mul,
    scale,
    sigmoid,
    softmax_probs,
    softmax_xent,
    stack_rows,
    tanh,
)
from .gradcheck import GradCheckReport, grad_check
from .layers import (
    BiLstmLayer,
    BiLstmStack,
    Linear,
    LstmCell,
    LstmStack,
    bilstm_forward,
    glorot,
    lstm_step,
)
from .optim import AdamConfig, adam_step, clip_gradients, global_grad_norm
