"""Finite-difference gradient verification harness.

Compares analytic gradients against central differences for every entry of
every parameter (or a seeded random subsample for large tensors). Loss
functions must be pure in the parameters and deterministic: run with
dropout off and any sampling probability pinned to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError
from .autograd import Parameter, Tape


@dataclass
class ParamCheck:
    name: str
    max_rel_err: float
    worst_index: tuple
    checked: int


@dataclass
class GradCheckReport:
    tolerance: float
    entries: list[ParamCheck] = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        return max((e.max_rel_err for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance

    def format(self) -> str:
        lines = []
        for e in self.entries:
            lines.append(f"{e.name}: max rel err {e.max_rel_err:.3e} "
                         f"({e.checked} entries, worst at {e.worst_index})")
        lines.append(f"overall max rel err {self.max_rel_err:.3e} "
                     f"{'PASS' if self.passed else 'FAIL'} (tolerance {self.tolerance:.0e})")
        return "\n".join(lines)


def _rel_err(a: float, n: float) -> float:
    denom = max(abs(a), abs(n), 1e-6)
    return abs(a - n) / denom


def grad_check(loss_fn, params: list[Parameter], tolerance: float = 1e-4,
               step: float = 1e-5, max_entries: int = 64, seed: int = 0) -> GradCheckReport:
    """Check analytic gradients of loss_fn against central differences.

    loss_fn takes no arguments, builds the loss from the given parameters,
    and returns a scalar Tensor. It is evaluated 1 + 2k times where k is
    the number of sampled entries.
    """
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
        if not math.isfinite(loss.data):
            raise NumericError("grad check rejected: loss is not finite")
        tape.backward(loss)
    analytic = {id(p): p.grad.copy() for p in params}
    for p in params:
        p.zero_grad()

    rng = np.random.default_rng(seed)
    report = GradCheckReport(tolerance=tolerance)
    for p in params:
        n_entries = p.data.size
        if n_entries <= max_entries:
            flat_indices = np.arange(n_entries)
        else:
            flat_indices = rng.choice(n_entries, size=max_entries, replace=False)
            flat_indices.sort()
        worst = 0.0
        worst_idx = ()
        flat = p.data.reshape(-1)
        a_flat = analytic[id(p)].reshape(-1)
        for fi in flat_indices:
            orig = flat[fi]
            flat[fi] = orig + step
            up = loss_fn().item()
            flat[fi] = orig - step
            down = loss_fn().item()
            flat[fi] = orig
            numeric = (up - down) / (2.0 * step)
            err = _rel_err(float(a_flat[fi]), numeric)
            if err > worst:
                worst = err
                worst_idx = np.unravel_index(fi, p.data.shape)
        report.entries.append(ParamCheck(name=p.name or f"param{id(p)}",
                                         max_rel_err=worst,
                                         worst_index=tuple(int(i) for i in worst_idx),
                                         checked=len(flat_indices)))
    return report
