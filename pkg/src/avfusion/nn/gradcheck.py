"""Central-finite-difference verification of backward passes.

The scalar under test is a fixed random projection of the layer output,
L = sum(w * forward(x)), so one backward call yields analytic gradients for
every parameter and input entry at once. Each entry is then perturbed by
+-h and compared against (L+ - L-) / 2h.

Relative error uses a floor of 0.01 in the denominator: for gradients below
that magnitude the criterion degrades gracefully to an absolute one instead
of exploding on near-zero entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_err: float
    worst_param: str
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"gradient check {status}: max rel err {self.max_rel_err:.3e} "
                f"at {self.worst_param!r} (tolerance {self.tolerance:.0e})")


class PrimaryOutput:
    """Adapter for layers returning (primary, diagnostic) tuples; gradients
    flow through the primary output only."""

    def __init__(self, layer):
        self.layer = layer
        self.params = layer.params
        self.grads = layer.grads

    def zero_grads(self):
        self.layer.zero_grads()

    def forward(self, x, mask=None):
        return self.layer.forward(x, mask=mask)[0]

    def backward(self, grad):
        return self.layer.backward(grad)


class ConcatOutputs:
    """Adapter for layers returning a list of maps (one per filter width):
    flattens them into one vector for checking."""

    def __init__(self, layer):
        self.layer = layer
        self.params = layer.params
        self.grads = layer.grads

    def zero_grads(self):
        self.layer.zero_grads()

    def forward(self, x, mask=None):
        outs = self.layer.forward(x, mask=mask)
        self._shapes = [o.shape for o in outs]
        return np.concatenate([o.ravel() for o in outs])

    def backward(self, grad):
        pieces, offset = [], 0
        for shape in self._shapes:
            size = int(np.prod(shape))
            pieces.append(grad[offset:offset + size].reshape(shape))
            offset += size
        return self.layer.backward(pieces)


def gradient_check(layer, x: np.ndarray, mask=None, *, h: float = 1e-5,
                   tolerance: float = 1e-5, seed: int = 0) -> GradCheckReport:
    """Check layer.backward against central differences on every entry.

    Requires double precision; float32 round-off swamps the h^2 truncation
    term and produces spurious failures.
    """
    x = np.array(x, dtype=np.float64)
    probe = layer.forward(x, mask=mask)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x9E3779B9])))
    w = rng.standard_normal(probe.shape)

    def scalar() -> float:
        # perturbations happen in place, so x and params are read fresh here
        return float(np.sum(w * layer.forward(x, mask=mask)))

    layer.zero_grads()
    layer.forward(x, mask=mask)
    gx = layer.backward(w.copy())
    analytic = {name: g.copy() for name, g in layer.grads.items()}
    analytic["__input__"] = gx

    worst_err, worst_name = 0.0, ""
    arrays = dict(layer.params)
    arrays["__input__"] = x
    for name, arr in arrays.items():
        a_grad = analytic[name]
        flat = arr.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = scalar()
            flat[idx] = orig - h
            down = scalar()
            flat[idx] = orig
            fd = (up - down) / (2 * h)
            a = a_grad.reshape(-1)[idx]
            err = abs(a - fd) / max(abs(a), abs(fd), 1e-2)
            if err > worst_err:
                worst_err, worst_name = err, name
    return GradCheckReport(max_rel_err=worst_err, worst_param=worst_name,
                           tolerance=tolerance)
